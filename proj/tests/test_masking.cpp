#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "szo/errors.hpp"
#include "szo/masking.hpp"

namespace szo {
namespace {

TEST(MagnitudeMask, KeepsLargestHalf) {
  const ParamVector w(std::vector<double>{0.5, -2.0, 0.1, 1.0});
  EXPECT_EQ(magnitude_mask(w, Mask::ones(4), 0.5).to_string(), "0101");
}

TEST(MagnitudeMask, KeepAllIsIdentity) {
  const ParamVector w(std::vector<double>{3, 1, 2});
  const Mask prev = Mask::from_string("101");
  EXPECT_EQ(magnitude_mask(w, prev, 1.0), prev);
}

TEST(MagnitudeMask, TiesGoToLowerIndex) {
  const ParamVector w(std::vector<double>{1, 1, 1, 1, 1});
  EXPECT_EQ(magnitude_mask(w, Mask::ones(5), 0.4).to_string(), "11000");
}

TEST(MagnitudeMask, EmptyPreviousMaskUnchanged) {
  const ParamVector w(std::vector<double>{1, 2});
  EXPECT_EQ(magnitude_mask(w, Mask::zeros(2), 0.5), Mask::zeros(2));
}

TEST(MagnitudeMask, KeepFractionValidated) {
  const ParamVector w(std::vector<double>{1, 2});
  EXPECT_THROW(magnitude_mask(w, Mask::ones(2), 0.0), DomainError);
  EXPECT_THROW(magnitude_mask(w, Mask::ones(2), 1.5), DomainError);
}

TEST(MagnitudeMask, NestedWithExpectedCountAndLargestValues) {
  RngStream rng(17, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(80);
    const ParamVector w(sample_std_normal(rng, n));
    Mask prev = Mask::zeros(n);
    for (std::size_t i = 0; i < n; ++i) prev.set(i, rng.uniform() < 0.7);
    const double keep = rng.uniform(0.05, 1.0);
    const Mask next = magnitude_mask(w, prev, keep);
    EXPECT_TRUE(next.is_subset_of(prev));
    if (prev.count() == 0) continue;
    EXPECT_EQ(next.count(),
              static_cast<std::size_t>(std::ceil(keep * double(prev.count()))));
    // Every kept weight is at least as large as every dropped active weight.
    double min_kept = INFINITY;
    double max_dropped = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (next.test(i)) min_kept = std::min(min_kept, std::abs(w[i]));
      else if (prev.test(i)) max_dropped = std::max(max_dropped, std::abs(w[i]));
    }
    EXPECT_GE(min_kept, max_dropped);
  }
}

TEST(KeptCount, CeilingRule) {
  EXPECT_EQ(kept_count(10, 0.8), 8u);
  EXPECT_EQ(kept_count(11, 0.8), 9u);
  EXPECT_EQ(kept_count(1, 0.1), 1u);
  EXPECT_EQ(kept_count(0, 0.8), 0u);
}

TEST(RandomMask, SingleCandidateIsTheSampledMask) {
  const Mask prev = Mask::from_string("1111011110");
  RngStream rng(3, 9);
  RngStream replay(3, 9);
  const Mask chosen = random_mask_select(prev, 0.5, 1,
                                         [](const Mask&) { return 0.0; }, rng);
  EXPECT_EQ(chosen, sample_nested_mask(prev, 0.5, replay));
}

TEST(RandomMask, EqualScoresPickFirstSampled) {
  const Mask prev = Mask::ones(30);
  RngStream rng(5, 5);
  RngStream replay(5, 5);
  const Mask chosen = random_mask_select(prev, 0.3, 10,
                                         [](const Mask&) { return 1.0; }, rng);
  EXPECT_EQ(chosen, sample_nested_mask(prev, 0.3, replay));
}

TEST(RandomMask, ReturnsBestScoringCandidate) {
  RngStream setup(8, 0);
  const std::vector<double> weights = sample_std_normal(setup, 40);
  auto score = [&](const Mask& m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) acc += m.test(i) ? weights[i] : 0.0;
    return acc;
  };
  Mask prev = Mask::ones(40);
  prev.set(3, false);
  prev.set(17, false);
  for (std::uint64_t s = 0; s < 20; ++s) {
    RngStream rng(40, s);
    RngStream replay(40, s);
    const Mask chosen = random_mask_select(prev, 0.6, 25, score, rng);
    double best = -INFINITY;
    for (int c = 0; c < 25; ++c) {
      best = std::max(best, score(sample_nested_mask(prev, 0.6, replay)));
    }
    EXPECT_EQ(score(chosen), best);
    EXPECT_TRUE(chosen.is_subset_of(prev));
    EXPECT_EQ(chosen.count(), kept_count(prev.count(), 0.6));
  }
}

TEST(RandomMask, ZeroCandidatesRejected) {
  RngStream rng(1, 1);
  EXPECT_THROW(random_mask_select(Mask::ones(3), 0.5, 0,
                                  [](const Mask&) { return 0.0; }, rng),
               DomainError);
}

TEST(ShouldSparsify, Cases) {
  const MaskSchedule s{5, 0.8, 3};
  EXPECT_FALSE(should_sparsify(0, s, 0));
  EXPECT_FALSE(should_sparsify(4, s, 0));
  EXPECT_TRUE(should_sparsify(5, s, 0));
  EXPECT_TRUE(should_sparsify(10, s, 2));
  EXPECT_FALSE(should_sparsify(15, s, 3));
  EXPECT_THROW(should_sparsify(5, MaskSchedule{0, 0.8, 3}, 0), DomainError);
}

TEST(ProjectSchedule, PublishedNetworkSizes) {
  EXPECT_EQ(project_schedule(266610, 0.8, 19), 3844u);
  EXPECT_EQ(project_schedule(4301642, 0.8, 19), 61996u);
  EXPECT_EQ(project_schedule(1234, 0.8, 0), 1234u);
}

TEST(ProjectSchedule, MatchesRepeatedMagnitudeMasking) {
  RngStream rng(99, 0);
  const ParamVector w(sample_std_normal(rng, 1000));
  Mask m = Mask::ones(1000);
  for (std::size_t e = 1; e <= 12; ++e) {
    m = magnitude_mask(w, m, 0.8);
    EXPECT_EQ(m.count(), project_schedule(1000, 0.8, e));
  }
}

}  // namespace
}  // namespace szo
