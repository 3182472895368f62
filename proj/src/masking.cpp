#include "szo/masking.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "szo/errors.hpp"

namespace szo {

namespace {

void check_keep(double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw DomainError("keep_fraction must lie in (0, 1]");
  }
}

}  // namespace

std::size_t kept_count(std::size_t nbar, double keep_fraction) {
  return static_cast<std::size_t>(
      std::ceil(keep_fraction * static_cast<double>(nbar)));
}

Mask magnitude_mask(const ParamVector& w, const Mask& prev,
                    double keep_fraction) {
  check_keep(keep_fraction);
  if (w.size() != prev.size()) {
    throw DimensionError("magnitude_mask: weight/mask length mismatch");
  }
  if (prev.count() == 0) {
    std::clog << "szo: magnitude_mask on an empty mask, left unchanged\n";
    return prev;
  }
  auto active = prev.active_indices();
  const std::size_t keep = kept_count(active.size(), keep_fraction);
  // active is ascending, so a stable sort keeps lower indices first on ties.
  std::stable_sort(active.begin(), active.end(),
                   [&](std::size_t a, std::size_t b) {
                     return std::abs(w[a]) > std::abs(w[b]);
                   });
  Mask next = Mask::zeros(prev.size());
  for (std::size_t r = 0; r < keep; ++r) next.set(active[r], true);
  return next;
}

Mask sample_nested_mask(const Mask& prev, double keep_fraction,
                        RngStream& rng) {
  check_keep(keep_fraction);
  auto active = prev.active_indices();
  const std::size_t keep = kept_count(active.size(), keep_fraction);
  // Partial Fisher-Yates: the first `keep` slots are a uniform subset.
  for (std::size_t r = 0; r < keep; ++r) {
    const std::size_t j = r + rng.uniform_index(active.size() - r);
    std::swap(active[r], active[j]);
  }
  Mask next = Mask::zeros(prev.size());
  for (std::size_t r = 0; r < keep; ++r) next.set(active[r], true);
  return next;
}

Mask random_mask_select(const Mask& prev, double keep_fraction,
                        std::size_t candidates, const MaskScorer& score,
                        RngStream& rng) {
  check_keep(keep_fraction);
  if (candidates < 1) throw DomainError("random_mask_select: candidates must be >= 1");
  if (prev.count() == 0) {
    std::clog << "szo: random_mask_select on an empty mask, left unchanged\n";
    return prev;
  }
  std::vector<Mask> pool;
  pool.reserve(candidates);
  for (std::size_t c = 0; c < candidates; ++c) {
    pool.push_back(sample_nested_mask(prev, keep_fraction, rng));
  }
  std::size_t best = 0;
  double best_score = score(pool[0]);
  for (std::size_t c = 1; c < candidates; ++c) {
    const double s = score(pool[c]);
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return pool[best];
}

bool should_sparsify(std::size_t step, const MaskSchedule& schedule,
                     std::size_t events_so_far) {
  if (schedule.interval_steps == 0) {
    throw DomainError("schedule: interval_steps must be >= 1");
  }
  return step > 0 && step % schedule.interval_steps == 0 &&
         events_so_far < schedule.max_events;
}

std::size_t project_schedule(std::size_t n0, double keep_fraction,
                             std::size_t events) {
  std::size_t nbar = n0;
  for (std::size_t e = 0; e < events; ++e) nbar = kept_count(nbar, keep_fraction);
  return nbar;
}

}  // namespace szo
