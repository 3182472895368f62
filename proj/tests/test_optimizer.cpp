#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support/oracles.hpp"
#include "szo/optimizer.hpp"

namespace szo {
namespace {

std::shared_ptr<const Dataset> small_blobs() {
  RngStream rng(314, 0);
  return std::make_shared<const Dataset>(synth_blobs(rng, 3, 4, 40, 0.6));
}

std::shared_ptr<MlpObjective> small_mlp() {
  RngStream rng(314, 1);
  return mlp_objective({4, 6, 3}, small_blobs(), rng);
}

OptConfig small_config(Variant v) {
  OptConfig c;
  c.variant = v;
  c.k = 4;
  c.learning_rate = 0.1;
  c.batch_size = 16;
  c.total_steps = 30;
  c.seed = 5;
  c.schedule = MaskSchedule{5, 0.8, 4};
  c.random_candidates = 6;
  c.neighbor_interval = 10;
  c.neighbor_samples = 3;
  return c;
}

TEST(TheoryLr, Values) {
  EXPECT_DOUBLE_EQ(theory_lr(4, 1.0), 1.0 / 32.0);
  EXPECT_DOUBLE_EQ(theory_lr(0, 1.0), 1.0 / 16.0);
  EXPECT_GT(theory_lr(10, 2.0), theory_lr(11, 2.0));
  EXPECT_THROW(theory_lr(4, 0.0), DomainError);
}

TEST(Variant, NamesRoundTrip) {
  for (auto v : {Variant::Dense, Variant::FreezeMagnitude, Variant::FreezeRandom,
                 Variant::PruneMagnitude, Variant::PruneRandom}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("prune"), DomainError);
}

TEST(OptConfig, Validation) {
  OptConfig c;
  EXPECT_NO_THROW(c.validate());
  c.mu = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = OptConfig{};
  c.k = 0;
  EXPECT_THROW(c.validate(), DomainError);
  c = OptConfig{};
  c.schedule.keep_fraction = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(OptStep, MatchesExactProjectedStep) {
  const std::size_t n = 10;
  std::vector<double> diag(n);
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = 1.0 + 0.1 * static_cast<double>(i);
    b[i] = 0.5 - 0.07 * static_cast<double>(i);
  }
  const auto q = QuadraticObjective::diagonal(diag, b);
  OptConfig c;
  c.variant = Variant::FreezeMagnitude;
  c.k = 5000;
  c.mu = 1e-3;
  c.learning_rate = 0.1;
  c.schedule.interval_steps = 1000;
  std::vector<double> w0(n);
  for (std::size_t i = 0; i < n; ++i) w0[i] = std::sin(static_cast<double>(i));
  OptState s = init_state(c, ParamVector(w0));
  s.m = Mask::from_string("1011001101");
  const auto grad = q.true_grad(w0, {});
  opt_step(s, q, {}, c);
  const double tol = 1e-2 * testing::norm(grad);
  for (std::size_t i = 0; i < n; ++i) {
    const double expected = w0[i] - (s.m.test(i) ? 0.1 * grad[i] : 0.0);
    EXPECT_NEAR(s.w[i], expected, tol) << "coordinate " << i;
  }
}

TEST(OptStep, FailedStepLeavesStateUntouched) {
  const testing::NanAbove f(2, 0.5);
  OptConfig c;
  c.learning_rate = 0.1;
  OptState s = init_state(c, ParamVector(std::vector<double>{0.49, 0.0}));
  const OptState before = s;
  EXPECT_THROW(opt_step(s, f, {}, c), NumericError);
  EXPECT_EQ(s, before);
}

TEST(Run, ZeroStepsGivesInitialRowOnly) {
  const auto mlp = small_mlp();
  auto c = small_config(Variant::Dense);
  c.total_steps = 0;
  const auto r = run(c, *mlp);
  ASSERT_EQ(r.record.rows.size(), 1u);
  EXPECT_EQ(r.record.rows[0].step, 0u);
  EXPECT_DOUBLE_EQ(r.record.rows[0].cum_loss, r.record.rows[0].train_loss);
}

TEST(Run, DeterministicForSameSeed) {
  const auto mlp = small_mlp();
  for (auto v : {Variant::Dense, Variant::FreezeRandom, Variant::PruneMagnitude}) {
    const auto c = small_config(v);
    const auto a = run(c, *mlp);
    const auto b = run(c, *mlp);
    EXPECT_EQ(a.record.rows, b.record.rows);
    EXPECT_EQ(a.final_state, b.final_state);
  }
}

TEST(Run, ThreadCountDoesNotChangeResults) {
  const auto mlp = small_mlp();
  auto c = small_config(Variant::PruneRandom);
  const auto serial = run(c, *mlp);
  c.threads = 3;
  const auto parallel = run(c, *mlp);
  EXPECT_EQ(serial.record.rows, parallel.record.rows);
}

TEST(Run, DenseEqualsFreezeWithoutEvents) {
  const auto mlp = small_mlp();
  const auto dense = run(small_config(Variant::Dense), *mlp);
  auto c = small_config(Variant::FreezeMagnitude);
  c.schedule.max_events = 0;
  const auto frozen = run(c, *mlp);
  EXPECT_EQ(dense.record.rows, frozen.record.rows);
}

TEST(Run, DenseMaskStaysFull) {
  const auto mlp = small_mlp();
  RunOptions opts;
  opts.observer = [](const OptState& s, const StepInfo& info) {
    EXPECT_EQ(info.mask.count(), s.w.size());
    EXPECT_FALSE(info.event_fired);
  };
  run(small_config(Variant::Dense), *mlp, opts);
}

TEST(Run, FrozenCoordinatesNeverMove) {
  const auto mlp = small_mlp();
  for (auto v : {Variant::FreezeMagnitude, Variant::FreezeRandom}) {
    RunOptions opts;
    opts.observer = [](const OptState& s, const StepInfo& info) {
      for (std::size_t i = 0; i < s.w.size(); ++i) {
        if (!info.mask.test(i)) {
          EXPECT_EQ(s.w[i], info.w_at_step[i]);
        }
      }
    };
    run(small_config(v), *mlp, opts);
  }
}

TEST(Run, PrunedCoordinatesStayZero) {
  const auto mlp = small_mlp();
  for (auto v : {Variant::PruneMagnitude, Variant::PruneRandom}) {
    RunOptions opts;
    opts.observer = [](const OptState& s, const StepInfo& info) {
      for (std::size_t i = 0; i < s.w.size(); ++i) {
        if (!info.mask.test(i)) {
          EXPECT_EQ(info.w_at_step[i], 0.0);
          EXPECT_EQ(s.w[i], 0.0);
        }
      }
    };
    run(small_config(v), *mlp, opts);
  }
}

TEST(Run, MasksAreNestedAndFollowSchedule) {
  const auto mlp = small_mlp();
  for (auto v : {Variant::FreezeMagnitude, Variant::PruneRandom}) {
    const auto c = small_config(v);
    Mask prev = Mask::ones(mlp->dim());
    std::size_t events = 0;
    RunOptions opts;
    opts.observer = [&](const OptState& s, const StepInfo& info) {
      EXPECT_TRUE(info.mask.is_subset_of(prev));
      prev = info.mask;
      if (info.event_fired) ++events;
      EXPECT_EQ(s.events_fired, events);
      EXPECT_EQ(info.mask.count(),
                project_schedule(mlp->dim(), c.schedule.keep_fraction, events));
    };
    const auto r = run(c, *mlp, opts);
    EXPECT_EQ(events, 4u);
  }
}

TEST(Run, RowInvariants) {
  const auto mlp = small_mlp();
  const auto c = small_config(Variant::PruneMagnitude);
  const auto r = run(c, *mlp);
  ASSERT_EQ(r.record.rows.size(), c.total_steps + 1);
  double running = 0.0;
  const std::size_t per_epoch = steps_per_epoch(*mlp, c.batch_size);
  for (std::size_t t = 0; t < r.record.rows.size(); ++t) {
    const auto& row = r.record.rows[t];
    EXPECT_EQ(row.step, t);
    EXPECT_GE(row.sparsity, 0.0);
    EXPECT_LE(row.sparsity, 1.0);
    running += row.train_loss;
    EXPECT_EQ(row.cum_loss, running);
    EXPECT_EQ(row.fevals, t * c.k * 2);
    EXPECT_EQ(row.test_acc.has_value(), t % per_epoch == 0);
    EXPECT_EQ(row.lipschitz_neighbor.has_value(), t % c.neighbor_interval == 0);
    EXPECT_EQ(row.grad_dist.has_value(), t > 0);
    if (row.test_acc) {
      EXPECT_GE(*row.test_acc, 0.0);
      EXPECT_LE(*row.test_acc, 1.0);
    }
  }
  EXPECT_EQ(r.final_state.fevals, c.total_steps * c.k * 2);
}

TEST(Run, OnePointChargesOneEvaluationPerSample) {
  const auto mlp = small_mlp();
  auto c = small_config(Variant::Dense);
  c.kind = EstimatorKind::OnePoint;
  c.learning_rate = 0.001;
  c.total_steps = 5;
  EXPECT_EQ(run(c, *mlp).record.rows.back().fevals, 5 * c.k);
}

TEST(Run, TheoryModeUsesHintOrConfiguredLipschitz) {
  std::vector<std::size_t> active{0, 2, 4};
  const auto q = sparse_quadratic_objective(8, active, 2.5, 1.0);
  OptConfig c;
  c.variant = Variant::FreezeMagnitude;
  c.theory_mode = true;
  c.total_steps = 12;
  c.schedule = MaskSchedule{4, 0.5, 2};
  RunOptions opts;
  opts.observer = [&](const OptState&, const StepInfo& info) {
    EXPECT_DOUBLE_EQ(info.learning_rate, theory_lr(info.mask.count(), 2.5));
  };
  run(c, q, opts);

  c.lipschitz = 7.0;
  opts.observer = [&](const OptState&, const StepInfo& info) {
    EXPECT_DOUBLE_EQ(info.learning_rate, theory_lr(info.mask.count(), 7.0));
  };
  run(c, q, opts);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  const auto mlp = small_mlp();
  const auto r = run(small_config(Variant::PruneRandom), *mlp);
  const auto bytes = checkpoint_bytes(r.final_state);
  const auto loaded = checkpoint_from_bytes(bytes);
  EXPECT_EQ(checkpoint_bytes(loaded), bytes);

  const auto dir = testing::scratch_dir("ckpt");
  const auto path = (dir / "state.ckpt").string();
  checkpoint_save(r.final_state, path);
  EXPECT_EQ(checkpoint_bytes(checkpoint_load(path)), bytes);
}

TEST(Checkpoint, CorruptionIsFormatError) {
  const auto mlp = small_mlp();
  auto c = small_config(Variant::FreezeMagnitude);
  c.total_steps = 3;
  const auto bytes = checkpoint_bytes(run(c, *mlp).final_state);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(checkpoint_from_bytes(bad_magic), FormatError);

  auto bad_version = bytes;
  bad_version[4] = 99;
  EXPECT_THROW(checkpoint_from_bytes(bad_version), FormatError);

  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 5);
  EXPECT_THROW(checkpoint_from_bytes(truncated), FormatError);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(checkpoint_from_bytes(trailing), FormatError);

  EXPECT_THROW(checkpoint_load("/nonexistent/dir/ckpt"), FormatError);
}

TEST(Checkpoint, ResumedRunMatchesUninterruptedTail) {
  const auto mlp = small_mlp();
  for (auto v : {Variant::PruneRandom, Variant::FreezeMagnitude}) {
    auto c = small_config(v);
    c.total_steps = 40;
    const auto full = run(c, *mlp);

    auto head_cfg = c;
    head_cfg.total_steps = 17;
    const auto head = run(head_cfg, *mlp);
    const auto saved = checkpoint_from_bytes(checkpoint_bytes(head.final_state));

    RunOptions opts;
    opts.resume = saved;
    const auto tail = run(c, *mlp, opts);
    ASSERT_EQ(tail.record.rows.size(), 23u);
    for (std::size_t i = 0; i < tail.record.rows.size(); ++i) {
      EXPECT_EQ(tail.record.rows[i], full.record.rows[18 + i]);
    }
    EXPECT_EQ(tail.final_state.w.values().size(), full.final_state.w.size());
    EXPECT_TRUE(std::equal(tail.final_state.w.values().begin(),
                           tail.final_state.w.values().end(),
                           full.final_state.w.values().begin()));
  }
}

TEST(Checkpoint, ResumeRejectsMismatchedSeed) {
  const auto mlp = small_mlp();
  auto c = small_config(Variant::Dense);
  c.total_steps = 2;
  const auto head = run(c, *mlp);
  c.seed = 6;
  c.total_steps = 4;
  RunOptions opts;
  opts.resume = head.final_state;
  EXPECT_THROW(run(c, *mlp, opts), DomainError);
}

TEST(Run, NumericFailureKeepsPartialRecord) {
  const testing::NanAbove f(3, 5.0);
  OptConfig c;
  c.learning_rate = 0.3;
  c.k = 4;
  c.total_steps = 200;
  try {
    run(c, f);
    FAIL() << "expected RunAborted";
  } catch (const RunAborted& e) {
    const auto& rows = e.partial().rows;
    ASSERT_FALSE(rows.empty());
    EXPECT_EQ(rows.back().step, e.state().step);
    EXPECT_TRUE(e.state().w.all_finite());
    EXPECT_LT(e.state().step, c.total_steps);
  }
}

TEST(BatchForStep, EpochCoversTrainingSplitOnce) {
  const auto mlp = small_mlp();
  const auto c = small_config(Variant::Dense);
  const std::size_t per_epoch = steps_per_epoch(*mlp, c.batch_size);
  std::vector<int> seen(mlp->dataset()->num_examples, 0);
  for (std::size_t s = per_epoch; s < 2 * per_epoch; ++s) {
    for (auto i : batch_for_step(*mlp, c, s)) ++seen[i];
  }
  for (auto i : mlp->dataset()->train) EXPECT_EQ(seen[i], 1);
  EXPECT_EQ(batch_for_step(*mlp, c, 3), batch_for_step(*mlp, c, 3));
}

TEST(ConfigHash, SensitiveToFieldsButNotThreads) {
  OptConfig a;
  OptConfig b;
  b.threads = 8;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.mu = 0.06;
  EXPECT_NE(config_hash(a), config_hash(b));
}

}  // namespace
}  // namespace szo
