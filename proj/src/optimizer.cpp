#include "szo/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "szo/errors.hpp"

namespace szo {

namespace {

// Per-purpose seed tags; each purpose gets its own family of streams.
constexpr std::uint64_t kEstimatorTag = 0x45535449;  // "ESTI"
constexpr std::uint64_t kShuffleTag = 0x53485546;    // "SHUF"
constexpr std::uint64_t kMaskTag = 0x4D41534B;       // "MASK"
constexpr std::uint64_t kNeighborTag = 0x4E424852;   // "NBHR"

std::vector<double> masked_copy(std::span<const double> w, const Mask& m) {
  return apply_mask(m, w);
}

double checked_loss(const Objective& objective, std::span<const double> w,
                    const Batch& batch) {
  const double f = objective.eval(w, batch);
  if (!std::isfinite(f)) {
    throw NumericError("non-finite training loss",
                       std::vector<double>(w.begin(), w.end()));
  }
  return f;
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Dense:
      return "dense";
    case Variant::FreezeMagnitude:
      return "freezeL1";
    case Variant::FreezeRandom:
      return "freezeRandom";
    case Variant::PruneMagnitude:
      return "pruneL1";
    case Variant::PruneRandom:
      return "pruneRandom";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "dense" || name == "Dense") return Variant::Dense;
  if (name == "freezeL1" || name == "FreezeMagnitude") return Variant::FreezeMagnitude;
  if (name == "freezeRandom" || name == "FreezeRandom") return Variant::FreezeRandom;
  if (name == "pruneL1" || name == "PruneMagnitude") return Variant::PruneMagnitude;
  if (name == "pruneRandom" || name == "PruneRandom") return Variant::PruneRandom;
  throw DomainError("unknown variant '" + std::string(name) + "'");
}

bool is_pruning(Variant v) {
  return v == Variant::PruneMagnitude || v == Variant::PruneRandom;
}

bool uses_random_masking(Variant v) {
  return v == Variant::FreezeRandom || v == Variant::PruneRandom;
}

void OptConfig::validate() const {
  if (!(mu > 0.0)) throw DomainError("config: mu must be > 0");
  if (k < 1) throw DomainError("config: k must be >= 1");
  if (!theory_mode && !(learning_rate > 0.0)) {
    throw DomainError("config: learning_rate must be > 0");
  }
  if (lipschitz && !(*lipschitz > 0.0)) {
    throw DomainError("config: lipschitz must be > 0");
  }
  if (!(lipschitz_init > 0.0)) {
    throw DomainError("config: lipschitz_init must be > 0");
  }
  if (schedule.interval_steps < 1) {
    throw DomainError("config: interval_steps must be >= 1");
  }
  if (!(schedule.keep_fraction > 0.0 && schedule.keep_fraction <= 1.0)) {
    throw DomainError("config: keep_fraction must lie in (0, 1]");
  }
  if (random_candidates < 1) {
    throw DomainError("config: random_candidates must be >= 1");
  }
  if (batch_size < 1) throw DomainError("config: batch_size must be >= 1");
  if (neighbor_samples < 1) {
    throw DomainError("config: neighbor_samples must be >= 1");
  }
}

std::string describe(const OptConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "variant=" << to_string(c.variant) << ";kind=" << to_string(c.kind)
     << ";mu=" << c.mu << ";k=" << c.k << ";lr=" << c.learning_rate
     << ";theory=" << c.theory_mode << ";lipschitz=";
  if (c.lipschitz) {
    os << *c.lipschitz;
  } else {
    os << "auto";
  }
  os << ";lipschitz_init=" << c.lipschitz_init
     << ";interval=" << c.schedule.interval_steps
     << ";keep=" << c.schedule.keep_fraction
     << ";max_events=" << c.schedule.max_events
     << ";candidates=" << c.random_candidates << ";batch=" << c.batch_size
     << ";steps=" << c.total_steps << ";seed=" << c.seed
     << ";diagnostics=" << c.diagnostics << ";eval_interval=" << c.eval_interval
     << ";neighbor_interval=" << c.neighbor_interval
     << ";neighbor_samples=" << c.neighbor_samples
     << ";neighbor_half_range=" << c.neighbor_half_range;
  return os.str();
}

std::uint64_t config_hash(const OptConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : describe(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

OptState init_state(const OptConfig& config, ParamVector w0) {
  OptState s;
  s.m = Mask::ones(w0.size());
  s.w = std::move(w0);
  s.seed = config.seed;
  s.mask_rng = RngStream(mix_seed(config.seed, kMaskTag), 0).state();
  s.lipschitz_used = config.lipschitz_init;
  return s;
}

double theory_lr(std::size_t nbar, double lipschitz) {
  if (!(lipschitz > 0.0)) throw DomainError("theory_lr: L must be > 0");
  return 1.0 / (4.0 * (static_cast<double>(nbar) + 4.0) * lipschitz);
}

std::size_t steps_per_epoch(const Objective& objective, std::size_t batch_size) {
  const Dataset* data = objective.dataset();
  if (data == nullptr || data->train.empty()) return 1;
  return (data->train.size() + batch_size - 1) / batch_size;
}

Batch batch_for_step(const Objective& objective, const OptConfig& config,
                     std::size_t step) {
  const Dataset* data = objective.dataset();
  if (data == nullptr) return {};
  if (data->train.empty()) throw DomainError("training split is empty");
  const std::size_t per_epoch = steps_per_epoch(objective, config.batch_size);
  const std::size_t epoch = step / per_epoch;
  const std::size_t pos = step % per_epoch;
  Batch order = data->train;
  RngStream rng(mix_seed(config.seed, kShuffleTag), epoch);
  shuffle_in_place(order, rng);
  const std::size_t begin = pos * config.batch_size;
  const std::size_t end = std::min(begin + config.batch_size, order.size());
  return Batch(order.begin() + static_cast<long>(begin),
               order.begin() + static_cast<long>(end));
}

namespace {

// Held-out score of the sub-network selected by `candidate`: dev accuracy
// for classifiers, otherwise the negated loss.
double score_candidate(const Objective& objective, std::span<const double> w,
                       const Mask& candidate, const Batch& batch) {
  const auto sub = masked_copy(w, candidate);
  const Dataset* data = objective.dataset();
  if (objective.is_classifier() && data != nullptr && !data->dev.empty()) {
    return accuracy(objective, sub, data->dev);
  }
  return -objective.eval(sub, batch);
}

double step_size(const OptState& state, const Objective& objective,
                 const OptConfig& config, const Mask& m) {
  if (!config.theory_mode) return config.learning_rate;
  double lip = state.lipschitz_used;
  if (config.lipschitz) {
    lip = *config.lipschitz;
  } else if (auto hint = objective.lipschitz_hint(); hint && *hint > 0.0) {
    lip = *hint;
  }
  return theory_lr(m.count(), lip);
}

}  // namespace

StepInfo opt_step(OptState& state, const Objective& objective,
                  const Batch& batch, const OptConfig& config) {
  const std::size_t n = state.w.size();
  if (state.m.size() != n || objective.dim() != n) {
    throw DimensionError("opt_step: state does not match objective");
  }

  StepInfo info;
  std::vector<double> w(state.w.values().begin(), state.w.values().end());
  Mask m = state.m;
  std::size_t events = state.events_fired;
  RngStream mask_rng(state.mask_rng);
  double lipschitz_used = state.lipschitz_used;

  if (config.variant != Variant::Dense &&
      should_sparsify(state.step, config.schedule, events)) {
    if (uses_random_masking(config.variant)) {
      auto scorer = [&](const Mask& cand) {
        return score_candidate(objective, w, cand, batch);
      };
      m = random_mask_select(m, config.schedule.keep_fraction,
                             config.random_candidates, scorer, mask_rng);
    } else {
      m = magnitude_mask(ParamVector(w), m, config.schedule.keep_fraction);
    }
    if (is_pruning(config.variant)) w = masked_copy(w, m);
    ++events;
    if (state.lipschitz_running) lipschitz_used = *state.lipschitz_running;
    info.event_fired = true;
  }

  std::optional<double> lipschitz_running = state.lipschitz_running;
  std::vector<double> true_grad;
  if (config.diagnostics) {
    true_grad = objective.true_grad(w, batch);
    if (state.prev_w) {
      const auto grad_prev = objective.true_grad(*state.prev_w, batch);
      info.lipschitz_local =
          lipschitz_local(*state.prev_w, w, grad_prev, true_grad);
      if (info.lipschitz_local) {
        lipschitz_running = std::max(lipschitz_running.value_or(0.0),
                                     *info.lipschitz_local);
      }
    }
  }

  const RngStream base(mix_seed(config.seed, kEstimatorTag), state.step);
  const GradEstimate est = estimate_avg(objective, w, batch, m, config.mu,
                                        config.kind, config.k, base,
                                        config.threads);
  if (config.diagnostics) info.grad_dist = grad_distance(est.g, true_grad);

  OptState trial = state;
  trial.m = m;
  trial.events_fired = events;
  trial.mask_rng = mask_rng.state();
  trial.lipschitz_used = lipschitz_used;
  info.learning_rate = step_size(trial, objective, config, m);

  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) next[i] = w[i] - info.learning_rate * est.g[i];
  for (double v : next) {
    if (!std::isfinite(v)) {
      throw NumericError("update produced a non-finite weight", next);
    }
  }

  info.mask = m;
  info.w_at_step = w;
  info.fevals = est.fevals;

  trial.w = ParamVector(std::move(next), state.w.layout());
  trial.step = state.step + 1;
  trial.examples_seen = state.examples_seen + batch.size();
  trial.fevals = state.fevals + est.fevals;
  trial.lipschitz_running = lipschitz_running;
  trial.prev_w = std::move(w);
  state = std::move(trial);
  return info;
}

namespace {

struct RowContext {
  const OptConfig& config;
  const Objective& objective;
  std::size_t eval_interval;
};

void add_periodic_metrics(MetricsRow& row, const OptState& state,
                          const RowContext& ctx) {
  const Dataset* data = ctx.objective.dataset();
  if (ctx.objective.is_classifier() && data != nullptr && !data->test.empty() &&
      row.step % ctx.eval_interval == 0) {
    row.test_acc = accuracy(ctx.objective, state.w.values(), data->test);
  }
  if (ctx.config.neighbor_interval > 0 &&
      row.step % ctx.config.neighbor_interval == 0) {
    RngStream rng(mix_seed(ctx.config.seed, kNeighborTag), row.step);
    Batch batch;
    if (data != nullptr && !data->test.empty()) {
      batch = data->test;
      shuffle_in_place(batch, rng);
      batch.resize(std::min(batch.size(), ctx.config.batch_size));
    }
    row.lipschitz_neighbor = lipschitz_neighbor(
        ctx.objective, state.w.values(), batch, rng,
        ctx.config.neighbor_samples, ctx.config.neighbor_half_range);
  }
}

}  // namespace

RunResult run(const OptConfig& config, const Objective& objective,
              const RunOptions& options) {
  config.validate();

  RunRecord record;
  record.meta.objective_id = objective.id();
  record.meta.variant = std::string(to_string(config.variant));
  record.meta.seed = config.seed;
  record.meta.config_hash = config_hash(config);

  const bool resuming = options.resume.has_value();
  OptState state;
  if (resuming) {
    state = *options.resume;
    if (state.w.size() != objective.dim()) {
      throw DimensionError("run: checkpoint does not match objective");
    }
    if (state.seed != config.seed) {
      throw DomainError("run: checkpoint seed differs from config seed");
    }
    state.w = ParamVector(std::vector<double>(state.w.values().begin(),
                                              state.w.values().end()),
                          objective.layout());
  } else {
    ParamVector w0 = options.init ? *options.init : objective.initial_point();
    if (w0.size() != objective.dim()) {
      throw DimensionError("run: initial point does not match objective");
    }
    state = init_state(config, std::move(w0));
  }

  const RowContext ctx{config, objective,
                       config.eval_interval > 0
                           ? config.eval_interval
                           : steps_per_epoch(objective, config.batch_size)};

  if (!resuming) {
    MetricsRow row0;
    row0.step = 0;
    row0.sparsity = mask_sparsity(state.m);
    const Batch b0 = batch_for_step(objective, config, 0);
    try {
      row0.train_loss = checked_loss(objective, state.w.values(), b0);
    } catch (const NumericError& e) {
      throw RunAborted(e.what(), record, state);
    }
    state.cum_loss = row0.train_loss;
    row0.cum_loss = state.cum_loss;
    add_periodic_metrics(row0, state, ctx);
    record.append(row0);
  }

  while (state.step < config.total_steps) {
    const Batch batch = batch_for_step(objective, config, state.step);
    const OptState before = state;
    try {
      const StepInfo info = opt_step(state, objective, batch, config);
      MetricsRow row;
      row.step = state.step;
      row.examples_seen = state.examples_seen;
      row.fevals = state.fevals;
      row.sparsity = mask_sparsity(info.mask);
      row.train_loss = checked_loss(objective, state.w.values(), batch);
      state.cum_loss += row.train_loss;
      row.cum_loss = state.cum_loss;
      row.grad_dist = info.grad_dist;
      row.lipschitz_local = info.lipschitz_local;
      add_periodic_metrics(row, state, ctx);
      record.append(row);
      if (options.observer) options.observer(state, info);
    } catch (const NumericError& e) {
      throw RunAborted(std::string(e.what()) + " at step " +
                           std::to_string(before.step),
                       record, before);
    }
  }
  return {std::move(record), std::move(state)};
}

}  // namespace szo
