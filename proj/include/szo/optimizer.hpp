#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "szo/core.hpp"
#include "szo/errors.hpp"
#include "szo/estimators.hpp"
#include "szo/masking.hpp"
#include "szo/metrics.hpp"
#include "szo/objectives.hpp"

namespace szo {

// Dense never sparsifies. Freeze variants mask perturbations only; prune
// variants also zero the masked weights at each event.
enum class Variant { Dense, FreezeMagnitude, FreezeRandom, PruneMagnitude, PruneRandom };

// Short names used in CSV columns: dense, freezeL1, freezeRandom, pruneL1,
// pruneRandom.
std::string_view to_string(Variant v);
// Accepts the short names and the enum spellings.
Variant parse_variant(std::string_view name);
bool is_pruning(Variant v);
bool uses_random_masking(Variant v);

struct OptConfig {
  Variant variant = Variant::Dense;
  EstimatorKind kind = kDefaultKind;
  double mu = kDefaultMu;
  std::size_t k = kDefaultSamples;

  double learning_rate = 0.2;
  // Theory mode: h = theory_lr(nbar, L_hat) each step. L_hat is `lipschitz`
  // if set, else the objective's hint, else the running max of L_local
  // (starting at lipschitz_init), refreshed at sparsification events.
  bool theory_mode = false;
  std::optional<double> lipschitz;
  double lipschitz_init = 1.0;

  MaskSchedule schedule{};
  std::size_t random_candidates = 50;

  std::size_t batch_size = 64;
  std::size_t total_steps = 0;
  std::uint64_t seed = 0;

  bool diagnostics = true;           // true gradient, grad_dist, L_local
  std::size_t eval_interval = 0;     // test accuracy; 0 = once per epoch
  std::size_t neighbor_interval = 0;  // L_neighbor; 0 = never
  std::size_t neighbor_samples = 10;
  double neighbor_half_range = 0.5;

  unsigned threads = 1;  // estimator samples evaluated concurrently

  // Throws DomainError on mu <= 0, k == 0, non-positive fixed learning rate,
  // or an invalid schedule.
  void validate() const;
};

// Canonical one-line rendering of every field, and its FNV-1a hash.
std::string describe(const OptConfig& config);
std::uint64_t config_hash(const OptConfig& config);

struct OptState {
  ParamVector w;
  Mask m;
  std::size_t step = 0;
  std::size_t events_fired = 0;
  std::uint64_t seed = 0;
  RngState mask_rng;  // consumed by random-candidate masking

  std::size_t examples_seen = 0;
  std::size_t fevals = 0;
  double cum_loss = 0.0;
  std::optional<double> lipschitz_running;  // max L_local seen so far
  double lipschitz_used = 1.0;              // L_hat for theory mode
  std::optional<std::vector<double>> prev_w;  // point of the previous step

  bool operator==(const OptState&) const = default;
};

// Fresh state at w0 with an all-ones mask.
OptState init_state(const OptConfig& config, ParamVector w0);

// What one step did, for metrics and invariant checks.
struct StepInfo {
  bool event_fired = false;
  Mask mask;                      // mask used for the perturbations
  std::vector<double> w_at_step;  // after any pruning, before the update
  double learning_rate = 0.0;
  std::size_t fevals = 0;
  std::optional<double> grad_dist;
  std::optional<double> lipschitz_local;
};

// 1 / (4 (nbar + 4) L). Throws DomainError for L <= 0.
double theory_lr(std::size_t nbar, double lipschitz);

// Minibatch for `step`: slice of a per-epoch seeded shuffle of the training
// split. Empty when the objective has no dataset.
Batch batch_for_step(const Objective& objective, const OptConfig& config,
                     std::size_t step);
std::size_t steps_per_epoch(const Objective& objective, std::size_t batch_size);

// One iteration: sparsify if scheduled (zeroing masked weights for prune
// variants), estimate the masked gradient, take the step. Strong exception
// guarantee: on NumericError `state` is unchanged.
StepInfo opt_step(OptState& state, const Objective& objective,
                  const Batch& batch, const OptConfig& config);

using StepObserver = std::function<void(const OptState&, const StepInfo&)>;

struct RunOptions {
  std::optional<ParamVector> init;  // defaults to objective.initial_point()
  std::optional<OptState> resume;   // continue from a checkpointed state
  StepObserver observer;
};

struct RunResult {
  RunRecord record;
  OptState final_state;
};

// Thrown by run() on a numeric failure. Holds the rows produced so far and
// the last consistent state.
class RunAborted : public Error {
 public:
  RunAborted(const std::string& what, RunRecord partial, OptState state)
      : Error(what), partial_(std::move(partial)), state_(std::move(state)) {}
  const RunRecord& partial() const { return partial_; }
  const OptState& state() const { return state_; }

 private:
  RunRecord partial_;
  OptState state_;
};

// Runs until state.step == config.total_steps. Deterministic given the seed.
// A resumed run emits only the rows after the checkpointed step.
RunResult run(const OptConfig& config, const Objective& objective,
              const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Checkpoints: "SSZO", u32 version, then little-endian fields (FORMATS.md).

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> checkpoint_bytes(const OptState& state);
OptState checkpoint_from_bytes(std::span<const std::uint8_t> bytes);
void checkpoint_save(const OptState& state, const std::string& path);
OptState checkpoint_load(const std::string& path);

}  // namespace szo
