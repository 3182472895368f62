#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "szo/errors.hpp"
#include "szo/objectives.hpp"
#include "szo/optimizer.hpp"

namespace szo::cli {

// Bad configuration: unknown key, unparseable or out-of-range value. The
// message names the source line (or --set) and the key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  // Optimizer settings. seed, total_steps and schedule.interval_steps are
  // filled per run by resolve().
  OptConfig opt;

  std::string objective = "blobs_mlp";
  std::vector<std::size_t> hidden{32};
  double l2 = 0.0;

  std::uint64_t data_seed = 0;
  std::size_t blobs_classes = 10;
  std::size_t blobs_dims = 64;
  std::size_t blobs_per_class = 100;
  double blobs_spread = 1.0;

  std::size_t quad_dim = 200;
  std::size_t quad_active = 10;
  double quad_scale = 1.0;
  double quad_offset = 1.0;

  std::string data_dir;  // empty: $SZO_DATA_DIR
  bool mnist_pool = true;

  double interval_epochs = 5.0;
  std::optional<std::size_t> interval_steps;  // overrides interval_epochs
  std::size_t epochs = 100;
  std::optional<std::size_t> steps;  // overrides epochs

  std::vector<std::uint64_t> seeds{0};
  std::vector<Variant> variants{Variant::Dense, Variant::FreezeMagnitude};
  std::string out = "szo_out";

  std::size_t grad_hist_interval = 0;  // 0: no histogram export
  std::size_t grad_hist_bins = 50;
};

// Applies one `key = value` assignment. `where` prefixes error messages.
void set_value(ExperimentConfig& cfg, std::string_view key,
               std::string_view value, const std::string& where);

// Parses flat `key = value` text; `#` starts a comment, blank lines are
// ignored. `source` names the input in diagnostics.
ExperimentConfig parse_config(std::string_view text, const std::string& source,
                              ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path);

// Applies a `key=value` override as given to --set.
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

// Every key in manifest order.
const std::vector<std::string>& config_keys();

// Builds the objective for a run. Synthetic data depends on data_seed only;
// the MLP initialisation depends on the run seed.
std::shared_ptr<const Objective> make_objective(const ExperimentConfig& cfg,
                                                std::uint64_t seed);

// Fills interval_steps and steps from the epoch-based settings.
void resolve(ExperimentConfig& cfg, const Objective& objective);

// OptConfig for one run: resolved schedule and step count, plus the seed.
OptConfig run_config(const ExperimentConfig& cfg, const Objective& objective,
                     std::uint64_t seed);

// `key = value` lines for every key, re-parseable by parse_config, preceded by
// a comment carrying `version`.
std::string manifest_text(const ExperimentConfig& cfg, const std::string& version);

}  // namespace szo::cli
