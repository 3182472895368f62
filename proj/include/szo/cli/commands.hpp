#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace szo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitTheory = 4;

const char* version();

struct RunOptions {
  std::string config_path;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;  // key=value
  std::vector<std::string> variants;   // compare only
};

// Each command reports problems on stderr and returns its exit code.
int cmd_run(const RunOptions& options);
int cmd_compare(const RunOptions& options);

struct TheoryOptions {
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
  std::string out = ".";
  bool show_counterexample = false;
};

int cmd_verify_theory(const TheoryOptions& options);

struct PlotOptions {
  std::string csv;
  std::vector<std::string> columns;
  std::string out;  // empty: the CSV path with an .svg extension
  bool sparsity_axis = false;
  std::string sparsity_column;  // empty: "sparsity" or the first "sparsity_*"
};

int cmd_plot(const PlotOptions& options);

}  // namespace szo::cli
