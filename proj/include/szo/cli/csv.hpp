#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "szo/metrics.hpp"

namespace szo::cli {

// Shortest decimal that parses back to the same double.
std::string format_double(double v);
// Empty for an absent value.
std::string format_cell(const std::optional<double>& v);

// step, examples_seen, fevals, sparsity, train_loss, cum_loss, grad_dist,
// L_local, L_neighbor, test_acc
const std::vector<std::string>& run_columns();

// Per-row values in run_columns() order (step first).
std::vector<std::optional<double>> row_values(const MetricsRow& row);

std::string run_csv(const RunRecord& record);

// One run per seed of one variant, as read back for aggregation.
struct VariantRuns {
  std::string name;
  std::vector<RunRecord> runs;
};

// Wide table aligned on step. For every metric (run_columns() minus step)
// and variant: <metric>_<variant> (mean over seeds), <metric>_<variant>_ema
// (EMA of the mean, factor `ema_factor`) and, with two or more seeds,
// <metric>_<variant>_std (sample standard deviation).
std::string compare_csv(const std::vector<VariantRuns>& variants,
                        double ema_factor);

struct HistogramRow {
  std::size_t step = 0;
  GradHistogram histogram;
};

// step, bin, lo, hi, count, zero_count
std::string histogram_csv(const std::vector<HistogramRow>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index or nullopt.
  std::optional<std::size_t> column(const std::string& name) const;
};

// Plain comma-separated text without quoting. Throws FormatError on a
// missing header or ragged rows.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);

}  // namespace szo::cli
