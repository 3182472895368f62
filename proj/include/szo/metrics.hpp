#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "szo/core.hpp"
#include "szo/objectives.hpp"

namespace szo {

// One row per optimizer step. Row 0 describes the initial point; row t > 0
// describes the update that produced w^(t).
struct MetricsRow {
  std::size_t step = 0;
  std::size_t examples_seen = 0;
  std::size_t fevals = 0;  // cumulative objective evaluations
  double sparsity = 0.0;
  double train_loss = 0.0;
  double cum_loss = 0.0;
  std::optional<double> grad_dist;
  std::optional<double> lipschitz_local;
  std::optional<double> lipschitz_neighbor;
  std::optional<double> test_acc;

  bool operator==(const MetricsRow&) const = default;
};

struct RunMetadata {
  std::string objective_id;
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

struct RunRecord {
  RunMetadata meta;
  std::vector<MetricsRow> rows;

  // Appends a row; throws DomainError if its step does not exceed the last.
  void append(MetricsRow row);
};

// ||g - true_grad||_2. Throws DimensionError on length mismatch.
double grad_distance(std::span<const double> g, std::span<const double> true_grad);

inline constexpr double kDegenerateStep = 1e-12;

// ||grad_prev - grad|| / ||w_prev - w||, or nullopt when ||w_prev - w|| is
// below kDegenerateStep.
std::optional<double> lipschitz_local(std::span<const double> w_prev,
                                      std::span<const double> w,
                                      std::span<const double> grad_prev,
                                      std::span<const double> grad);

// Max over `samples` draws v ~ U[-half_range, half_range]^n of
// ||grad f(w) - grad f(w + v)|| / ||v||.
double lipschitz_neighbor(const Objective& objective, std::span<const double> w,
                          const Batch& batch, RngStream& rng,
                          std::size_t samples = 10, double half_range = 0.5);

// out[0] = in[0]; out[t] = factor * out[t-1] + (1 - factor) * in[t].
std::vector<double> ema(std::span<const double> series, double factor);

// EMA over the present entries only; absent entries stay absent.
std::vector<std::optional<double>> ema(
    std::span<const std::optional<double>> series, double factor);

// Fraction of argmax-correct predictions on `split`. Throws DomainError for
// an empty split or a non-classification objective.
double accuracy(const Objective& objective, std::span<const double> w,
                const Batch& split);

struct GradHistogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;  // equal-width bins over [lo, hi]
  std::size_t zero_count = 0;       // coordinates exactly equal to 0

  double bin_width() const {
    return (hi - lo) / static_cast<double>(counts.size());
  }
  // Index of the bin containing `value` (clamped to the range).
  std::size_t bin_of(double value) const;
};

// Equal-width histogram over [-R, R] with R = max |g_i| (R = 1 when g is all
// zeros). Throws DomainError for bins == 0.
GradHistogram grad_histogram(std::span<const double> true_grad, std::size_t bins);

}  // namespace szo
