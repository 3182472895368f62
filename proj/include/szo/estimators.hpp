#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "szo/core.hpp"
#include "szo/objectives.hpp"

namespace szo {

// Finite-difference form of the sampled gradient, each multiplied by the
// masked perturbation u_bar = m ⊙ u:
//   OnePoint  f(w + mu u_bar) / mu
//   TwoPoint  (f(w + mu u_bar) - f(w)) / mu
//   TwoSided  (f(w + mu u_bar) - f(w - mu u_bar)) / (2 mu)
enum class EstimatorKind { OnePoint, TwoPoint, TwoSided };

std::string_view to_string(EstimatorKind kind);
// Accepts "one_point", "two_point", "two_sided" (and the enum spellings).
EstimatorKind parse_estimator_kind(std::string_view name);

// Objective evaluations charged per sample.
std::size_t evals_per_sample(EstimatorKind kind);

struct GradEstimate {
  std::vector<double> g;
  double mu = 0.0;
  std::size_t k = 0;
  EstimatorKind kind = EstimatorKind::TwoSided;
  std::size_t fevals = 0;
};

inline constexpr double kDefaultMu = 0.05;
inline constexpr std::size_t kDefaultSamples = 10;
inline constexpr EstimatorKind kDefaultKind = EstimatorKind::TwoSided;

// One draw u ~ N(0, I) from `rng`. Throws DomainError for mu <= 0,
// DimensionError for size mismatches, NumericError (carrying the evaluated
// point) if the objective returns a non-finite value.
GradEstimate estimate_single(const Objective& objective,
                             std::span<const double> w, const Batch& batch,
                             const Mask& m, double mu, EstimatorKind kind,
                             RngStream& rng);

// Mean of k single estimates. Sample j draws from the substream
// (base.master_seed(), base.stream_id() * k + j), and samples are summed in
// ascending j, so `threads > 1` gives bit-identical results to serial.
GradEstimate estimate_avg(const Objective& objective, std::span<const double> w,
                          const Batch& batch, const Mask& m, double mu,
                          EstimatorKind kind, std::size_t k,
                          const RngStream& base, unsigned threads = 1);

}  // namespace szo
