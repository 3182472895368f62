#pragma once

#include <cstddef>
#include <vector>

#include "szo/core.hpp"
#include "szo/estimators.hpp"
#include "szo/objectives.hpp"

namespace szo {

// Monte-Carlo estimate of E ||m ⊙ u||^p for u ~ N(0, I_n), against the bound
// (nbar + p)^(p/2).
struct MomentReport {
  std::size_t n = 0;
  std::size_t nbar = 0;
  double p = 0.0;
  std::size_t samples = 0;
  double estimate = 0.0;
  double bound = 0.0;
  double standard_error = 0.0;  // NaN when samples < 2
  // estimate - 3 SE > bound. Never set when the SE is undefined.
  bool violation = false;
};

// Throws DomainError for p < 2 or samples == 0.
MomentReport mc_norm_moment(std::size_t n, const Mask& m, double p,
                            std::size_t samples, RngStream& rng);

// Exact E ||m ⊙ u||^p for even integer p: nbar (nbar+2) ... (nbar+p-2).
double exact_even_moment(std::size_t nbar, unsigned p);

struct UnbiasednessReport {
  std::size_t samples = 0;
  std::vector<double> mean;      // MC mean of the estimates
  std::vector<double> expected;  // m ⊙ grad f(w)
  std::vector<double> standard_error;
  // max over unmasked coordinates of |mean - expected| / SE (NaN when the SE
  // is undefined).
  double max_deviation_se = 0.0;
  // Every masked coordinate of every estimate was exactly zero.
  bool masked_exactly_zero = true;
};

// MC mean of single-sample estimates compared with m ⊙ grad f(w). Sample s
// uses substream s of `rng`. Throws DomainError for OnePoint.
UnbiasednessReport mc_unbiasedness(const QuadraticObjective& objective,
                                   std::span<const double> w, const Mask& m,
                                   double mu, EstimatorKind kind,
                                   std::size_t samples, const RngStream& rng);

// ||grad f||^2 <= 2 ||grad f_mu||^2 + mu^2 L^2 (nbar + 4)^3 / 2, with
// grad f_mu read as the projected gradient m ⊙ grad f(w).
struct Lemma3Check {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// Throws DomainError if L is below the objective's lambda_max.
Lemma3Check check_lemma3(const QuadraticObjective& objective,
                         std::span<const double> w, const Mask& m, double mu,
                         double lipschitz);

// 16 (nhat+4) L gap / (T+1) + (mu^2 L^2 / 2) (nhat+4)^2 (nhat + 11/2).
double theorem1_bound(double nhat, double lipschitz, double f0_gap,
                      std::size_t iterations, double mu);

}  // namespace szo
