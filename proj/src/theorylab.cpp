#include "szo/theorylab.hpp"

#include <cmath>
#include <limits>

#include "szo/errors.hpp"

namespace szo {

MomentReport mc_norm_moment(std::size_t n, const Mask& m, double p,
                            std::size_t samples, RngStream& rng) {
  if (!(p >= 2.0)) throw DomainError("mc_norm_moment: p must be >= 2");
  if (samples < 1) throw DomainError("mc_norm_moment: samples must be >= 1");
  if (m.size() != n) throw DimensionError("mc_norm_moment: mask length mismatch");

  MomentReport r;
  r.n = n;
  r.nbar = m.count();
  r.p = p;
  r.samples = samples;
  r.bound = std::pow(static_cast<double>(r.nbar) + p, p / 2.0);

  // Welford running mean / variance.
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto u = sample_std_normal(rng, n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m.test(i)) sq += u[i] * u[i];
    }
    const double x = std::pow(sq, p / 2.0);
    const double delta = x - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (x - mean);
  }
  r.estimate = mean;
  if (samples >= 2) {
    const double var = m2 / static_cast<double>(samples - 1);
    r.standard_error = std::sqrt(var / static_cast<double>(samples));
    r.violation = r.estimate - 3.0 * r.standard_error > r.bound;
  } else {
    r.standard_error = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

double exact_even_moment(std::size_t nbar, unsigned p) {
  if (p % 2 != 0) throw DomainError("exact_even_moment: p must be even");
  double v = 1.0;
  for (unsigned j = 0; j < p / 2; ++j) v *= static_cast<double>(nbar + 2 * j);
  return v;
}

UnbiasednessReport mc_unbiasedness(const QuadraticObjective& objective,
                                   std::span<const double> w, const Mask& m,
                                   double mu, EstimatorKind kind,
                                   std::size_t samples, const RngStream& rng) {
  if (kind == EstimatorKind::OnePoint) {
    throw DomainError("mc_unbiasedness: OnePoint is not checked");
  }
  if (samples < 1) throw DomainError("mc_unbiasedness: samples must be >= 1");
  const std::size_t n = w.size();

  UnbiasednessReport r;
  r.samples = samples;
  r.expected = apply_mask(m, objective.true_grad(w, {}));
  std::vector<double> mean(n, 0.0);
  std::vector<double> m2(n, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    RngStream sub = rng.substream(s);
    const auto est = estimate_single(objective, w, {}, m, mu, kind, sub);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = est.g[i];
      if (!m.test(i) && x != 0.0) r.masked_exactly_zero = false;
      const double delta = x - mean[i];
      mean[i] += delta / static_cast<double>(s + 1);
      m2[i] += delta * (x - mean[i]);
    }
  }
  r.mean = std::move(mean);
  r.standard_error.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (samples < 2) {
    r.max_deviation_se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double se =
        std::sqrt(m2[i] / static_cast<double>(samples - 1) /
                  static_cast<double>(samples));
    r.standard_error[i] = se;
    if (!m.test(i)) continue;
    const double dev = std::abs(r.mean[i] - r.expected[i]);
    if (se > 0.0) {
      worst = std::max(worst, dev / se);
    } else if (dev > 0.0) {
      worst = std::numeric_limits<double>::infinity();
    }
  }
  r.max_deviation_se = worst;
  return r;
}

Lemma3Check check_lemma3(const QuadraticObjective& objective,
                         std::span<const double> w, const Mask& m, double mu,
                         double lipschitz) {
  if (lipschitz < objective.lambda_max()) {
    throw DomainError("check_lemma3: L must be >= lambda_max(A)");
  }
  const auto grad = objective.true_grad(w, {});
  const auto projected = apply_mask(m, grad);
  Lemma3Check c;
  double proj_sq = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    c.lhs += grad[i] * grad[i];
    proj_sq += projected[i] * projected[i];
  }
  const double dim_term = static_cast<double>(m.count()) + 4.0;
  c.rhs = 2.0 * proj_sq +
          0.5 * mu * mu * lipschitz * lipschitz * dim_term * dim_term * dim_term;
  c.holds = c.lhs <= c.rhs;
  return c;
}

double theorem1_bound(double nhat, double lipschitz, double f0_gap,
                      std::size_t iterations, double mu) {
  if (!(nhat > 0.0 && lipschitz > 0.0 && f0_gap > 0.0 && mu > 0.0)) {
    throw DomainError("theorem1_bound: inputs must be positive");
  }
  const double d = nhat + 4.0;
  const double descent =
      16.0 * d * lipschitz * f0_gap / (static_cast<double>(iterations) + 1.0);
  const double smoothing =
      0.5 * mu * mu * lipschitz * lipschitz * d * d * (nhat + 5.5);
  return descent + smoothing;
}

}  // namespace szo
