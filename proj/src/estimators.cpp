#include "szo/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "szo/errors.hpp"

namespace szo {

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::OnePoint:
      return "one_point";
    case EstimatorKind::TwoPoint:
      return "two_point";
    case EstimatorKind::TwoSided:
      return "two_sided";
  }
  return "?";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "one_point" || name == "OnePoint") return EstimatorKind::OnePoint;
  if (name == "two_point" || name == "TwoPoint") return EstimatorKind::TwoPoint;
  if (name == "two_sided" || name == "TwoSided") return EstimatorKind::TwoSided;
  throw DomainError("unknown estimator kind '" + std::string(name) + "'");
}

std::size_t evals_per_sample(EstimatorKind kind) {
  return kind == EstimatorKind::OnePoint ? 1 : 2;
}

namespace {

double checked_eval(const Objective& objective, std::span<const double> w,
                    const Batch& batch) {
  const double f = objective.eval(w, batch);
  if (!std::isfinite(f)) {
    throw NumericError("objective returned a non-finite value",
                       std::vector<double>(w.begin(), w.end()));
  }
  return f;
}

}  // namespace

GradEstimate estimate_single(const Objective& objective,
                             std::span<const double> w, const Batch& batch,
                             const Mask& m, double mu, EstimatorKind kind,
                             RngStream& rng) {
  if (!(mu > 0.0)) throw DomainError("estimator: mu must be > 0");
  const std::size_t n = w.size();
  if (m.size() != n) throw DimensionError("estimator: mask length mismatch");
  if (objective.dim() != n) {
    throw DimensionError("estimator: objective dimension mismatch");
  }

  std::vector<double> u_bar = sample_std_normal(rng, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!m.test(i)) u_bar[i] = 0.0;
  }

  std::vector<double> probe(w.begin(), w.end());
  for (std::size_t i = 0; i < n; ++i) probe[i] += mu * u_bar[i];
  const double f_plus = checked_eval(objective, probe, batch);

  double ratio = 0.0;
  switch (kind) {
    case EstimatorKind::OnePoint:
      ratio = f_plus / mu;
      break;
    case EstimatorKind::TwoPoint: {
      const double f0 = checked_eval(objective, w, batch);
      ratio = (f_plus - f0) / mu;
      break;
    }
    case EstimatorKind::TwoSided: {
      for (std::size_t i = 0; i < n; ++i) probe[i] = w[i] - mu * u_bar[i];
      const double f_minus = checked_eval(objective, probe, batch);
      ratio = (f_plus - f_minus) / (2.0 * mu);
      break;
    }
  }

  GradEstimate out;
  out.g = std::move(u_bar);
  for (std::size_t i = 0; i < n; ++i) {
    if (m.test(i)) out.g[i] *= ratio;
  }
  out.mu = mu;
  out.k = 1;
  out.kind = kind;
  out.fevals = evals_per_sample(kind);
  return out;
}

GradEstimate estimate_avg(const Objective& objective, std::span<const double> w,
                          const Batch& batch, const Mask& m, double mu,
                          EstimatorKind kind, std::size_t k,
                          const RngStream& base, unsigned threads) {
  if (k < 1) throw DomainError("estimator: k must be >= 1");
  if (!(mu > 0.0)) throw DomainError("estimator: mu must be > 0");
  const std::size_t n = w.size();

  std::vector<std::vector<double>> samples(k);
  auto draw = [&](std::size_t j) {
    RngStream rng = base.substream(base.stream_id() * k + j);
    samples[j] = estimate_single(objective, w, batch, m, mu, kind, rng).g;
  };

  const std::size_t workers = std::min<std::size_t>(std::max(1U, threads), k);
  if (workers <= 1) {
    for (std::size_t j = 0; j < k; ++j) draw(j);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t j = t; j < k; j += workers) draw(j);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  GradEstimate out;
  out.g.assign(n, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) out.g[i] += samples[j][i];
  }
  const double denom = static_cast<double>(k);
  for (double& v : out.g) v /= denom;
  out.mu = mu;
  out.k = k;
  out.kind = kind;
  out.fevals = k * evals_per_sample(kind);
  return out;
}

}  // namespace szo
