#include "szo/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "szo/errors.hpp"

namespace szo {

void RunRecord::append(MetricsRow row) {
  if (!rows.empty() && row.step <= rows.back().step) {
    throw DomainError("RunRecord: steps must be strictly increasing");
  }
  rows.push_back(std::move(row));
}

double grad_distance(std::span<const double> g,
                     std::span<const double> true_grad) {
  if (g.size() != true_grad.size()) {
    throw DimensionError("grad_distance: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = g[i] - true_grad[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

std::optional<double> lipschitz_local(std::span<const double> w_prev,
                                      std::span<const double> w,
                                      std::span<const double> grad_prev,
                                      std::span<const double> grad) {
  if (w_prev.size() != w.size() || grad_prev.size() != grad.size() ||
      grad.size() != w.size()) {
    throw DimensionError("lipschitz_local: length mismatch");
  }
  const double step = grad_distance(w_prev, w);
  if (step < kDegenerateStep) return std::nullopt;
  return grad_distance(grad_prev, grad) / step;
}

double lipschitz_neighbor(const Objective& objective, std::span<const double> w,
                          const Batch& batch, RngStream& rng,
                          std::size_t samples, double half_range) {
  if (samples < 1) throw DomainError("lipschitz_neighbor: samples must be >= 1");
  if (!(half_range > 0.0)) {
    throw DomainError("lipschitz_neighbor: half_range must be > 0");
  }
  const auto g0 = objective.true_grad(w, batch);
  std::vector<double> probe(w.size());
  std::vector<double> v(w.size());
  double best = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double vnorm = 0.0;
    do {
      double sq = 0.0;
      for (double& x : v) {
        x = rng.uniform(-half_range, half_range);
        sq += x * x;
      }
      vnorm = std::sqrt(sq);
    } while (vnorm == 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) probe[i] = w[i] + v[i];
    const auto g1 = objective.true_grad(probe, batch);
    best = std::max(best, grad_distance(g0, g1) / vnorm);
  }
  return best;
}

std::vector<double> ema(std::span<const double> series, double factor) {
  std::vector<double> out(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    out[t] = t == 0 ? series[0]
                    : factor * out[t - 1] + (1.0 - factor) * series[t];
  }
  return out;
}

std::vector<std::optional<double>> ema(
    std::span<const std::optional<double>> series, double factor) {
  std::vector<std::optional<double>> out(series.size());
  std::optional<double> state;
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (!series[t]) continue;
    state = state ? factor * *state + (1.0 - factor) * *series[t] : *series[t];
    out[t] = state;
  }
  return out;
}

double accuracy(const Objective& objective, std::span<const double> w,
                const Batch& split) {
  if (split.empty()) throw DomainError("accuracy: empty split");
  if (!objective.is_classifier()) {
    throw DomainError("accuracy: " + objective.id() + " is not a classifier");
  }
  const Dataset* data = objective.dataset();
  const auto pred = objective.predict(w, split);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < split.size(); ++k) {
    if (pred[k] == data->labels[split[k]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

std::size_t GradHistogram::bin_of(double value) const {
  const std::size_t bins = counts.size();
  if (value <= lo) return 0;
  if (value >= hi) return bins - 1;
  const auto b = static_cast<std::size_t>((value - lo) / bin_width());
  return std::min(b, bins - 1);
}

GradHistogram grad_histogram(std::span<const double> true_grad,
                             std::size_t bins) {
  if (bins < 1) throw DomainError("grad_histogram: bins must be >= 1");
  double range = 0.0;
  for (double g : true_grad) range = std::max(range, std::abs(g));
  if (range == 0.0) range = 1.0;
  GradHistogram h;
  h.lo = -range;
  h.hi = range;
  h.counts.assign(bins, 0);
  for (double g : true_grad) {
    ++h.counts[h.bin_of(g)];
    if (g == 0.0) ++h.zero_count;
  }
  return h;
}

}  // namespace szo
