#include "szo/objectives.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "szo/errors.hpp"

namespace szo {

namespace {

void check_dim(std::span<const double> w, std::size_t n, const char* who) {
  if (w.size() != n) {
    throw DimensionError(std::string(who) + ": expected " + std::to_string(n) +
                         " parameters, got " + std::to_string(w.size()));
  }
}

void check_batch(const Dataset& data, const Batch& batch, const char* who) {
  if (batch.empty()) {
    throw DomainError(std::string(who) + ": empty batch");
  }
  for (std::size_t i : batch) {
    if (i >= data.num_examples) {
      throw DimensionError(std::string(who) + ": batch index out of range");
    }
  }
}

// log-sum-exp and softmax in place; returns lse.
double softmax_inplace(std::span<double> z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return zmax + std::log(sum);
}

int argmax_lowest(std::span<const double> z) {
  int best = 0;
  for (std::size_t c = 1; c < z.size(); ++c) {
    if (z[c] > z[best]) best = static_cast<int>(c);
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------

void Dataset::validate() const {
  if (inputs.size() != num_examples * num_features) {
    throw DimensionError("dataset: inputs size mismatch");
  }
  if (labels.size() != num_examples) {
    throw DimensionError("dataset: labels size mismatch");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw DomainError("dataset: label outside [0, num_classes)");
    }
  }
  std::vector<char> seen(num_examples, 0);
  for (const Batch* split : {&train, &dev, &test}) {
    for (std::size_t i : *split) {
      if (i >= num_examples) throw DimensionError("dataset: split index out of range");
      if (seen[i]) throw DomainError("dataset: splits overlap");
      seen[i] = 1;
    }
  }
}

std::vector<int> Objective::predict(std::span<const double>,
                                    const Batch&) const {
  throw DomainError(id() + " is not a classification objective");
}

ParamVector Objective::initial_point() const {
  return ParamVector(std::vector<double>(dim(), 0.0), layout());
}

std::vector<Segment> Objective::layout() const {
  return {{"params", 0, dim()}};
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticObjective::QuadraticObjective(std::vector<double> a, std::size_t n,
                                       std::vector<double> b)
    : n_(n), diagonal_(false), a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() != n_ * n_) {
    throw DimensionError("quadratic: A is not " + std::to_string(n_) + "x" +
                         std::to_string(n_));
  }
  if (b_.size() != n_) throw DimensionError("quadratic: b length mismatch");

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      mat(a_.data(), static_cast<Eigen::Index>(n_),
          static_cast<Eigen::Index>(n_));
  const double scale = std::max(1.0, mat.cwiseAbs().maxCoeff());
  if ((mat - mat.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DomainError("quadratic: A is not symmetric");
  }
  if (n_ > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat);
    const auto& ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-10 * scale) {
      throw DomainError("quadratic: A is not positive semidefinite");
    }
    lambda_max_ = std::max(0.0, ev.maxCoeff());
  }
  id_ = "quadratic";
}

QuadraticObjective QuadraticObjective::diagonal(std::vector<double> diag,
                                                std::vector<double> b) {
  if (b.size() != diag.size()) {
    throw DimensionError("quadratic: b length mismatch");
  }
  QuadraticObjective q;
  q.n_ = diag.size();
  q.diagonal_ = true;
  for (double d : diag) {
    if (!(d >= 0.0)) throw DomainError("quadratic: negative diagonal entry");
    q.lambda_max_ = std::max(q.lambda_max_, d);
  }
  q.a_ = std::move(diag);
  q.b_ = std::move(b);
  q.id_ = "quadratic_diag";
  return q;
}

std::vector<double> QuadraticObjective::apply(std::span<const double> d) const {
  check_dim(d, n_, "quadratic");
  std::vector<double> out(n_, 0.0);
  if (diagonal_) {
    for (std::size_t i = 0; i < n_; ++i) out[i] = a_[i] * d[i];
  } else {
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      const double* row = a_.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) acc += row[j] * d[j];
      out[i] = acc;
    }
  }
  return out;
}

double QuadraticObjective::eval(std::span<const double> w,
                                const Batch&) const {
  check_dim(w, n_, "quadratic");
  const auto aw = apply(w);
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    quad += w[i] * aw[i];
    lin += b_[i] * w[i];
  }
  return 0.5 * quad - lin;
}

std::vector<double> QuadraticObjective::true_grad(std::span<const double> w,
                                                  const Batch&) const {
  auto g = apply(w);
  for (std::size_t i = 0; i < n_; ++i) g[i] -= b_[i];
  return g;
}

double QuadraticObjective::minimum_value() const {
  const double tol = 1e-12 * std::max(1.0, lambda_max_);
  if (diagonal_) {
    double f = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (a_[i] > tol) {
        f -= 0.5 * b_[i] * b_[i] / a_[i];
      } else if (b_[i] != 0.0) {
        throw DomainError("quadratic: unbounded below");
      }
    }
    return f;
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      mat(a_.data(), static_cast<Eigen::Index>(n_),
          static_cast<Eigen::Index>(n_));
  Eigen::Map<const Eigen::VectorXd> bv(b_.data(), static_cast<Eigen::Index>(n_));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat);
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * bv;
  const double bnorm = std::max(1.0, bv.norm());
  double f = 0.0;
  for (Eigen::Index k = 0; k < proj.size(); ++k) {
    const double lam = eig.eigenvalues()[k];
    if (lam > tol) {
      f -= 0.5 * proj[k] * proj[k] / lam;
    } else if (std::abs(proj[k]) > 1e-10 * bnorm) {
      throw DomainError("quadratic: unbounded below");
    }
  }
  return f;
}

QuadraticObjective quadratic_objective(std::vector<double> a, std::size_t n,
                                       std::vector<double> b) {
  return QuadraticObjective(std::move(a), n, std::move(b));
}

QuadraticObjective sparse_quadratic_objective(std::size_t n,
                                              std::span<const std::size_t> active,
                                              double scale, double offset) {
  if (active.empty()) {
    throw DomainError("sparse_quadratic: empty active set");
  }
  if (!(scale > 0.0)) throw DomainError("sparse_quadratic: scale must be > 0");
  std::vector<double> diag(n, 0.0);
  std::vector<double> b(n, 0.0);
  for (std::size_t i : active) {
    if (i >= n) throw DimensionError("sparse_quadratic: index out of range");
    diag[i] = scale;
    b[i] = scale * offset;
  }
  return QuadraticObjective::diagonal(std::move(diag), std::move(b));
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticObjective::LogisticObjective(std::shared_ptr<const Dataset> data,
                                     std::size_t num_classes, double l2)
    : data_(std::move(data)), classes_(num_classes), l2_(l2) {
  if (classes_ < 2) throw DomainError("logistic: need at least 2 classes");
  if (!data_ || data_->num_examples == 0) {
    throw DomainError("logistic: empty dataset");
  }
  if (!(l2_ >= 0.0)) throw DomainError("logistic: l2 must be >= 0");
  for (int y : data_->labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes_) {
      throw DomainError("logistic: label outside [0, num_classes)");
    }
  }
}

std::size_t LogisticObjective::dim() const {
  return classes_ * (data_->num_features + 1);
}

std::vector<Segment> LogisticObjective::layout() const {
  const std::size_t wsize = classes_ * data_->num_features;
  return {{"weight", 0, wsize}, {"bias", wsize, classes_}};
}

void LogisticObjective::scores(std::span<const double> w, std::size_t example,
                               std::span<double> out) const {
  const std::size_t d = data_->num_features;
  const auto x = data_->row(example);
  const double* bias = w.data() + classes_ * d;
  for (std::size_t c = 0; c < classes_; ++c) {
    const double* wc = w.data() + c * d;
    double acc = bias[c];
    for (std::size_t j = 0; j < d; ++j) acc += wc[j] * x[j];
    out[c] = acc;
  }
}

double LogisticObjective::eval(std::span<const double> w,
                               const Batch& batch) const {
  check_dim(w, dim(), "logistic");
  check_batch(*data_, batch, "logistic");
  std::vector<double> z(classes_);
  double loss = 0.0;
  for (std::size_t i : batch) {
    scores(w, i, z);
    const double zy = z[static_cast<std::size_t>(data_->labels[i])];
    loss += softmax_inplace(z) - zy;
  }
  loss /= static_cast<double>(batch.size());
  if (l2_ > 0.0) {
    double sq = 0.0;
    for (double v : w) sq += v * v;
    loss += 0.5 * l2_ * sq;
  }
  return loss;
}

std::vector<double> LogisticObjective::true_grad(std::span<const double> w,
                                                 const Batch& batch) const {
  check_dim(w, dim(), "logistic");
  check_batch(*data_, batch, "logistic");
  const std::size_t d = data_->num_features;
  std::vector<double> g(dim(), 0.0);
  std::vector<double> z(classes_);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i : batch) {
    scores(w, i, z);
    softmax_inplace(z);
    z[static_cast<std::size_t>(data_->labels[i])] -= 1.0;
    const auto x = data_->row(i);
    for (std::size_t c = 0; c < classes_; ++c) {
      const double delta = z[c] * inv;
      double* gc = g.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) gc[j] += delta * x[j];
      g[classes_ * d + c] += delta;
    }
  }
  if (l2_ > 0.0) {
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += l2_ * w[k];
  }
  return g;
}

std::vector<int> LogisticObjective::predict(std::span<const double> w,
                                            const Batch& batch) const {
  check_dim(w, dim(), "logistic");
  std::vector<int> out;
  out.reserve(batch.size());
  std::vector<double> z(classes_);
  for (std::size_t i : batch) {
    scores(w, i, z);
    out.push_back(argmax_lowest(z));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MLP

std::size_t mlp_param_count(std::span<const std::size_t> layer_sizes) {
  std::size_t n = 0;
  for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
    n += layer_sizes[l - 1] * layer_sizes[l] + layer_sizes[l];
  }
  return n;
}

MlpObjective::MlpObjective(std::vector<std::size_t> layer_sizes,
                           std::shared_ptr<const Dataset> data, RngStream& rng)
    : sizes_(std::move(layer_sizes)), data_(std::move(data)) {
  if (sizes_.size() < 2) throw DomainError("mlp: need at least 2 layers");
  for (std::size_t s : sizes_) {
    if (s == 0) throw DomainError("mlp: layer size 0");
  }
  if (!data_) throw DomainError("mlp: no dataset");
  if (sizes_.front() != data_->num_features) {
    throw DimensionError("mlp: input layer " + std::to_string(sizes_.front()) +
                         " != feature count " +
                         std::to_string(data_->num_features));
  }
  if (sizes_.back() != data_->num_classes) {
    throw DimensionError("mlp: output layer != class count");
  }
  if (sizes_.back() < 2) throw DomainError("mlp: need at least 2 classes");

  std::size_t off = 0;
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    weight_offset_.push_back(off);
    off += sizes_[l - 1] * sizes_[l];
    bias_offset_.push_back(off);
    off += sizes_[l];
  }
  n_ = off;

  std::vector<double> w(n_, 0.0);
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    const double fan_in = static_cast<double>(sizes_[l - 1]);
    const double fan_out = static_cast<double>(sizes_[l]);
    const double std_dev = std::sqrt(2.0 / (fan_in + fan_out));
    const std::size_t count = sizes_[l - 1] * sizes_[l];
    for (std::size_t k = 0; k < count; ++k) {
      w[weight_offset_[l - 1] + k] = std_dev * rng.normal();
    }
  }
  init_ = ParamVector(std::move(w), layout());
}

std::string MlpObjective::id() const {
  std::string s = "mlp";
  for (std::size_t v : sizes_) s += "-" + std::to_string(v);
  return s;
}

std::vector<Segment> MlpObjective::layout() const {
  std::vector<Segment> out;
  for (std::size_t l = 1; l < sizes_.size(); ++l) {
    const std::string name = "layer" + std::to_string(l - 1);
    out.push_back({name + ".weight", weight_offset_[l - 1],
                   sizes_[l - 1] * sizes_[l]});
    out.push_back({name + ".bias", bias_offset_[l - 1], sizes_[l]});
  }
  return out;
}

void MlpObjective::forward(std::span<const double> w, std::size_t example,
                           std::vector<std::vector<double>>& acts) const {
  const std::size_t layers = sizes_.size();
  acts.resize(layers);
  const auto x = data_->row(example);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 1; l < layers; ++l) {
    const std::size_t in = sizes_[l - 1];
    const std::size_t out = sizes_[l];
    const double* wl = w.data() + weight_offset_[l - 1];
    const double* bl = w.data() + bias_offset_[l - 1];
    auto& a = acts[l];
    a.resize(out);
    const auto& prev = acts[l - 1];
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = wl + o * in;
      double acc = bl[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * prev[i];
      a[o] = (l + 1 < layers) ? std::tanh(acc) : acc;
    }
  }
}

double MlpObjective::example_loss(std::span<const double> w,
                                  std::size_t example,
                                  std::vector<std::vector<double>>& acts) const {
  forward(w, example, acts);
  auto& logits = acts.back();
  const double zy = logits[static_cast<std::size_t>(data_->labels[example])];
  return softmax_inplace(logits) - zy;
}

double MlpObjective::eval(std::span<const double> w, const Batch& batch) const {
  check_dim(w, n_, "mlp");
  check_batch(*data_, batch, "mlp");
  std::vector<std::vector<double>> acts;
  double loss = 0.0;
  for (std::size_t i : batch) loss += example_loss(w, i, acts);
  return loss / static_cast<double>(batch.size());
}

std::vector<double> MlpObjective::true_grad(std::span<const double> w,
                                            const Batch& batch) const {
  check_dim(w, n_, "mlp");
  check_batch(*data_, batch, "mlp");
  std::vector<double> g(n_, 0.0);
  std::vector<std::vector<double>> acts;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  const double inv = 1.0 / static_cast<double>(batch.size());
  const std::size_t layers = sizes_.size();

  for (std::size_t ex : batch) {
    example_loss(w, ex, acts);
    // acts.back() now holds softmax probabilities.
    delta = acts.back();
    delta[static_cast<std::size_t>(data_->labels[ex])] -= 1.0;
    for (double& d : delta) d *= inv;

    for (std::size_t l = layers - 1; l >= 1; --l) {
      const std::size_t in = sizes_[l - 1];
      const std::size_t out = sizes_[l];
      const double* wl = w.data() + weight_offset_[l - 1];
      double* gw = g.data() + weight_offset_[l - 1];
      double* gb = g.data() + bias_offset_[l - 1];
      const auto& prev = acts[l - 1];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += delta[o] * prev[i];
      }
      if (l == 1) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double* row = wl + o * in;
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] += row[i] * delta[o];
      }
      for (std::size_t i = 0; i < in; ++i) {
        prev_delta[i] *= 1.0 - prev[i] * prev[i];
      }
      delta.swap(prev_delta);
    }
  }
  return g;
}

std::vector<int> MlpObjective::predict(std::span<const double> w,
                                       const Batch& batch) const {
  check_dim(w, n_, "mlp");
  std::vector<int> out;
  out.reserve(batch.size());
  std::vector<std::vector<double>> acts;
  for (std::size_t i : batch) {
    forward(w, i, acts);
    out.push_back(argmax_lowest(acts.back()));
  }
  return out;
}

std::shared_ptr<MlpObjective> mlp_objective(std::vector<std::size_t> layer_sizes,
                                            std::shared_ptr<const Dataset> data,
                                            RngStream& rng) {
  return std::make_shared<MlpObjective>(std::move(layer_sizes), std::move(data),
                                        rng);
}

}  // namespace szo
