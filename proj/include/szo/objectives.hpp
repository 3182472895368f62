#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "szo/core.hpp"

namespace szo {

// Index list into a Dataset. Empty for objectives without data.
using Batch = std::vector<std::size_t>;

struct Dataset {
  std::size_t num_examples = 0;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> inputs;  // row-major, num_examples x num_features
  std::vector<int> labels;
  Batch train;
  Batch dev;
  Batch test;

  std::span<const double> row(std::size_t i) const {
    return {inputs.data() + i * num_features, num_features};
  }

  // Throws DimensionError / DomainError if the invariants do not hold:
  // disjoint in-range splits, labels in [0, num_classes).
  void validate() const;
};

// A loss f(w; batch) with an analytic gradient. Implementations are immutable
// after construction and safe to call concurrently.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;
  virtual std::string id() const = 0;
  virtual double eval(std::span<const double> w, const Batch& batch) const = 0;
  virtual std::vector<double> true_grad(std::span<const double> w,
                                        const Batch& batch) const = 0;

  virtual bool is_classifier() const { return false; }
  // Argmax class per batch entry; ties go to the lowest class id.
  virtual std::vector<int> predict(std::span<const double> w,
                                   const Batch& batch) const;
  virtual std::optional<double> lipschitz_hint() const { return std::nullopt; }
  virtual const Dataset* dataset() const { return nullptr; }

  // Starting point with this objective's layout.
  virtual ParamVector initial_point() const;
  virtual std::vector<Segment> layout() const;
};

// f(w) = 1/2 w'Aw - b'w. Dense or diagonal A.
class QuadraticObjective : public Objective {
 public:
  // Row-major n x n. Throws DimensionError if not square or b mismatches,
  // DomainError if A is not symmetric PSD.
  QuadraticObjective(std::vector<double> a, std::size_t n,
                     std::vector<double> b);
  static QuadraticObjective diagonal(std::vector<double> diag,
                                     std::vector<double> b);

  std::size_t dim() const override { return n_; }
  std::string id() const override { return id_; }
  double eval(std::span<const double> w, const Batch& batch) const override;
  std::vector<double> true_grad(std::span<const double> w,
                                const Batch& batch) const override;
  std::optional<double> lipschitz_hint() const override { return lambda_max_; }

  bool is_diagonal() const { return diagonal_; }
  // A d, used by the exact Taylor identity checks.
  std::vector<double> apply(std::span<const double> d) const;
  // Minimum value f*. Throws DomainError if f is unbounded below.
  double minimum_value() const;
  double lambda_max() const { return lambda_max_; }

 private:
  QuadraticObjective() = default;

  std::size_t n_ = 0;
  bool diagonal_ = false;
  std::vector<double> a_;  // diag (size n) or dense (size n*n)
  std::vector<double> b_;
  double lambda_max_ = 0.0;
  std::string id_;
};

// Quadratic whose gradient vanishes identically outside `active`:
// f(w) = scale/2 * sum_{i in active} (w_i - offset)^2.
// Throws DomainError on an empty active set, DimensionError if out of range.
QuadraticObjective sparse_quadratic_objective(std::size_t n,
                                              std::span<const std::size_t> active,
                                              double scale, double offset = 0.0);

QuadraticObjective quadratic_objective(std::vector<double> a, std::size_t n,
                                       std::vector<double> b);

// Multinomial logistic regression: mean softmax cross-entropy of W x + c plus
// l2/2 * ||w||^2. Layout: weight (C x d, row-major) then bias (C).
class LogisticObjective : public Objective {
 public:
  LogisticObjective(std::shared_ptr<const Dataset> data,
                    std::size_t num_classes, double l2);

  std::size_t dim() const override;
  std::string id() const override { return "logistic"; }
  double eval(std::span<const double> w, const Batch& batch) const override;
  std::vector<double> true_grad(std::span<const double> w,
                                const Batch& batch) const override;
  bool is_classifier() const override { return true; }
  std::vector<int> predict(std::span<const double> w,
                           const Batch& batch) const override;
  const Dataset* dataset() const override { return data_.get(); }
  std::vector<Segment> layout() const override;

 private:
  void scores(std::span<const double> w, std::size_t example,
              std::span<double> out) const;

  std::shared_ptr<const Dataset> data_;
  std::size_t classes_;
  double l2_;
};

// Fully connected net, tanh hidden layers, softmax cross-entropy output.
// Parameters per layer: weight (out x in, row-major) then bias (out).
class MlpObjective : public Objective {
 public:
  // layer_sizes[0] must equal the feature count, the last entry the class
  // count. Weights are drawn xavier-normal from `rng`, biases start at 0.
  MlpObjective(std::vector<std::size_t> layer_sizes,
               std::shared_ptr<const Dataset> data, RngStream& rng);

  std::size_t dim() const override { return n_; }
  std::string id() const override;
  double eval(std::span<const double> w, const Batch& batch) const override;
  std::vector<double> true_grad(std::span<const double> w,
                                const Batch& batch) const override;
  bool is_classifier() const override { return true; }
  std::vector<int> predict(std::span<const double> w,
                           const Batch& batch) const override;
  const Dataset* dataset() const override { return data_.get(); }
  ParamVector initial_point() const override { return init_; }
  std::vector<Segment> layout() const override;

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

 private:
  // Forward pass for one example; fills activations per layer (layer 0 is
  // the input) and returns the output logits.
  void forward(std::span<const double> w, std::size_t example,
               std::vector<std::vector<double>>& acts) const;
  double example_loss(std::span<const double> w, std::size_t example,
                      std::vector<std::vector<double>>& acts) const;

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::size_t n_ = 0;
  std::shared_ptr<const Dataset> data_;
  ParamVector init_;
};

std::shared_ptr<MlpObjective> mlp_objective(std::vector<std::size_t> layer_sizes,
                                            std::shared_ptr<const Dataset> data,
                                            RngStream& rng);

// Number of MLP parameters for the given layer sizes.
std::size_t mlp_param_count(std::span<const std::size_t> layer_sizes);

// ---------------------------------------------------------------------------
// Data

struct IdxTensor {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  // Images (2051): bytes / 255. Labels (2049): raw byte values.
  std::vector<double> data;
};

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;

// Parses an IDX file. Throws FormatError on an unknown magic or a truncated
// header/payload.
IdxTensor load_idx(const std::string& path);
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);

// Gaussian clusters with distinct means, split 60/20/20 after a shuffle.
Dataset synth_blobs(RngStream& rng, std::size_t classes, std::size_t dims,
                    std::size_t per_class, double spread);

// Zero-pads each 28x28 image to 32x32 and averages 4x4 blocks to 8x8.
std::vector<double> pool_28_to_8(std::span<const double> image);

// Loads the four MNIST IDX files from `dir`. The last 20% of the training
// file becomes the dev split. With `pool`, images are reduced to 8x8.
Dataset load_mnist(const std::string& dir, bool pool);

}  // namespace szo
