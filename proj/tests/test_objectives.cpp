#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support/oracles.hpp"
#include "szo/errors.hpp"
#include "szo/objectives.hpp"

namespace szo {
namespace {

using testing::central_difference;
using testing::max_relative_error;

std::shared_ptr<const Dataset> blobs(std::uint64_t seed, std::size_t classes,
                                     std::size_t dims, std::size_t per_class,
                                     double spread) {
  RngStream rng(seed, 0);
  return std::make_shared<const Dataset>(
      synth_blobs(rng, classes, dims, per_class, spread));
}

TEST(Quadratic, IdentityExample) {
  const auto q = quadratic_objective({1, 0, 0, 1}, 2, {0, 0});
  const std::vector<double> w{1, 2};
  EXPECT_DOUBLE_EQ(q.eval(w, {}), 2.5);
  EXPECT_EQ(q.true_grad(w, {}), (std::vector<double>{1, 2}));
}

TEST(Quadratic, GradientVanishesAtSolution) {
  // A = [[4,1,0],[1,3,1],[0,1,2]], b = A * (1, -2, 0.5).
  const std::vector<double> a{4, 1, 0, 1, 3, 1, 0, 1, 2};
  const std::vector<double> x{1, -2, 0.5};
  std::vector<double> b(3, 0.0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) b[r] += a[r * 3 + c] * x[c];
  const auto q = quadratic_objective(a, 3, b);
  for (double g : q.true_grad(x, {})) EXPECT_NEAR(g, 0.0, 1e-12);
  EXPECT_NEAR(q.minimum_value(), q.eval(x, {}), 1e-12);
}

TEST(Quadratic, RandomDiagonalMatchesFiniteDifferences) {
  RngStream rng(31, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 12;
    std::vector<double> diag(n);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      diag[i] = rng.uniform(0.1, 5.0);
      b[i] = rng.uniform(-1.0, 1.0);
    }
    const auto q = QuadraticObjective::diagonal(diag, b);
    const auto w = sample_std_normal(rng, n);
    EXPECT_LT(max_relative_error(central_difference(q, w, {}), q.true_grad(w, {})),
              1e-8);
  }
}

TEST(Quadratic, TaylorIdentityIsExact) {
  const std::vector<double> a{2, 0.5, 0.5, 1};
  const auto q = quadratic_objective(a, 2, {0.3, -0.7});
  RngStream rng(4, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = sample_std_normal(rng, 2);
    const auto d = sample_std_normal(rng, 2);
    std::vector<double> wd{w[0] + d[0], w[1] + d[1]};
    const auto g = q.true_grad(w, {});
    const auto ad = q.apply(d);
    const double lhs = q.eval(wd, {}) - q.eval(w, {}) - testing::dot(g, d);
    EXPECT_NEAR(lhs, 0.5 * testing::dot(d, ad), 1e-12);
  }
}

TEST(Quadratic, RejectsBadMatrices) {
  EXPECT_THROW(quadratic_objective({1, 0, 0}, 2, {0, 0}), DimensionError);
  EXPECT_THROW(quadratic_objective({1, 0, 0, 1}, 2, {0}), DimensionError);
  EXPECT_THROW(quadratic_objective({1, 2, 0, 1}, 2, {0, 0}), DomainError);
  EXPECT_THROW(quadratic_objective({1, 0, 0, -1}, 2, {0, 0}), DomainError);
}

TEST(Quadratic, LambdaMaxOfDenseMatrix) {
  // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
  const auto q = quadratic_objective({2, 1, 1, 2}, 2, {0, 0});
  EXPECT_NEAR(q.lambda_max(), 3.0, 1e-12);
  ASSERT_TRUE(q.lipschitz_hint().has_value());
}

TEST(Quadratic, UnboundedMinimumThrows) {
  const auto q = QuadraticObjective::diagonal({1.0, 0.0}, {0.0, 1.0});
  EXPECT_THROW(q.minimum_value(), DomainError);
}

TEST(SparseQuadratic, GradientZeroOutsideActiveSet) {
  std::vector<std::size_t> active(10);
  std::iota(active.begin(), active.end(), 37);
  const auto q = sparse_quadratic_objective(200, active, 2.0);
  RngStream rng(8, 1);
  const auto w = sample_std_normal(rng, 200);
  const auto g = q.true_grad(w, {});
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const bool is_active = i >= 37 && i < 47;
    if (!is_active) {
      EXPECT_EQ(g[i], 0.0);
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(g[i], 2.0 * w[i]);
    }
  }
  EXPECT_EQ(zeros, 190u);
}

TEST(SparseQuadratic, FullActiveSetEqualsDiagonalQuadratic) {
  std::vector<std::size_t> active(6);
  std::iota(active.begin(), active.end(), 0);
  const auto s = sparse_quadratic_objective(6, active, 3.0);
  const auto d = QuadraticObjective::diagonal(std::vector<double>(6, 3.0),
                                              std::vector<double>(6, 0.0));
  RngStream rng(1, 2);
  const auto w = sample_std_normal(rng, 6);
  EXPECT_DOUBLE_EQ(s.eval(w, {}), d.eval(w, {}));
  EXPECT_EQ(s.true_grad(w, {}), d.true_grad(w, {}));
}

TEST(SparseQuadratic, Errors) {
  EXPECT_THROW(sparse_quadratic_objective(5, {}, 1.0), DomainError);
  const std::vector<std::size_t> bad{5};
  EXPECT_THROW(sparse_quadratic_objective(5, bad, 1.0), DimensionError);
}

TEST(Logistic, ZeroWeightsGiveLogC) {
  const auto data = blobs(3, 4, 5, 20, 0.5);
  const LogisticObjective obj(data, 4, 0.0);
  const std::vector<double> w(obj.dim(), 0.0);
  EXPECT_NEAR(obj.eval(w, data->train), std::log(4.0), 1e-12);
}

TEST(Logistic, L2TermVanishesAtZero) {
  const auto data = blobs(3, 3, 4, 10, 0.5);
  const LogisticObjective plain(data, 3, 0.0);
  const LogisticObjective reg(data, 3, 0.7);
  const std::vector<double> w(plain.dim(), 0.0);
  EXPECT_DOUBLE_EQ(plain.eval(w, data->train), reg.eval(w, data->train));
}

TEST(Logistic, GradientMatchesFiniteDifferences) {
  const auto data = blobs(5, 3, 6, 30, 1.0);
  const LogisticObjective obj(data, 3, 0.01);
  RngStream rng(6, 0);
  for (int trial = 0; trial < 5; ++trial) {
    auto w = sample_std_normal(rng, obj.dim());
    for (double& v : w) v *= 0.5;
    const Batch batch(data->train.begin(), data->train.begin() + 16);
    EXPECT_LT(max_relative_error(central_difference(obj, w, batch),
                                 obj.true_grad(w, batch)),
              1e-6);
  }
}

TEST(Logistic, Errors) {
  const auto data = blobs(3, 3, 4, 10, 0.5);
  EXPECT_THROW(LogisticObjective(data, 1, 0.0), DomainError);
  const LogisticObjective obj(data, 3, 0.0);
  const std::vector<double> w(obj.dim(), 0.0);
  EXPECT_THROW(obj.eval(w, {}), DomainError);
}

TEST(Logistic, GradientDescentSeparatesBlobs) {
  const auto data = blobs(12, 3, 4, 100, 0.3);
  const LogisticObjective obj(data, 3, 0.0);
  std::vector<double> w(obj.dim(), 0.0);
  for (int it = 0; it < 300; ++it) {
    const auto g = obj.true_grad(w, data->train);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 0.5 * g[i];
  }
  const auto pred = obj.predict(w, data->test);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    correct += pred[i] == data->labels[data->test[i]] ? 1 : 0;
  }
  EXPECT_GT(static_cast<double>(correct) / static_cast<double>(pred.size()), 0.95);
}

TEST(Mlp, ParamCountFor64_32_10) {
  const std::vector<std::size_t> sizes{64, 32, 10};
  EXPECT_EQ(mlp_param_count(sizes), 2410u);
  const auto data = blobs(1, 10, 64, 5, 1.0);
  RngStream rng(1, 1);
  const auto mlp = mlp_objective(sizes, data, rng);
  EXPECT_EQ(mlp->dim(), 2410u);
  EXPECT_EQ(mlp->id(), "mlp-64-32-10");
  EXPECT_EQ(mlp->layout().size(), 4u);
}

TEST(Mlp, ZeroWeightsGiveLogC) {
  const auto data = blobs(2, 3, 2, 20, 1.0);
  RngStream rng(2, 0);
  const auto mlp = mlp_objective({2, 16, 3}, data, rng);
  const std::vector<double> w(mlp->dim(), 0.0);
  EXPECT_NEAR(mlp->eval(w, data->train), std::log(3.0), 1e-12);
}

TEST(Mlp, BackpropMatchesFiniteDifferences) {
  const auto data = blobs(9, 3, 2, 20, 1.0);
  RngStream init(9, 1);
  const auto mlp = mlp_objective({2, 16, 3}, data, init);
  RngStream rng(9, 2);
  const Batch batch(data->train.begin(), data->train.begin() + 12);
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    const auto w = sample_std_normal(rng, mlp->dim());
    worst = std::max(worst, max_relative_error(central_difference(*mlp, w, batch),
                                               mlp->true_grad(w, batch)));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Mlp, XavierInitialisationScale) {
  const auto data = blobs(4, 10, 64, 2, 1.0);
  RngStream rng(4, 4);
  const auto mlp = mlp_objective({64, 32, 10}, data, rng);
  const auto w0 = mlp->initial_point();
  // First layer: 32 x 64 weights, expected std sqrt(2 / 96).
  double sq = 0.0;
  for (std::size_t i = 0; i < 32 * 64; ++i) sq += w0[i] * w0[i];
  const double sd = std::sqrt(sq / (32.0 * 64.0));
  EXPECT_NEAR(sd, std::sqrt(2.0 / 96.0), 0.01);
  for (std::size_t i = 32 * 64; i < 32 * 64 + 32; ++i) EXPECT_EQ(w0[i], 0.0);
}

TEST(Mlp, Errors) {
  const auto data = blobs(4, 3, 2, 5, 1.0);
  RngStream rng(4, 4);
  EXPECT_THROW(mlp_objective({2, 0, 3}, data, rng), DomainError);
  EXPECT_THROW(mlp_objective({5, 4, 3}, data, rng), DimensionError);
}

TEST(Objective, LayoutMetadataDoesNotAffectValues) {
  const auto data = blobs(7, 3, 4, 10, 0.5);
  const LogisticObjective obj(data, 3, 0.1);
  RngStream rng(7, 7);
  const auto raw = sample_std_normal(rng, obj.dim());
  const ParamVector with_layout(raw, obj.layout());
  const ParamVector flat(raw);
  EXPECT_EQ(obj.eval(with_layout.values(), data->train),
            obj.eval(flat.values(), data->train));
}

TEST(SynthBlobs, SplitsArePartition) {
  const auto data = blobs(10, 3, 5, 100, 1.0);
  EXPECT_EQ(data->num_examples, 300u);
  EXPECT_EQ(data->train.size(), 180u);
  EXPECT_EQ(data->dev.size(), 60u);
  EXPECT_EQ(data->test.size(), 60u);
  std::vector<int> seen(300, 0);
  for (const Batch* split : {&data->train, &data->dev, &data->test})
    for (auto i : *split) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(SynthBlobs, ZeroSpreadCollapsesClasses) {
  const auto data = blobs(11, 2, 3, 10, 0.0);
  for (std::size_t i = 0; i < data->num_examples; ++i) {
    for (std::size_t j = 0; j < data->num_examples; ++j) {
      if (data->labels[i] != data->labels[j]) continue;
      for (std::size_t f = 0; f < 3; ++f) {
        EXPECT_EQ(data->row(i)[f], data->row(j)[f]);
      }
    }
  }
}

TEST(Idx, ParsesImagesAndLabels) {
  const auto img = testing::make_idx(0x00000803, {2, 2, 2},
                                     {0, 255, 51, 102, 1, 2, 3, 4});
  const auto t = parse_idx(img);
  EXPECT_EQ(t.magic, kIdxImagesMagic);
  EXPECT_EQ(t.dims, (std::vector<std::uint32_t>{2, 2, 2}));
  ASSERT_EQ(t.data.size(), 8u);
  EXPECT_DOUBLE_EQ(t.data[1], 1.0);
  EXPECT_DOUBLE_EQ(t.data[2], 0.2);

  const auto lab = testing::make_idx(0x00000801, {3}, {7, 0, 9});
  const auto l = parse_idx(lab);
  EXPECT_EQ(l.data, (std::vector<double>{7, 0, 9}));
}

TEST(Idx, RejectsCorruptFiles) {
  EXPECT_THROW(parse_idx(testing::make_idx(0, {1}, {0})), FormatError);
  auto truncated = testing::make_idx(0x00000801, {5}, {1, 2});
  EXPECT_THROW(parse_idx(truncated), FormatError);
  std::vector<std::uint8_t> short_header{0, 0, 8};
  EXPECT_THROW(parse_idx(short_header), FormatError);
  auto trailing = testing::make_idx(0x00000801, {1}, {1, 2});
  EXPECT_THROW(parse_idx(trailing), FormatError);
}

TEST(Idx, LoadsFromDisk) {
  const auto dir = testing::scratch_dir("idx");
  testing::write_file(dir / "l.idx", testing::make_idx(0x00000801, {2}, {3, 4}));
  EXPECT_EQ(load_idx((dir / "l.idx").string()).data,
            (std::vector<double>{3, 4}));
  EXPECT_THROW(load_idx((dir / "missing.idx").string()), FormatError);
}

TEST(Pool, ConstantImageBlocks) {
  const std::vector<double> ones(28 * 28, 1.0);
  const auto pooled = pool_28_to_8(ones);
  ASSERT_EQ(pooled.size(), 64u);
  // The 28x28 image sits at offset 2 in the 32x32 canvas: border blocks
  // cover 2 padded rows/columns.
  EXPECT_DOUBLE_EQ(pooled[0], 4.0 / 16.0);
  EXPECT_DOUBLE_EQ(pooled[1], 8.0 / 16.0);
  EXPECT_DOUBLE_EQ(pooled[9], 1.0);
  EXPECT_DOUBLE_EQ(pooled[63], 4.0 / 16.0);
}

TEST(Mnist, LoadsSyntheticFiles) {
  const auto dir = testing::scratch_dir("mnist");
  auto images = [](std::uint32_t count) {
    std::vector<std::uint8_t> px(count * 28 * 28);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i % 256);
    return testing::make_idx(0x00000803, {count, 28, 28}, px);
  };
  auto labels = [](std::uint32_t count) {
    std::vector<std::uint8_t> l(count);
    for (std::uint32_t i = 0; i < count; ++i) l[i] = static_cast<std::uint8_t>(i % 10);
    return testing::make_idx(0x00000801, {count}, l);
  };
  testing::write_file(dir / "train-images-idx3-ubyte", images(10));
  testing::write_file(dir / "train-labels-idx1-ubyte", labels(10));
  testing::write_file(dir / "t10k-images-idx3-ubyte", images(4));
  testing::write_file(dir / "t10k-labels-idx1-ubyte", labels(4));

  const auto full = load_mnist(dir.string(), false);
  EXPECT_EQ(full.num_features, 784u);
  EXPECT_EQ(full.num_classes, 10u);
  EXPECT_EQ(full.train.size(), 8u);
  EXPECT_EQ(full.dev.size(), 2u);
  EXPECT_EQ(full.test.size(), 4u);

  const auto pooled = load_mnist(dir.string(), true);
  EXPECT_EQ(pooled.num_features, 64u);
}

}  // namespace
}  // namespace szo
