#include <cmath>
#include <fstream>
#include <iterator>

#include "szo/errors.hpp"
#include "szo/objectives.hpp"

namespace szo {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

}  // namespace

IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("idx: truncated magic");
  IdxTensor t;
  t.magic = read_be32(bytes, 0);
  if (t.magic != kIdxImagesMagic && t.magic != kIdxLabelsMagic) {
    throw FormatError("idx: unsupported magic " + std::to_string(t.magic));
  }
  // Low byte of the magic is the dimension count; 0x08 = unsigned byte data.
  const std::size_t ndims = t.magic & 0xFFU;
  std::size_t pos = 4;
  if (bytes.size() < pos + 4 * ndims) throw FormatError("idx: truncated header");
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    t.dims.push_back(read_be32(bytes, pos));
    total *= t.dims.back();
    pos += 4;
  }
  if (bytes.size() - pos < total) {
    throw FormatError("idx: truncated payload (expected " +
                      std::to_string(total) + " bytes, have " +
                      std::to_string(bytes.size() - pos) + ")");
  }
  if (bytes.size() - pos > total) {
    throw FormatError("idx: trailing bytes after payload");
  }
  const bool images = t.magic == kIdxImagesMagic;
  t.data.resize(total);
  for (std::size_t k = 0; k < total; ++k) {
    const double v = bytes[pos + k];
    t.data[k] = images ? v / 255.0 : v;
  }
  return t;
}

IdxTensor load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("idx: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_idx(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

Dataset synth_blobs(RngStream& rng, std::size_t classes, std::size_t dims,
                    std::size_t per_class, double spread) {
  if (classes < 2) throw DomainError("synth_blobs: classes must be >= 2");
  if (per_class < 1) throw DomainError("synth_blobs: per_class must be >= 1");
  if (dims < 1) throw DomainError("synth_blobs: dims must be >= 1");
  if (!(spread >= 0.0)) throw DomainError("synth_blobs: spread must be >= 0");

  Dataset d;
  d.num_classes = classes;
  d.num_features = dims;
  d.num_examples = classes * per_class;

  // Two means drawn this way lie about 3 units apart in any dimension.
  std::vector<double> means(classes * dims);
  const double mean_std = 3.0 / std::sqrt(2.0 * static_cast<double>(dims));
  for (auto& m : means) m = mean_std * rng.normal();

  d.inputs.resize(d.num_examples * dims);
  d.labels.resize(d.num_examples);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t i = c * per_class + k;
      d.labels[i] = static_cast<int>(c);
      for (std::size_t j = 0; j < dims; ++j) {
        const double noise = rng.normal();
        d.inputs[i * dims + j] = means[c * dims + j] + spread * noise;
      }
    }
  }

  std::vector<std::size_t> order(d.num_examples);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_in_place(order, rng);
  const std::size_t n_train = d.num_examples * 3 / 5;
  const std::size_t n_dev = d.num_examples / 5;
  d.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  d.dev.assign(order.begin() + static_cast<long>(n_train),
               order.begin() + static_cast<long>(n_train + n_dev));
  d.test.assign(order.begin() + static_cast<long>(n_train + n_dev), order.end());
  return d;
}

std::vector<double> pool_28_to_8(std::span<const double> image) {
  if (image.size() != 28 * 28) throw DimensionError("pool: expected 28x28 image");
  std::vector<double> out(64, 0.0);
  for (std::size_t r = 0; r < 28; ++r) {
    for (std::size_t c = 0; c < 28; ++c) {
      // Padded coordinates: 2 zero rows/cols on each side.
      const std::size_t pr = r + 2;
      const std::size_t pc = c + 2;
      out[(pr / 4) * 8 + (pc / 4)] += image[r * 28 + c];
    }
  }
  for (double& v : out) v /= 16.0;
  return out;
}

Dataset load_mnist(const std::string& dir, bool pool) {
  const auto train_x = load_idx(dir + "/train-images-idx3-ubyte");
  const auto train_y = load_idx(dir + "/train-labels-idx1-ubyte");
  const auto test_x = load_idx(dir + "/t10k-images-idx3-ubyte");
  const auto test_y = load_idx(dir + "/t10k-labels-idx1-ubyte");
  auto check = [](const IdxTensor& x, const IdxTensor& y) {
    if (x.magic != kIdxImagesMagic || y.magic != kIdxLabelsMagic ||
        x.dims.size() != 3 || y.dims.size() != 1 || x.dims[0] != y.dims[0]) {
      throw FormatError("mnist: image/label files do not match");
    }
  };
  check(train_x, train_y);
  check(test_x, test_y);
  if (train_x.dims[1] != test_x.dims[1] || train_x.dims[2] != test_x.dims[2]) {
    throw FormatError("mnist: train/test image sizes differ");
  }

  const std::size_t pixels = std::size_t{train_x.dims[1]} * train_x.dims[2];
  if (pool && pixels != 28 * 28) throw FormatError("mnist: pooling needs 28x28");

  Dataset d;
  d.num_classes = 10;
  d.num_features = pool ? 64 : pixels;
  const std::size_t n_train = train_x.dims[0];
  const std::size_t n_test = test_x.dims[0];
  d.num_examples = n_train + n_test;
  d.inputs.reserve(d.num_examples * d.num_features);
  auto append = [&](const IdxTensor& x, const IdxTensor& y, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      std::span<const double> img(x.data.data() + i * pixels, pixels);
      if (pool) {
        const auto pooled = pool_28_to_8(img);
        d.inputs.insert(d.inputs.end(), pooled.begin(), pooled.end());
      } else {
        d.inputs.insert(d.inputs.end(), img.begin(), img.end());
      }
      d.labels.push_back(static_cast<int>(y.data[i]));
    }
  };
  append(train_x, train_y, n_train);
  append(test_x, test_y, n_test);

  const std::size_t n_dev = n_train / 5;
  for (std::size_t i = 0; i < n_train - n_dev; ++i) d.train.push_back(i);
  for (std::size_t i = n_train - n_dev; i < n_train; ++i) d.dev.push_back(i);
  for (std::size_t i = n_train; i < d.num_examples; ++i) d.test.push_back(i);
  d.validate();
  return d;
}

}  // namespace szo
