#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace szo {

// A named contiguous slice of a parameter vector, e.g. one layer's weights.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

// Flat optimization variable with layer layout metadata. The layout never
// influences arithmetic; it only names ranges for reporting.
class ParamVector {
 public:
  ParamVector() = default;
  // Single segment named "params" covering everything.
  explicit ParamVector(std::vector<double> values);
  // Throws DomainError on non-finite values, DimensionError on a layout that
  // does not tile [0, n) in order.
  ParamVector(std::vector<double> values, std::vector<Segment> layout);

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<Segment>& layout() const { return layout_; }

  bool all_finite() const;

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> values_;
  std::vector<Segment> layout_;
};

void validate_layout(const std::vector<Segment>& layout, std::size_t n);

// Packed bit vector with a cached popcount.
class Mask {
 public:
  Mask() = default;

  static Mask ones(std::size_t n);
  static Mask zeros(std::size_t n);
  // "101" -> bits (1,0,1). Any character other than '0'/'1' is rejected.
  static Mask from_string(const std::string& bits);
  static Mask from_indices(std::size_t n, std::span<const std::size_t> on);

  std::size_t size() const { return n_; }
  // Number of 1-bits (n-bar).
  std::size_t count() const { return nbar_; }
  // Recomputes the popcount from the packed words, ignoring the cache.
  std::size_t recount() const;

  bool test(std::size_t i) const {
    return (words_[i >> 6] >> (i & 63)) & 1U;
  }
  void set(std::size_t i, bool on);

  std::vector<std::size_t> active_indices() const;
  std::string to_string() const;

  // Packed LSB-first bytes, ceil(n/8) of them.
  std::vector<std::uint8_t> to_bytes() const;
  static Mask from_bytes(std::size_t n, std::span<const std::uint8_t> bytes);

  bool operator==(const Mask& other) const {
    return n_ == other.n_ && words_ == other.words_;
  }

  // True iff every 1-bit of *this is also set in `outer`.
  bool is_subset_of(const Mask& outer) const;

 private:
  explicit Mask(std::size_t n);

  std::size_t n_ = 0;
  std::size_t nbar_ = 0;
  std::vector<std::uint64_t> words_;
};

// Serializable snapshot of an RngStream.
struct RngState {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
  std::array<std::uint64_t, 4> s{};
  bool has_spare = false;
  double spare = 0.0;

  bool operator==(const RngState&) const = default;
};

// xoshiro256** keyed by (master_seed, stream_id) through splitmix64, with the
// Marsaglia polar method for normals. Deterministic within a build.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);
  explicit RngStream(const RngState& state) : st_(state) {}

  // A fresh stream sharing this stream's master seed.
  RngStream substream(std::uint64_t stream_id) const {
    return RngStream(st_.master_seed, stream_id);
  }

  std::uint64_t master_seed() const { return st_.master_seed; }
  std::uint64_t stream_id() const { return st_.stream_id; }
  const RngState& state() const { return st_; }

  std::uint64_t next_u64();
  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound), bound >= 1, without modulo bias.
  std::uint64_t uniform_index(std::uint64_t bound);
  double normal();

 private:
  RngState st_;
};

// Deterministic 64-bit mixing of two words; used to derive per-purpose seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::vector<double> sample_std_normal(RngStream& rng, std::size_t n);

// m ⊙ v. Throws DimensionError on length mismatch.
std::vector<double> apply_mask(const Mask& m, std::span<const double> v);

// 1 - nbar/n. Throws DomainError for n = 0.
double mask_sparsity(const Mask& m);

// In-place Fisher-Yates driven by `rng`.
template <typename T>
void shuffle_in_place(std::vector<T>& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace szo
