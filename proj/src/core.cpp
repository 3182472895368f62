#include "szo/core.hpp"

#include <bit>
#include <cmath>

#include "szo/errors.hpp"

namespace szo {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

// ---------------------------------------------------------------------------
// ParamVector

ParamVector::ParamVector(std::vector<double> values)
    : ParamVector(std::move(values), {}) {}

ParamVector::ParamVector(std::vector<double> values,
                         std::vector<Segment> layout)
    : values_(std::move(values)), layout_(std::move(layout)) {
  if (layout_.empty()) {
    layout_.push_back({"params", 0, values_.size()});
  }
  validate_layout(layout_, values_.size());
  if (!all_finite()) {
    throw DomainError("ParamVector: non-finite value");
  }
}

bool ParamVector::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void validate_layout(const std::vector<Segment>& layout, std::size_t n) {
  std::size_t next = 0;
  for (const auto& seg : layout) {
    if (seg.offset != next) {
      throw DimensionError("layout segment '" + seg.name +
                           "' does not start where the previous one ended");
    }
    next += seg.length;
  }
  if (next != n) {
    throw DimensionError("layout covers " + std::to_string(next) +
                         " values but vector has " + std::to_string(n));
  }
}

// ---------------------------------------------------------------------------
// Mask

Mask::Mask(std::size_t n) : n_(n), nbar_(0), words_((n + 63) / 64, 0) {}

Mask Mask::ones(std::size_t n) {
  Mask m(n);
  for (std::size_t i = 0; i < n; ++i) m.words_[i >> 6] |= 1ULL << (i & 63);
  m.nbar_ = n;
  return m;
}

Mask Mask::zeros(std::size_t n) { return Mask(n); }

Mask Mask::from_string(const std::string& bits) {
  Mask m(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') {
      m.set(i, true);
    } else if (bits[i] != '0') {
      throw FormatError("mask string may only contain '0' and '1'");
    }
  }
  return m;
}

Mask Mask::from_indices(std::size_t n, std::span<const std::size_t> on) {
  Mask m(n);
  for (std::size_t i : on) {
    if (i >= n) throw DimensionError("mask index out of range");
    m.set(i, true);
  }
  return m;
}

std::size_t Mask::recount() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

void Mask::set(std::size_t i, bool on) {
  const std::uint64_t bit = 1ULL << (i & 63);
  std::uint64_t& w = words_[i >> 6];
  const bool was = (w & bit) != 0;
  if (was == on) return;
  if (on) {
    w |= bit;
    ++nbar_;
  } else {
    w &= ~bit;
    --nbar_;
  }
}

std::vector<std::size_t> Mask::active_indices() const {
  std::vector<std::size_t> out;
  out.reserve(nbar_);
  for (std::size_t i = 0; i < n_; ++i) {
    if (test(i)) out.push_back(i);
  }
  return out;
}

std::string Mask::to_string() const {
  std::string s(n_, '0');
  for (std::size_t i = 0; i < n_; ++i) {
    if (test(i)) s[i] = '1';
  }
  return s;
}

std::vector<std::uint8_t> Mask::to_bytes() const {
  std::vector<std::uint8_t> out((n_ + 7) / 8, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    if (test(i)) out[i >> 3] |= static_cast<std::uint8_t>(1U << (i & 7));
  }
  return out;
}

Mask Mask::from_bytes(std::size_t n, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != (n + 7) / 8) {
    throw FormatError("mask byte length does not match bit count");
  }
  Mask m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if ((bytes[i >> 3] >> (i & 7)) & 1U) m.set(i, true);
  }
  // Padding bits past n must be clear.
  if (n % 8 != 0 && (bytes.back() >> (n % 8)) != 0) {
    throw FormatError("mask padding bits are set");
  }
  return m;
}

bool Mask::is_subset_of(const Mask& outer) const {
  if (outer.n_ != n_) return false;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    if ((words_[w] & ~outer.words_[w]) != 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// RngStream

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a;
  std::uint64_t h = splitmix64(x);
  std::uint64_t y = b ^ rotl(h, 17);
  return splitmix64(y) ^ h;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id) {
  st_.master_seed = master_seed;
  st_.stream_id = stream_id;
  std::uint64_t x = mix_seed(master_seed, stream_id);
  for (auto& word : st_.s) word = splitmix64(x);
  // xoshiro must not start from the all-zero state.
  if ((st_.s[0] | st_.s[1] | st_.s[2] | st_.s[3]) == 0) st_.s[0] = 1;
}

std::uint64_t RngStream::next_u64() {
  auto& s = st_.s;
  const std::uint64_t result = rotl(s[1] * 5, 7) * 9;
  const std::uint64_t t = s[1] << 17;
  s[2] ^= s[0];
  s[3] ^= s[1];
  s[1] ^= s[2];
  s[0] ^= s[3];
  s[2] ^= t;
  s[3] = rotl(s[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw DomainError("uniform_index: bound must be >= 1");
  // Rejection from the largest multiple of `bound`.
  const std::uint64_t limit = max() - (max() % bound + 1) % bound;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r > limit);
  return r % bound;
}

double RngStream::normal() {
  if (st_.has_spare) {
    st_.has_spare = false;
    return st_.spare;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  st_.spare = v * factor;
  st_.has_spare = true;
  return u * factor;
}

// ---------------------------------------------------------------------------

std::vector<double> sample_std_normal(RngStream& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& x : out) x = rng.normal();
  return out;
}

std::vector<double> apply_mask(const Mask& m, std::span<const double> v) {
  if (v.size() != m.size()) {
    throw DimensionError("apply_mask: vector length " +
                         std::to_string(v.size()) + " vs mask length " +
                         std::to_string(m.size()));
  }
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (m.test(i)) out[i] = v[i];
  }
  return out;
}

double mask_sparsity(const Mask& m) {
  if (m.size() == 0) throw DomainError("mask_sparsity: empty mask");
  return 1.0 - static_cast<double>(m.count()) / static_cast<double>(m.size());
}

}  // namespace szo
