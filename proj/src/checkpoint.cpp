#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "szo/errors.hpp"
#include "szo/optimizer.hpp"

namespace szo {

namespace {

constexpr char kMagic[4] = {'S', 'S', 'Z', 'O'};

class Writer {
 public:
  void bytes(const void* p, std::size_t len) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + len);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> bytes(std::size_t len) {
    need(len);
    auto s = in_.subspan(pos_, len);
    pos_ += len;
    return s;
  }
  std::uint8_t u8() { return bytes(1)[0]; }
  std::uint32_t u32() {
    auto b = bytes(4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | b[static_cast<std::size_t>(k)];
    return v;
  }
  std::uint64_t u64() {
    auto b = bytes(8);
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | b[static_cast<std::size_t>(k)];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool flag() {
    const auto v = u8();
    if (v > 1) throw FormatError("checkpoint: bad flag byte");
    return v == 1;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t len) const {
    if (in_.size() - pos_ < len) throw FormatError("checkpoint: truncated");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const OptState& state) {
  const std::size_t n = state.w.size();
  if (state.m.size() != n) throw DimensionError("checkpoint: mask/weights mismatch");
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(n);
  w.u64(state.step);
  w.u64(state.events_fired);

  const RngState& rng = state.mask_rng;
  w.u64(rng.master_seed);
  w.u64(rng.stream_id);
  for (auto word : rng.s) w.u64(word);
  w.u8(rng.has_spare ? 1 : 0);
  w.f64(rng.spare);

  const auto mask = state.m.to_bytes();
  w.bytes(mask.data(), mask.size());
  for (double v : state.w.values()) w.f64(v);

  w.u64(state.seed);
  w.u64(state.examples_seen);
  w.u64(state.fevals);
  w.f64(state.cum_loss);
  w.u8(state.lipschitz_running ? 1 : 0);
  w.f64(state.lipschitz_running.value_or(0.0));
  w.f64(state.lipschitz_used);
  w.u8(state.prev_w ? 1 : 0);
  if (state.prev_w) {
    if (state.prev_w->size() != n) throw DimensionError("checkpoint: prev_w size");
    for (double v : *state.prev_w) w.f64(v);
  }
  return w.take();
}

OptState checkpoint_from_bytes(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  OptState s;
  const std::uint64_t n = r.u64();
  // Guard against absurd sizes from corrupted headers before allocating.
  if (n > bytes.size()) throw FormatError("checkpoint: parameter count too large");
  s.step = r.u64();
  s.events_fired = r.u64();

  s.mask_rng.master_seed = r.u64();
  s.mask_rng.stream_id = r.u64();
  for (auto& word : s.mask_rng.s) word = r.u64();
  s.mask_rng.has_spare = r.flag();
  s.mask_rng.spare = r.f64();

  s.m = Mask::from_bytes(n, r.bytes((n + 7) / 8));
  std::vector<double> w(n);
  for (auto& v : w) v = r.f64();
  try {
    s.w = ParamVector(std::move(w));
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  s.seed = r.u64();
  s.examples_seen = r.u64();
  s.fevals = r.u64();
  s.cum_loss = r.f64();
  const bool has_running = r.flag();
  const double running = r.f64();
  if (has_running) s.lipschitz_running = running;
  s.lipschitz_used = r.f64();
  if (r.flag()) {
    std::vector<double> prev(n);
    for (auto& v : prev) v = r.f64();
    s.prev_w = std::move(prev);
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return s;
}

void checkpoint_save(const OptState& state, const std::string& path) {
  const auto bytes = checkpoint_bytes(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("checkpoint: write failed for " + path);
}

OptState checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes);
}

}  // namespace szo
