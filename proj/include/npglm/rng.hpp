#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace npglm {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline void mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  lo = static_cast<std::uint64_t>(p);
}

}  // namespace detail

// Counter-based generator (Philox4x64-10). The output block is a pure
// function of (seed, stream id, counter), so draws are reproducible for a
// given stream regardless of what any other stream does, and substreams can
// be assigned deterministically to parallel units of work.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), counter_(0), pos_(4) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Child stream keyed by (this stream, id); never overlaps the parent.
  RngStream substream(std::uint64_t id) const {
    std::uint64_t x = stream_ ^ (0xa0761d6478bd642fULL + id);
    std::uint64_t mixed = detail::splitmix64(x);
    return RngStream(seed_, mixed ^ (id * 0xe7037ed1a0b428dbULL));
  }

  std::uint64_t next_u64() {
    if (pos_ == 4) {
      block(counter_++, buf_);
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  // Uniform on the open interval (0,1); safe under log().
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential() { return -std::log(uniform()); }

  // Box-Muller, one variate per call (no cached partner, so the stream state
  // stays a function of the draw count alone).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

 private:
  // One Philox4x64-10 block: counter (c0..c3) -> four 64-bit words.
  void block(std::uint64_t ctr, std::array<std::uint64_t, 4>& out) const {
    constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL;
    std::uint64_t c0 = ctr, c1 = 0, c2 = 0, c3 = 0;
    std::uint64_t k0 = seed_, k1 = stream_;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t hi0, lo0, hi1, lo1;
      detail::mulhilo64(M0, c0, hi0, lo0);
      detail::mulhilo64(M1, c2, hi1, lo1);
      c0 = hi1 ^ c1 ^ k0;
      c1 = lo1;
      c2 = hi0 ^ c3 ^ k1;
      c3 = lo0;
      k0 += W0;
      k1 += W1;
    }
    out = {c0, c1, c2, c3};
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  std::array<std::uint64_t, 4> buf_{};
  int pos_;
};

}  // namespace npglm
