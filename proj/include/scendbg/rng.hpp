#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace scendbg {

// SplitMix64 finalizer. All randomness in this project flows through
// RngStream so that results are bit-reproducible across platforms and
// independent of worker scheduling; std::<random> distributions are
// implementation-defined and deliberately avoided.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_bytes(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based pseudo-random stream. Streams for (seed, index) pairs are
/// decorrelated, so sample i can be regenerated without drawing samples 0..i-1.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(mix64(mix64(seed))) {}

  static RngStream substream(std::uint64_t seed, std::uint64_t index) {
    return RngStream(mix64(seed) ^ mix64(index + 0x51ed2701a2b9e4d5ULL));
  }

  static RngStream substream(std::uint64_t seed, std::string_view tag) {
    return RngStream(mix64(seed) ^ hash_bytes(tag));
  }

  std::uint64_t derive(std::string_view tag) const { return mix64(state_ ^ hash_bytes(tag)); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform_real(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform integer in [lo, hi], both inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Uniform in {0, ..., n-1}; n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
  }

  bool bernoulli(double p) { return next_unit() < p; }

  /// Standard normal via Box-Muller; consumes exactly two draws per call.
  double gaussian() {
    double u1 = 1.0 - next_unit();  // (0, 1], keeps log() finite
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace scendbg
