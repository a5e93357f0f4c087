#pragma once

// Counter-based random streams. A stream is identified by a 64-bit key
// derived from (seed, tags...), so any consumer can reconstruct the exact
// draws for a given sample without sharing generator state. Gaussian
// variates use Box-Muller on our own uniforms so results are identical
// across standard libraries.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace rppcert::rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t value) {
  return finalize(key ^ finalize(value + kGolden + (key << 6) + (key >> 2)));
}

constexpr std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t key = finalize(seed);
  for (auto t : tags) key = combine(key, t);
  return key;
}

// Domain tags keep streams for different purposes disjoint.
enum Domain : std::uint64_t {
  kScoring = 0x5c0,
  kCertifyCopies = 0xce7,
  kAssumption = 0xa1,
  kDatagen = 0xda7a,
  kShuffle = 0x5f1e,
  kSelect = 0x5e1,
  kInit = 0x1717,
  kValidate = 0x7a1,
};

/// SplitMix64 sequence starting at `key`.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return finalize(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double uniform_open_zero() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire-style rejection keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <typename It>
void shuffle(It first, It last, Stream& stream) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = stream.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace rppcert::rng
