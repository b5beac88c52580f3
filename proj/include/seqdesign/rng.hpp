#pragma once

#include <cmath>
#include <cstdint>

// Counter-based splittable random streams.
//
// Every stream is a pure function of (key, counter): the i-th output is
// mix64(key + i * golden), the SplitMix64 construction. Child streams are
// derived by hashing the parent seed together with up to three coordinates,
// so any (seed, gamma_index, rep_index, slot) cell of a sweep owns its own
// statistically independent stream regardless of scheduling or thread count.
// Nothing here depends on standard-library distribution internals, so output
// is bit-identical across platforms and compiler versions.

namespace seqdesign::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer (Stafford mix 13).
inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

class Stream {
public:
  using result_type = std::uint64_t;

  explicit constexpr Stream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    counter_ += kGolden;
    return mix64(key_ + counter_);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Keyed derivation: equal coordinate tuples give equal streams, distinct
// tuples give (with overwhelming probability) unrelated ones.
inline Stream derive(std::uint64_t master_seed, std::uint64_t a = 0,
                     std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
  std::uint64_t k = mix64(master_seed + kGolden);
  k = mix64((k ^ a) + kGolden);
  k = mix64((k ^ b) + kGolden);
  k = mix64((k ^ c) + kGolden);
  return Stream{k};
}

// Uniform on (0, 1]: 53 random bits, never 0, so log(u) is always finite.
inline double uniform01(Stream& s) noexcept {
  return static_cast<double>((s() >> 11) + 1) * 0x1.0p-53;
}

inline constexpr double kTwoPi = 6.28318530717958647692528676655900577;

// Standard normal via Box-Muller (cosine branch; one uniform pair per call).
inline double normal(Stream& s) noexcept {
  const double u = uniform01(s);
  const double v = uniform01(s);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(kTwoPi * v);
}

// P(1) = p exactly for dyadic p (u is uniform on {k * 2^-53 : 1 <= k <= 2^53}).
inline int bernoulli(Stream& s, double p) noexcept {
  return uniform01(s) <= p ? 1 : 0;
}

} // namespace seqdesign::rng
