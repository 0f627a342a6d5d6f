#pragma once

#include <cmath>
#include <cstdint>

namespace tbme {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Used as the mixing
/// step of the seed-derivation chain so that any run in a sweep can be
/// reproduced in isolation from (master_seed, tags...).
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and a tag. The chain is
/// order-sensitive: chain_seed(chain_seed(master, a), b) != chain_seed(chain_seed(master, b), a).
inline constexpr std::uint64_t chain_seed(std::uint64_t parent, std::uint64_t tag) {
  return mix64(parent ^ (mix64(tag) + 0x9E3779B97F4A7C15ull + (parent << 6) + (parent >> 2)));
}

/// PCG32 (pcg_xsh_rr_64_32, O'Neill 2014): 64-bit LCG state with an
/// xorshift-high + random-rotate output permutation. All sampling in this
/// library goes through this generator plus the explicit transforms below,
/// so streams are reproducible across platforms and implementations.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(0), inc_((stream << 1u) | 1u) {
    next_u32();
    state_ += seed;
    next_u32();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    const std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * next_double(); }

  /// Uniform integer in {0, ..., n-1}, n >= 1.
  int uniform_int(int n) {
    const int v = static_cast<int>(next_double() * static_cast<double>(n));
    return v < n ? v : n - 1;
  }

  /// Standard normal via the trigonometric Box-Muller transform. Consumes
  /// exactly two uniforms per pair; the second deviate is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace tbme
