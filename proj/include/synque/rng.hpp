#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace synque {

/// Portable pseudo-random stream: xoshiro256** seeded through splitmix64.
///
/// Every consumer in the library draws from this generator instead of <random>
/// distributions, whose output is implementation-defined. The stream layout is:
///   - state[i] = splitmix64 applied successively to (seed + stream * golden_gamma)
///   - uniform() = (next() >> 11) * 2^-53, in [0, 1)
///   - below(n)  = rejection sampling on next() with threshold (2^64 - n) mod n
///   - normal()  = Box-Muller cosine branch, consuming exactly two uniforms
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t x = seed + stream * kGoldenGamma;
    for (auto& s : state_) s = splitmix64(x);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += kGoldenGamma);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

}  // namespace synque
