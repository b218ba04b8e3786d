#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qsm {

// splitmix64 finalizer; the PRF behind every random stream in the library
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Key for an independent stream addressed by up to three coordinates.
// Streams with distinct (seed, a, b, c) are independent regardless of the
// order they are consumed in, which keeps ensembles thread-schedule invariant.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
  std::uint64_t k = mix64(seed ^ 0x6a09e667f3bcc909ull);
  k = mix64(k ^ (a + 0x9e3779b97f4a7c15ull));
  k = mix64(k ^ (b + 0xbb67ae8584caa73bull));
  k = mix64(k ^ (c + 0x3c6ef372fe94f82bull));
  return k;
}

// Counter-based generator: output i depends only on (key, i).
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ull * ++ctr_); }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1]
  double next_open() { return double((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // standard normal via Box-Muller, one draw per call (two uniforms consumed)
  double next_gaussian() {
    const double u1 = next_open();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // exact Bernoulli-sum binomial; intended for shot-noise scales (<= ~1e5 trials)
  long next_binomial(long trials, double p) {
    long hits = 0;
    for (long i = 0; i < trials; ++i)
      if (next_double() < p) ++hits;
    return hits;
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace qsm
