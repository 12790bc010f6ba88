#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lidarnav {

// Seeded random source with hand-rolled distributions so that streams are
// reproducible bit-for-bit independent of the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // inclusive bounds, rejection sampling to stay unbiased
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Box-Muller, cosine branch; consumes two uniforms per call
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Derive an independent child stream (splitmix64 of seed ^ stream tag).
  Rng split(std::uint64_t stream) const {
    std::uint64_t z = seed_ + (stream + 1) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace lidarnav
