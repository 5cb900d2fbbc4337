#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sttc {

/// splitmix64 sequence generator. Used both as the documented seed-expansion
/// scheme and as the portable noise source for synthetic data, so identical
/// seeds give bit-identical output on every platform.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

 private:
  std::uint64_t state_;
};

/// lane-th sub-seed derived from a base seed: the (lane+1)-th splitmix64
/// output. Distinct lanes give independent streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t lane) {
  SplitMix64 g(base);
  std::uint64_t s = 0;
  for (std::uint64_t i = 0; i <= lane; ++i) s = g.next();
  return s;
}

/// Standard-normal draws via Box-Muller on splitmix64 uniforms.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : gen_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = gen_.uniform01();
    double u2 = gen_.uniform01();
    while (u1 <= 0.0) u1 = gen_.uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  SplitMix64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace sttc
