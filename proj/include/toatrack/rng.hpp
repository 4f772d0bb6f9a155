#pragma once

#include <cmath>
#include <cstdint>

namespace toatrack {

// Deterministic generators with a fixed cross-platform output sequence.
// Standard-library distributions are implementation-defined, which would
// break the byte-stable output contract, so the few draws we need are
// produced directly from splitmix64 bits.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [-1, 1).
  double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double gaussian() {
    double u1 = uniform01();
    double u2 = uniform01();
    // guard against log(0)
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Derives an independent stream, e.g. one per noise level.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t s = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    return splitmix64(s);
  }

 private:
  std::uint64_t state_;
};

}  // namespace toatrack
