#pragma once

#include <cstdint>

namespace osvos {

/// SplitMix64 generator. Every random decision in the project (scene
/// generation, weight init, data order) goes through this so that results
/// do not depend on the platform's standard library.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 bits of randomness.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  /// Approximately standard normal: scaled sum of four uniforms (Irwin-Hall).
  /// Uses only correctly rounded operations.
  double normal() {
    const double s = uniform() + uniform() + uniform() + uniform();
    return (s - 2.0) * 1.7320508075688772;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Order-dependent combination of a seed with a sub-stream key.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t key) {
    return mix(seed ^ mix(key + 0x9E3779B97F4A7C15ULL));
  }

 private:
  std::uint64_t state_;
};

}  // namespace osvos
