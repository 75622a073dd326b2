#pragma once

#include "hierts/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace hierts {

/// Seeded random source. Wraps std::mt19937_64 but generates uniforms and
/// normals itself, because the std distribution algorithms are
/// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double low, double high) { return low + (high - low) * uniform01(); }

  /// Standard normal via the Marsaglia polar method (pairs, one cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0, v = 0.0, s = 0.0;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  /// Uniform index in [0, n); rejection sampling avoids modulo bias.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw EmptyPool("uniform_index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % n);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Roles of the per-run random streams. Every consumer of randomness in a
/// simulation run owns a stream derived from (base_seed, run_index, role), so
/// adding or removing agents never perturbs the environment, context, or
/// reward draws of a comparison.
enum class StreamRole : std::uint64_t {
  Env = 1,      ///< environment parameter draw (Psi*, Theta*)
  Context = 2,  ///< per-round context draws
  Reward = 3,   ///< per-round reward noise
  Agent = 4,    ///< agent-internal posterior sampling
  Weights = 5,  ///< per-run mixing-weight resampling
  Subset = 6,   ///< per-run action-subset selection
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t run_index,
                                 StreamRole role) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ run_index);
  h = splitmix64(h ^ static_cast<std::uint64_t>(role));
  return h;
}

inline Rng derive_stream(std::uint64_t base_seed, std::uint64_t run_index, StreamRole role) {
  return Rng(derive_seed(base_seed, run_index, role));
}

}  // namespace hierts
