#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lmdnn::rng {

using Engine = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  return mix(seed ^ mix(stream));
}

/// Uniform in [0,1) with exactly 53 random bits. std::uniform_real_distribution
/// is implementation-defined, so draws are mapped by hand to keep results
/// reproducible across standard libraries.
inline double uniform_unit(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(eng);
}

/// Standard normal via Box-Muller (deterministic, no distribution state).
inline double normal(Engine& eng) {
  double u1 = 1.0 - uniform_unit(eng);  // (0,1]
  double u2 = uniform_unit(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace lmdnn::rng
