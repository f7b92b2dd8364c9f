#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

// Portable draws on top of std::mt19937_64. The standard distributions are
// implementation-defined, which would tie file contents and training runs to
// one standard library.
namespace priornet::rng {

using Engine = std::mt19937_64;

inline double uniform01(Engine& e) { return double(e() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& e, double lo, double hi) { return lo + (hi - lo) * uniform01(e); }

// Unbiased integer in [0, n).
inline std::size_t index(Engine& e, std::size_t n) {
  const std::uint64_t bound = std::uint64_t(n);
  const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % bound);
  std::uint64_t x;
  do {
    x = e();
  } while (x >= limit);
  return std::size_t(x % bound);
}

// Box-Muller; one draw per call.
inline double normal(Engine& e, double mean = 0.0, double stddev = 1.0) {
  double u1 = uniform01(e);
  while (u1 <= 0.0) u1 = uniform01(e);
  const double u2 = uniform01(e);
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Derives an independent stream seed from a base seed and a stream id.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string save_state(const Engine& e);
void load_state(Engine& e, const std::string& state);

}  // namespace priornet::rng
