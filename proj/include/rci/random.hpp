#pragma once
// Portable seeded sampling helpers. std::mt19937_64 output is fixed by the
// standard, the std distributions are not, so draws go through these.

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace rci {

using Rng = std::mt19937_64;

// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller standard normal.
inline double standard_normal(Rng& rng) {
  double u1 = uniform_unit(rng);
  while (u1 <= 0.0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
  }
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[uniform_index(rng, v.size())];
}

}  // namespace rci
