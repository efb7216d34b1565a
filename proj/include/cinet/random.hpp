#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cinet {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent task seeds so parallel
// work never shares a generator.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Draws an index from unnormalized non-negative weights given as a running
// cumulative sum (cdf.back() is the total mass).
inline int sample_from_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = uniform01(rng) * cdf.back();
  const int n = static_cast<int>(cdf.size());
  for (int i = 0; i < n; ++i) {
    if (u < cdf[i]) return i;
  }
  return n - 1;
}

// Symmetric Dirichlet draw of the given dimension. Small concentrations are
// drawn in log space so that no component underflows the whole vector to 0.
std::vector<double> sample_dirichlet(Rng& rng, int dim, double concentration);

}  // namespace cinet
