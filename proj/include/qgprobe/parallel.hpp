#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace qgprobe {

/// Selects the OpenMP kernel or the serial reference path of a kernel.
/// Both paths produce results that are independent of the thread count.
enum class Execution { Serial, Parallel };

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream seed for a (base seed, index path) pair, e.g. (seed, {series, cycle}).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(base);
  for (auto v : path) h = mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

/// Complex Gaussian with E|z|^2 = 1.
inline std::complex<double> complex_normal(Rng& rng, std::normal_distribution<double>& n01) {
  constexpr double kHalf = 0.70710678118654752440;
  const double re = n01(rng);
  const double im = n01(rng);
  return {kHalf * re, kHalf * im};
}

}  // namespace qgprobe
