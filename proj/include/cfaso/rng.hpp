#pragma once

#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace cfaso {

// Stateless 64-bit mixer (splitmix64 finalizer). Used to derive independent
// substream seeds so that adding consumers never perturbs existing streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

// Standard complex normal vector: each entry CN(0,1), i.e. real and imaginary
// parts are independent N(0, 1/2).
inline Eigen::VectorXcd standard_complex_normal(int n, std::mt19937_64& rng) {
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    v(i) = std::complex<double>(re * kInvSqrt2, im * kInvSqrt2);
  }
  return v;
}

}  // namespace cfaso
