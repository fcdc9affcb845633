#pragma once

// Test-only reference computations. Nothing here calls into the library's
// CDF or sampling code, so they can be used to check it.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace oracle {

// Values computed offline with scipy.stats / scipy.optimize.brentq (xtol 1e-14).
inline constexpr double kGaussianKAt1 = 0.7330324713371961;   // k(1), sigma = 1
inline constexpr double kLaplaceKAt1 = 0.6997882004468641;    // k(1), scale = 1
inline constexpr double kKappa_1p1_0p8 = 0.7007094893516932;  // ln(1/0.8)/ln(1.1/0.8)
inline constexpr double kKappa_1p2_0p9 = 0.3662394210382578;
inline constexpr double kLambda_1p1_0p8 = 0.427124957199046;
inline constexpr double kTanh1 = 0.7615941559557649;
inline constexpr double kThreeZerosSupDeriv = 0.8570864785345167;  // 2e6-point grid on [-4, 4]
// sup{|z| : k(z) <= kappa(1.1, d)} for Gaussian(0.1), d = 0.5, 0.7, 0.8, 0.88.
inline constexpr double kBoundary[4] = {0.15171360285550947, 0.11760719223156971, 0.09031926465254585,
                                        0.049836371825674276};

enum class Family { Gaussian, Uniform, Laplace };

/// Monte Carlo estimate of P((z1 + e1)(z2 + e2) > 0) with the standard
/// library's own engine and distributions.
inline double crossing_mc(Family family, double scale, double z1, double z2, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::uniform_real_distribution<double> uniform(-scale, scale);
  std::exponential_distribution<double> expo(1.0 / scale);
  std::bernoulli_distribution coin(0.5);
  const auto draw = [&]() -> double {
    switch (family) {
      case Family::Gaussian:
        return normal(eng);
      case Family::Uniform:
        return uniform(eng);
      case Family::Laplace:
        return coin(eng) ? expo(eng) : -expo(eng);
    }
    return 0.0;
  };
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z1 + draw();
    const double b = z2 + draw();
    if (a * b > 0) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(n);
}

/// Closed-form k(z) for the symmetric continuous families via long double.
inline long double crossing_exact(Family family, long double scale, long double z) {
  long double a = 0;  // P(z + xi > 0) = F(z) by symmetry
  switch (family) {
    case Family::Gaussian:
      a = 0.5L * std::erfc(-z / (scale * std::sqrt(2.0L)));
      break;
    case Family::Uniform:
      a = z <= -scale ? 0.0L : z >= scale ? 1.0L : (z + scale) / (2 * scale);
      break;
    case Family::Laplace:
      a = z < 0 ? 0.5L * std::exp(z / scale) : 1.0L - 0.5L * std::exp(-z / scale);
      break;
  }
  return a * a + (1 - a) * (1 - a);
}

}  // namespace oracle
