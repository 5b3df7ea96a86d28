#pragma once

#include <cmath>
#include <limits>

#include "torskew/errors.hpp"
#include "torskew/torus.hpp"

namespace torskew {

/// Branch switch for bessel_i0: power series at or below, asymptotic expansion above.
inline constexpr double kBesselSeam = 15.0;

/// I0(x) = sum_k (x^2/4)^k / (k!)^2. All terms positive, so summation is stable.
inline double bessel_i0_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

/// Series factor of the large-x expansion I0(x) ~ e^x / sqrt(2 pi x) * sum_k a_k / x^k,
/// truncated at the smallest term.
inline double bessel_i0_asymptotic_factor(double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double two_k_minus_1 = 2.0 * k - 1.0;
    const double next = term * two_k_minus_1 * two_k_minus_1 / (8.0 * k * x);
    if (next >= term) break;
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

inline double bessel_i0_asymptotic(double x) {
  return std::exp(x) / std::sqrt(kTwoPi * x) * bessel_i0_asymptotic_factor(x);
}

/// Modified Bessel function of the first kind, order zero.
inline double bessel_i0(double x) {
  if (!(x >= 0.0)) throw DomainError("bessel_i0: argument must be non-negative");
  if (x <= kBesselSeam) return bessel_i0_series(x);
  return bessel_i0_asymptotic(x);
}

/// log I0(x), finite for arguments where I0 itself overflows.
inline double log_bessel_i0(double x) {
  if (!(x >= 0.0)) throw DomainError("log_bessel_i0: argument must be non-negative");
  if (x <= kBesselSeam) return std::log(bessel_i0_series(x));
  return x - 0.5 * std::log(kTwoPi * x) + std::log(bessel_i0_asymptotic_factor(x));
}

}  // namespace torskew
