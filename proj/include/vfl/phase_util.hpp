#pragma once
#include <cmath>
#include <complex>

#include "vfl/support.hpp"

namespace vfl {

// phi1(z) = (e^z - 1)/z and phi2(z) = (e^z (z-1) + 1)/z^2 for purely
// imaginary z, stable near z = 0. They are the first two moments
// int_0^1 e^{z v} dv and int_0^1 v e^{z v} dv used by the oscillatory
// panel quadrature.
inline Cplx phi1(Cplx z) {
  if (std::abs(z) < 1e-2) {
    Cplx acc{1.0 / 5040.0, 0.0};
    const double inv_fact[] = {1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720};
    for (int n = 5; n >= 0; --n) acc = acc * z + inv_fact[n];
    return acc;
  }
  const double zeta = z.imag();
  const double si = std::sin(0.5 * zeta);
  const Cplx em1{-2.0 * si * si, std::sin(zeta)};  // e^z - 1 without cancellation
  return em1 / z;
}

inline Cplx phi2(Cplx z) {
  if (std::abs(z) < 1e-2) {
    Cplx acc{7.0 / 40320.0, 0.0};
    const double coef[] = {1.0 / 2, 1.0 / 3, 1.0 / 8, 1.0 / 30, 1.0 / 144, 1.0 / 840};
    for (int n = 5; n >= 0; --n) acc = acc * z + coef[n];
    return acc;
  }
  return (phi1(z) * (z - 1.0) + 1.0) / z;
}

// Unit complex e^{i theta} with the argument reduced in extended precision;
// keeps ~1e-11 rad accuracy for quadratic phases of order 1e7 rad.
inline Cplx cis_reduced(long double theta) {
  constexpr long double two_pi = 6.28318530717958647692528676655900577L;
  long double r = std::fmod(theta, two_pi);
  return Cplx(static_cast<double>(std::cos(r)), static_cast<double>(std::sin(r)));
}

}  // namespace vfl
