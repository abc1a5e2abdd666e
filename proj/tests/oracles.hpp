#pragma once

// Independent reference computations shared by the test suites.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

// Adaptive Gauss-Kronrod on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol);
}

inline double gaussian_density(double l) { return std::exp(-0.5 * l * l) / std::sqrt(2.0 * std::numbers::pi); }
inline double bilateral_density(double l) { return 0.5 * std::exp(-std::abs(l)); }

// ∫ g dρ for even g, over the half-line truncated where the density is negligible.
inline double gaussian_expect(const std::function<double(double)>& g) {
  return 2.0 * integrate([&](double l) { return g(l) * gaussian_density(l); }, 0.0, 40.0);
}
inline double bilateral_expect(const std::function<double(double)>& g, double upper = 200.0) {
  double total = 0.0;
  for (double a = 0.0; a < upper; a += 5.0)
    total += integrate([&](double l) { return g(l) * bilateral_density(l); }, a, a + 5.0);
  return 2.0 * total;
}
inline double band_expect(const std::function<double(double)>& g, double K = 1.0) {
  return 2.0 * integrate([&](double l) { return g(l) * 0.5 / K; }, 0.0, K);
}

inline double sinhc(double u) { return u == 0.0 ? 1.0 : std::sinh(u) / u; }

}  // namespace oracle
