#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "gaussroots/error.hpp"
#include "gaussroots/quadrature.hpp"
#include "gaussroots/rng.hpp"
#include "gaussroots/spectral.hpp"

namespace gaussroots {

// Discrete-time spectral density on [−π, π], normalized so that Var Y_0 = ∫ p_Y dλ.
using LatticeDensity = std::function<double(double)>;

struct LatticeCovariance {
  double delta = 0.0;
  std::vector<double> gamma;        // γ_0..γ_kmax
  double sign_change_probability;   // P(Y_0 Y_1 < 0) = arccos(γ_1/γ_0)/π
};

// γ_k = δ⁻² ∫₀^δ∫₀^δ r(δk + t − s) ds dt, reduced to δ⁻¹∫_{−δ}^{δ} (1 − |u|/δ) r(δk + u) du.
inline LatticeCovariance average_discretize(const SpectralModel& model, double delta, int k_max) {
  if (!(delta > 0.0)) throw ValidationError("average_discretize: delta must be positive");
  if (k_max < 1) throw ValidationError("average_discretize: k_max must be >= 1");
  LatticeCovariance out;
  out.delta = delta;
  for (int k = 0; k <= k_max; ++k) {
    const double shift = delta * k;
    auto tri = [&](double u) { return (1.0 - std::abs(u) / delta) * covariance(model, shift + u); };
    const auto [left, e1] = adaptive_integrate(tri, -delta, 0.0, 1, 1e-14);
    const auto [right, e2] = adaptive_integrate(tri, 0.0, delta, 1, 1e-14);
    if (e1 + e2 > 1e-10 * delta) throw QuadratureError("average_discretize: no convergence", e1 + e2);
    out.gamma.push_back((left + right) / delta);
  }
  out.sign_change_probability = std::acos(std::clamp(out.gamma[1] / out.gamma[0], -1.0, 1.0)) / std::numbers::pi;
  return out;
}

// Fourier coefficients a_k = (2π)⁻¹∫√p_Y e^{−ikλ}dλ for |k| ≤ horizon by the trapezoid rule,
// stored as a[k + horizon]. With this normalization √p_Y(λ) = Σ a_k e^{ikλ}.
inline std::vector<double> sqrt_density_coefficients(const LatticeDensity& p_y, int horizon,
                                                     std::size_t grid = std::size_t{1} << 14) {
  if (horizon < 0) throw ValidationError("coefficient horizon must be >= 0");
  std::vector<double> root(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const double lam = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(grid);
    const double p = p_y(lam);
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("lattice density must be finite and nonnegative");
    root[i] = std::sqrt(p);
  }
  std::vector<double> a(static_cast<std::size_t>(2 * horizon + 1), 0.0);
  for (int k = 0; k <= horizon; ++k) {
    // p_Y is even, so a_k = a_{−k} is real
    double acc = 0.0;
    const double step = 2.0 * std::numbers::pi / static_cast<double>(grid);
    for (std::size_t i = 0; i < grid; ++i) {
      const double lam = -std::numbers::pi + step * static_cast<double>(i);
      acc += root[i] * std::cos(k * lam);
    }
    acc /= static_cast<double>(grid);
    a[static_cast<std::size_t>(horizon + k)] = acc;
    a[static_cast<std::size_t>(horizon - k)] = acc;
  }
  return a;
}

struct DiscretePath {
  std::vector<double> values;       // Y_0..Y_T
  double truncation_error = 0.0;    // 2π Σ_{|m| > truncation} a_m², the variance left out
  std::uint64_t seed = 0;
};

// Moving average Y_k = √(2π) Σ_{|m| ≤ truncation} a_m ξ_{k−m} with precomputed coefficients.
struct MovingAverage {
  int truncation = 0;
  std::vector<double> a;            // a_m, index m + truncation
  double variance = 0.0;            // ∫p_Y
  double truncation_error = 0.0;

  DiscretePath sample(int T, std::uint64_t seed) const {
    if (T < 1) throw ValidationError("sample_discrete: T must be >= 1");
    DiscretePath out;
    out.seed = seed;
    out.truncation_error = truncation_error;
    NormalStream normal(seed);
    const std::size_t n = static_cast<std::size_t>(T) + 1;
    const std::size_t M = static_cast<std::size_t>(truncation);
    std::vector<double> xi(n + 2 * M);
    for (double& v : xi) v = normal();
    const double scale = std::sqrt(2.0 * std::numbers::pi);
    out.values.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      // ξ_{k−m} lives at xi[k − m + M]
      double acc = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * xi[k + 2 * M - i];
      out.values[k] = scale * acc;
    }
    return out;
  }
};

inline MovingAverage build_moving_average(const LatticeDensity& p_y, int truncation) {
  if (truncation < 1) throw ValidationError("sample_discrete: truncation must be >= 1");
  MovingAverage ma;
  ma.truncation = truncation;
  ma.a = sqrt_density_coefficients(p_y, truncation);
  const std::size_t grid = std::size_t{1} << 14;
  double total = 0.0;
  for (std::size_t i = 0; i < grid; ++i)
    total += p_y(-std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(grid));
  ma.variance = total * 2.0 * std::numbers::pi / static_cast<double>(grid);
  double kept = 0.0;
  for (double v : ma.a) kept += v * v;
  // Parseval: ∫p_Y = 2π Σ_k a_k² over all k
  ma.truncation_error = std::max(0.0, ma.variance - 2.0 * std::numbers::pi * kept);
  return ma;
}

inline DiscretePath sample_discrete(const LatticeDensity& p_y, int T, std::uint64_t seed, int truncation) {
  return build_moving_average(p_y, truncation).sample(T, seed);
}

// Y = W^{(m)} + Z^{(m)} with W built from the Fejér-tapered coefficients of √p_Y.
struct MDependentSplit {
  int m = 0;
  int horizon = 0;
  std::vector<double> a;        // a_k, index k + horizon
  std::vector<double> a_m;      // (1 − |k|/(m−1))₊ a_k
  std::vector<double> lambda;   // evaluation grid on [−π, π]
  std::vector<double> p_y, p_w, p_z;
  std::vector<double> root_w;   // Σ a_k^{(m)} e^{ikλ} (real, may exceed √p_Y)
  std::vector<double> root_z;   // √p_Y − root_w, signed
  double eps_m = 0.0;           // sup_λ p_Z
  std::vector<double> w_covariance;  // Cov(W_0, W_n) = 2π Σ_k a_k^{(m)} a_{k+n}^{(m)}, n = 0..2m
  int dependence_range = 0;     // largest n with Cov(W_0, W_n) ≠ 0

  double coefficient(int k) const { return std::abs(k) > horizon ? 0.0 : a[static_cast<std::size_t>(k + horizon)]; }
  double tapered(int k) const { return std::abs(k) > horizon ? 0.0 : a_m[static_cast<std::size_t>(k + horizon)]; }
};

inline MDependentSplit m_dependent_split(const LatticeDensity& p_y, int m, int coeff_horizon = 512,
                                         std::size_t lambda_points = 4097) {
  if (m < 2) throw ValidationError("m_dependent_split: m must be >= 2");
  if (coeff_horizon < m) throw ValidationError("m_dependent_split: coefficient horizon must be >= m");
  MDependentSplit s;
  s.m = m;
  s.horizon = coeff_horizon;
  s.a = sqrt_density_coefficients(p_y, coeff_horizon);
  s.a_m.assign(s.a.size(), 0.0);
  for (int k = -coeff_horizon; k <= coeff_horizon; ++k) {
    const double taper = std::max(0.0, 1.0 - std::abs(k) / static_cast<double>(m - 1));
    s.a_m[static_cast<std::size_t>(k + coeff_horizon)] = taper * s.a[static_cast<std::size_t>(k + coeff_horizon)];
  }

  for (std::size_t i = 0; i < lambda_points; ++i) {
    const double lam = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(lambda_points - 1);
    double w = 0.0;
    for (int k = -(m - 1); k <= m - 1; ++k) w += s.tapered(k) * std::cos(k * lam);
    const double py = p_y(lam);
    const double rz = std::sqrt(py) - w;
    s.lambda.push_back(lam);
    s.p_y.push_back(py);
    s.root_w.push_back(w);
    s.root_z.push_back(rz);
    s.p_w.push_back(w * w);
    s.p_z.push_back(rz * rz);
    s.eps_m = std::max(s.eps_m, rz * rz);
  }

  for (int n = 0; n <= 2 * m; ++n) {
    double acc = 0.0;
    for (int k = -(m - 1); k <= m - 1; ++k) acc += s.tapered(k) * s.tapered(k + n);
    acc *= 2.0 * std::numbers::pi;
    s.w_covariance.push_back(acc);
    if (acc != 0.0) s.dependence_range = n;
  }
  return s;
}

}  // namespace gaussroots
