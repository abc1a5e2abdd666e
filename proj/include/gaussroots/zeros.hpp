#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "gaussroots/error.hpp"
#include "gaussroots/sampler.hpp"

namespace gaussroots {

// Adjacent strict sign flips (product < 0). Exact zeros never flip.
inline int count_sign_changes(std::span<const double> values) {
  int n = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k - 1] * values[k] < 0.0) ++n;
  return n;
}

struct ZeroReport {
  int count = 0;
  std::vector<double> locations;
  std::vector<std::size_t> flags;  // grid indices with |value| < 1e-12
};

namespace detail {

template <typename Eval>
double bisect_zero(Eval&& f, double a, double fa, double b, double width) {
  while (b - a > width) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

// One zero per sign-change cell, located by bisection on `eval` to width dt·2^{-refine_iters}.
template <typename Eval>
ZeroReport count_zeros_real(const PathGrid& path, int refine_iters, Eval&& eval) {
  ZeroReport rep;
  const auto& v = path.values;
  for (std::size_t k = 0; k < v.size(); ++k)
    if (std::abs(v[k]) < 1e-12) rep.flags.push_back(k);
  const double width = path.dt * std::ldexp(1.0, -std::max(0, refine_iters));
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k - 1] * v[k] < 0.0)) continue;
    ++rep.count;
    rep.locations.push_back(detail::bisect_zero(eval, path.t(k - 1), v[k - 1], path.t(k), width));
  }
  return rep;
}

// Without an evaluator, zeros are placed by linear interpolation inside each cell.
inline ZeroReport count_zeros_real(const PathGrid& path) {
  ZeroReport rep;
  const auto& v = path.values;
  for (std::size_t k = 0; k < v.size(); ++k)
    if (std::abs(v[k]) < 1e-12) rep.flags.push_back(k);
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (!(v[k - 1] * v[k] < 0.0)) continue;
    ++rep.count;
    rep.locations.push_back(path.t(k - 1) + path.dt * v[k - 1] / (v[k - 1] - v[k]));
  }
  return rep;
}

inline ZeroReport count_zeros_real(const PathGrid& path, int refine_iters, const Realization& x) {
  return count_zeros_real(path, refine_iters, [&x](double t) { return x(t); });
}

struct ContourOptions {
  double min_modulus_ratio = 1e-9;   // retry if min|f| < ratio · max|f| on the contour
  double max_step_angle = std::numbers::pi / 4;
  std::size_t max_nodes = std::size_t{1} << 16;
  double integer_tolerance = 0.1;
};

// Winding number of f around |z − center| = radius; counts zeros with multiplicity.
template <typename Field>
int count_zeros_disk(Field&& f, cplx center, double radius, std::size_t nodes = 256,
                     const ContourOptions& opt = {}) {
  if (!(radius > 0.0)) throw ValidationError("count_zeros_disk: radius must be positive");
  nodes = std::max<std::size_t>(nodes, 8);
  while (true) {
    std::vector<cplx> vals(nodes);
    double min_mod = kInf, max_mod = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      vals[i] = f(center + std::polar(radius, 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nodes)));
      const double m = std::abs(vals[i]);
      min_mod = std::min(min_mod, m);
      max_mod = std::max(max_mod, m);
    }
    if (!(max_mod > 0.0) || min_mod < opt.min_modulus_ratio * max_mod)
      throw ContourRetry("field nearly vanishes on the contour", min_mod);
    double total = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
      const double d = std::arg(vals[(i + 1) % nodes] / vals[i]);
      total += d;
      worst = std::max(worst, std::abs(d));
    }
    if (worst > opt.max_step_angle && nodes < opt.max_nodes) {
      nodes *= 2;
      continue;
    }
    const double w = total / (2.0 * std::numbers::pi);
    const double rounded = std::round(w);
    if (std::abs(w - rounded) > opt.integer_tolerance)
      throw QuadratureError("winding number is not integer-valued", std::abs(w - rounded));
    return static_cast<int>(rounded);
  }
}

struct JensenIntegral {
  double value = 0.0;
  double error = 0.0;   // difference between the last two trapezoid estimates
  std::size_t nodes = 0;
  bool converged = false;
};

struct JensenOptions {
  std::size_t initial_nodes = 256;
  std::size_t max_nodes = std::size_t{1} << 14;
  double tolerance = 1e-6;
};

// ∫_{−1/2}^{1/2} log|f(center + r e^{2πiθ})| dθ by the periodic trapezoid rule, doubling the
// node count (reusing earlier samples) until successive estimates agree.
template <typename Field>
JensenIntegral circle_log_mean(Field&& f, cplx center, double radius, const JensenOptions& opt = {}) {
  auto log_mod = [&](double theta) {
    const double m = std::abs(f(center + std::polar(radius, 2.0 * std::numbers::pi * theta)));
    if (!(m >= 1e-300)) throw ContourRetry("log|f| singular on the Jensen contour", m);
    return std::log(m);
  };
  std::size_t n = opt.initial_nodes;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += log_mod(static_cast<double>(i) / static_cast<double>(n) - 0.5);
  JensenIntegral out;
  out.value = sum / static_cast<double>(n);
  out.nodes = n;
  out.error = kInf;
  while (n < opt.max_nodes) {
    double add = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      add += log_mod((static_cast<double>(i) + 0.5) / static_cast<double>(n) - 0.5);
    sum += add;
    n *= 2;
    const double next = sum / static_cast<double>(n);
    out.error = std::abs(next - out.value);
    out.value = next;
    out.nodes = n;
    if (out.error < opt.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// Γ(β) for the ball of radius δe^β around the real point x_j.
template <typename Field>
JensenIntegral jensen_gamma(Field&& f, double x_j, double delta, double beta, const JensenOptions& opt = {}) {
  if (!(delta > 0.0)) throw ValidationError("jensen_gamma: delta must be positive");
  return circle_log_mean(f, cplx(x_j, 0.0), delta * std::exp(beta), opt);
}

struct JensenTriple {
  int lower = 0;          // N_f(B(δ))
  double mid = 0.0;       // (Γ(β) − Γ(0))/β
  int upper = 0;          // N_f(B(δe^β))
  std::size_t quadrature_nodes = 0;
  double tolerance = 0.0; // quadrature error bound on mid
  bool converged = false;
  double delta = 0.0;     // radius actually used after any retries
  int attempts = 1;

  bool holds() const { return lower <= mid + tolerance && mid <= upper + tolerance; }
};

struct RetryPolicy {
  int max_attempts = 5;
  double growth = 1e-3;
};

template <typename Field>
JensenTriple jensen_sandwich(Field&& f, double x_j, double delta, double beta, const RetryPolicy& retry = {},
                             const JensenOptions& opt = {}, double strip_half_width = kInf) {
  if (!(beta > 0.0)) throw ValidationError("jensen_sandwich: beta must be positive");
  if (!(delta > 0.0)) throw ValidationError("jensen_sandwich: delta must be positive");
  double d = delta;
  for (int attempt = 1;; ++attempt) {
    if (!(d * std::exp(beta) < strip_half_width))
      throw ValidationError("jensen_sandwich: outer ball leaves the strip");
    try {
      JensenTriple t;
      t.delta = d;
      t.attempts = attempt;
      t.lower = count_zeros_disk(f, cplx(x_j, 0.0), d);
      t.upper = count_zeros_disk(f, cplx(x_j, 0.0), d * std::exp(beta));
      const auto g0 = jensen_gamma(f, x_j, d, 0.0, opt);
      const auto gb = jensen_gamma(f, x_j, d, beta, opt);
      t.mid = (gb.value - g0.value) / beta;
      // rounding floor: an exact trapezoid sum still carries summation error
      const double floor = 1e-12 * (1.0 + std::abs(g0.value) + std::abs(gb.value));
      t.tolerance = (g0.error + gb.error + floor) / beta;
      t.quadrature_nodes = std::max(g0.nodes, gb.nodes);
      t.converged = g0.converged && gb.converged;
      return t;
    } catch (const ContourRetry&) {
      if (attempt >= retry.max_attempts) throw;
      d *= 1.0 + retry.growth;
    }
  }
}

// Zero count in a disk with the same radius-perturbation policy as the Jensen sandwich.
template <typename Field>
int count_zeros_disk_retry(Field&& f, cplx center, double radius, const RetryPolicy& retry = {},
                           double* radius_used = nullptr) {
  double r = radius;
  for (int attempt = 1;; ++attempt) {
    try {
      const int n = count_zeros_disk(f, center, r);
      if (radius_used) *radius_used = r;
      return n;
    } catch (const ContourRetry&) {
      if (attempt >= retry.max_attempts) throw;
      r *= 1.0 + retry.growth;
    }
  }
}

struct CoverCount {
  int total = 0;
  std::vector<int> per_ball;
  double delta = 0.0;
};

// Σ_j N_f(B_j(δ)) over n = ⌈T/(2δ)⌉ balls centred at x_j = (2j − 1)δ.
template <typename Field>
CoverCount cover_count(Field&& f, double T, double delta, const RetryPolicy& retry = {},
                       double strip_half_width = kInf) {
  if (!(T > 0.0) || !(delta > 0.0)) throw ValidationError("cover_count: T and delta must be positive");
  if (!(delta < strip_half_width)) throw ValidationError("cover_count: balls leave the strip");
  CoverCount out;
  out.delta = delta;
  const auto n = static_cast<std::size_t>(std::ceil(T / (2.0 * delta) - 1e-12));
  for (std::size_t j = 1; j <= n; ++j) {
    const double x = (2.0 * static_cast<double>(j) - 1.0) * delta;
    const int c = count_zeros_disk_retry(f, cplx(x, 0.0), delta, retry);
    out.per_ball.push_back(c);
    out.total += c;
  }
  return out;
}

}  // namespace gaussroots
