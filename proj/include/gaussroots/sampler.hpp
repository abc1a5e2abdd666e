#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gaussroots/error.hpp"
#include "gaussroots/quadrature.hpp"
#include "gaussroots/rng.hpp"
#include "gaussroots/spectral.hpp"

namespace gaussroots {

// Paired positive frequencies and weights, Σ 2 w_j = 1. The synthesized process
// X(t) = Σ_j √(2w_j) (ξ_j cos λ_j t + η_j sin λ_j t) has covariance r̃(t) = Σ_j 2 w_j cos λ_j t.
struct SynthesisScheme {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::string model;
  double kappa = kInf;          // strip half-width of the source model is kappa / 2
  double design_horizon = 0.0;
  double sup_error = 0.0;       // sup_{0 ≤ t ≤ design_horizon} |r̃(t) − r(t)|

  static SynthesisScheme from_nodes(std::vector<double> nodes, std::vector<double> weights,
                                    double kappa = kInf) {
    if (nodes.empty() || nodes.size() != weights.size())
      throw ValidationError("synthesis scheme: nodes and weights must be non-empty and paired");
    double mass = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (!(nodes[j] > 0.0) || !(weights[j] > 0.0))
        throw ValidationError("synthesis scheme: nodes and weights must be positive");
      mass += 2.0 * weights[j];
    }
    if (std::abs(mass - 1.0) > 1e-9) throw ValidationError("synthesis scheme: weights must satisfy sum 2w = 1");
    SynthesisScheme s;
    s.nodes = std::move(nodes);
    s.weights = std::move(weights);
    s.model = "custom";
    s.kappa = kappa;
    return s;
  }

  std::size_t size() const { return nodes.size(); }
  double lambda_max() const { return *std::max_element(nodes.begin(), nodes.end()); }

  // r̃(ζ) continued to complex arguments.
  cplx covariance(cplx z) const {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) acc += 2.0 * weights[j] * std::cos(nodes[j] * z);
    return acc;
  }
  double covariance(double t) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) acc += 2.0 * weights[j] * std::cos(nodes[j] * t);
    return acc;
  }
  double second_moment() const {
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) acc += 2.0 * weights[j] * nodes[j] * nodes[j];
    return acc;
  }
  // Zero intensity of the synthesized process.
  double alpha() const { return std::sqrt(second_moment()) / std::numbers::pi; }

  // Largest grid step that keeps eight samples per shortest oscillation.
  double nyquist_dt() const { return std::numbers::pi / (4.0 * lambda_max()); }
};

namespace detail {

// r̃(t_k) − r(t_k) on a uniform grid via phasor rotation per node.
inline double synthesis_sup_error(const SpectralModel& model, const SynthesisScheme& s, double horizon,
                                  std::size_t points = 10000) {
  if (!(horizon > 0.0)) return std::abs(s.covariance(0.0) - 1.0);
  const double h = horizon / static_cast<double>(points - 1);
  std::vector<double> approx(points, 0.0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double th = s.nodes[j] * h;
    const cplx step(std::cos(th), std::sin(th));
    cplx ph(1.0, 0.0);
    for (std::size_t k = 0; k < points; ++k) {
      if (k % 128 == 0) ph = cplx(std::cos(th * k), std::sin(th * k));
      approx[k] += 2.0 * s.weights[j] * ph.real();
      ph *= step;
    }
  }
  double err = 0.0;
  for (std::size_t k = 0; k < points; ++k)
    err = std::max(err, std::abs(approx[k] - covariance(model, h * static_cast<double>(k))));
  return err;
}

// Spectral mass and second moment beyond this radius are negligible for synthesis.
inline double synthesis_radius(const SpectralModel& model) {
  if (std::isfinite(model.support_radius())) return model.support_radius();
  double L = 1.0;
  while (model.density(L) * (1.0 + L * L) * (1.0 + L) > 1e-13) L += 0.25;
  return L;
}

}  // namespace detail

// Gauss-Legendre quadrature of ρ restricted to λ > 0 with n_nodes nodes (tabulated densities
// get n_nodes / cells nodes per grid cell).
inline SynthesisScheme build_synthesis(const SpectralModel& model, std::size_t n_nodes, double design_horizon) {
  if (n_nodes < 2) throw ValidationError("build_synthesis: need at least 2 nodes");
  if (!(design_horizon >= 0.0)) throw ValidationError("build_synthesis: design horizon must be >= 0");
  SynthesisScheme s;
  s.model = model.name();
  s.kappa = model.kappa();
  s.design_horizon = design_horizon;
  const double L = detail::synthesis_radius(model);
  QuadratureRule q;
  if (model.family() == Family::tabulated) {
    // keep the kinks of the interpolated density on panel edges
    const auto& grid = model.table_lambda();
    const std::size_t cells = grid.size() - 1;
    const std::size_t per_cell = std::max<std::size_t>(1, n_nodes / cells);
    const auto g = gauss_legendre(per_cell);
    for (std::size_t c = 0; c < cells; ++c) {
      const double a = grid[c], b = grid[c + 1];
      for (std::size_t i = 0; i < per_cell; ++i) {
        q.nodes.push_back(0.5 * (a + b) + 0.5 * (b - a) * g.nodes[i]);
        q.weights.push_back(0.5 * (b - a) * g.weights[i]);
      }
    }
  } else {
    auto g = gauss_legendre(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      q.nodes.push_back(0.5 * L * (1.0 + g.nodes[i]));
      q.weights.push_back(0.5 * L * g.weights[i]);
    }
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double w = q.weights[i] * model.density(q.nodes[i]);
    if (!(w > 0.0)) continue;
    s.nodes.push_back(q.nodes[i]);
    s.weights.push_back(w);
    mass += 2.0 * w;
  }
  for (double& w : s.weights) w /= mass;
  s.sup_error = detail::synthesis_sup_error(model, s, design_horizon);
  return s;
}

// Doubles the node count from `start` until sup_{[0, horizon]} |r̃ − r| < tolerance.
inline SynthesisScheme build_synthesis_auto(const SpectralModel& model, double horizon, double tolerance = 1e-6,
                                            std::size_t start = 256, std::size_t max_nodes = std::size_t{1} << 15) {
  for (std::size_t n = start;; n *= 2) {
    SynthesisScheme s = build_synthesis(model, n, horizon);
    if (s.sup_error < tolerance) return s;
    if (n >= max_nodes) throw QuadratureError("synthesis did not reach the covariance tolerance", s.sup_error);
  }
}

// Grid step: Nyquist guard capped at 0.05.
inline double default_dt(const SynthesisScheme& scheme) { return std::min(scheme.nyquist_dt(), 0.05); }

struct PathGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;
  std::uint64_t seed = 0;

  double t(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
  double length() const { return values.empty() ? 0.0 : dt * static_cast<double>(values.size() - 1); }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "t,value\n" << std::setprecision(17);
    for (std::size_t k = 0; k < values.size(); ++k) out << t(k) << ',' << values[k] << '\n';
  }
};

struct StripField {
  std::vector<cplx> points;
  std::vector<cplx> values;
  std::uint64_t seed = 0;  // shared with the PathGrid drawn from the same seed

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "re_z,im_z,re_f,im_f\n" << std::setprecision(17);
    for (std::size_t i = 0; i < points.size(); ++i)
      out << points[i].real() << ',' << points[i].imag() << ',' << values[i].real() << ','
          << values[i].imag() << '\n';
  }
};

// One draw of the Gaussian coefficients; evaluates the path on ℝ and its entire extension.
class Realization {
 public:
  Realization(const SynthesisScheme& scheme, std::uint64_t seed) : scheme_(&scheme), seed_(seed) {
    NormalStream normal(seed);
    a_.resize(scheme.size());
    b_.resize(scheme.size());
    for (std::size_t j = 0; j < scheme.size(); ++j) {
      const double amp = std::sqrt(2.0 * scheme.weights[j]);
      a_[j] = amp * normal();
      b_[j] = amp * normal();
    }
  }

  const SynthesisScheme& scheme() const { return *scheme_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& cos_coefficients() const { return a_; }
  const std::vector<double>& sin_coefficients() const { return b_; }

  double operator()(double t) const {
    double acc = 0.0;
    const auto& lam = scheme_->nodes;
    for (std::size_t j = 0; j < lam.size(); ++j) {
      const double th = lam[j] * t;
      acc += a_[j] * std::cos(th) + b_[j] * std::sin(th);
    }
    return acc;
  }

  // f(x+iy) = Σ a_j cos(λ_j z) + b_j sin(λ_j z); f(z̄) is the exact conjugate of f(z).
  cplx operator()(cplx z) const {
    const double x = z.real();
    const double ay = std::abs(z.imag());
    const double sgn = z.imag() < 0.0 ? -1.0 : 1.0;
    double re = 0.0, im = 0.0;
    const auto& lam = scheme_->nodes;
    for (std::size_t j = 0; j < lam.size(); ++j) {
      const double c = std::cos(lam[j] * x);
      const double s = std::sin(lam[j] * x);
      const double ch = std::cosh(lam[j] * ay);
      const double sh = std::sinh(lam[j] * ay);
      re += (a_[j] * c + b_[j] * s) * ch;
      im += (b_[j] * c - a_[j] * s) * sh;
    }
    return {re, sgn * im};
  }

  // Values on t_k = t0 + k dt, k = 0..n, by per-node phasor rotation.
  std::vector<double> grid_values(double t0, double dt, std::size_t n) const {
    std::vector<double> out(n + 1, 0.0);
    const auto& lam = scheme_->nodes;
    for (std::size_t j = 0; j < lam.size(); ++j) {
      const double th = lam[j] * dt;
      const cplx step(std::cos(th), std::sin(th));
      const cplx coef(a_[j], -b_[j]);  // Re(coef · e^{iλt}) = a cos λt + b sin λt
      cplx ph;
      for (std::size_t k = 0; k <= n; ++k) {
        if (k % 256 == 0) {
          const double arg = lam[j] * (t0 + dt * static_cast<double>(k));
          ph = cplx(std::cos(arg), std::sin(arg));
        }
        out[k] += (coef * ph).real();
        ph *= step;
      }
    }
    return out;
  }

 private:
  const SynthesisScheme* scheme_;
  std::uint64_t seed_;
  std::vector<double> a_, b_;
};

// Number of grid intervals covering [0, T] with step at most dt.
inline std::size_t grid_steps(double T, double dt) {
  return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

inline void check_nyquist(const SynthesisScheme& scheme, double dt) {
  if (!(dt > 0.0)) throw ValidationError("grid step must be positive");
  const double need = scheme.nyquist_dt();
  if (dt > need * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "grid step " << dt << " too coarse for lambda_max " << scheme.lambda_max() << "; need dt <= " << need;
    throw ValidationError(os.str());
  }
}

// X on [0, T]. The grid step is shrunk to T/ceil(T/dt) so the last sample lands on T.
inline PathGrid sample_real_path(const SynthesisScheme& scheme, double T, double dt, std::uint64_t seed) {
  if (!(T > 0.0)) throw ValidationError("sample_real_path: T must be positive");
  check_nyquist(scheme, dt);
  const std::size_t n = grid_steps(T, dt);
  PathGrid path;
  path.t0 = 0.0;
  path.dt = T / static_cast<double>(n);
  path.seed = seed;
  path.values = Realization(scheme, seed).grid_values(0.0, path.dt, n);
  return path;
}

inline void check_strip(double kappa, cplx z) {
  if (std::isfinite(kappa) && !(std::abs(z.imag()) < 0.5 * kappa)) {
    std::ostringstream os;
    os << "point " << z.real() << (z.imag() < 0 ? "" : "+") << z.imag() << "i outside the strip |Im z| < "
       << 0.5 * kappa;
    throw ValidationError(os.str());
  }
}

inline StripField sample_strip_field(const SynthesisScheme& scheme, const std::vector<cplx>& points,
                                     std::uint64_t seed) {
  for (const auto& z : points) check_strip(scheme.kappa, z);
  const Realization f(scheme, seed);
  StripField out;
  out.points = points;
  out.seed = seed;
  out.values.reserve(points.size());
  for (const auto& z : points) out.values.push_back(f(z));
  return out;
}

// n points on the circle |z − center| = radius, starting at angle 0.
inline std::vector<cplx> circle_points(cplx center, double radius, std::size_t n) {
  std::vector<cplx> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    pts.push_back(center + std::polar(radius, 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
  return pts;
}

}  // namespace gaussroots
