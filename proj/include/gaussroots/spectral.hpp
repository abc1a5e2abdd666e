#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gaussroots/error.hpp"
#include "gaussroots/quadrature.hpp"

namespace gaussroots {

using cplx = std::complex<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// sinh(u)/u, continuous at 0.
inline double sinhc(double u) {
  if (std::abs(u) < 1e-4) {
    const double u2 = u * u;
    return 1.0 + u2 / 6.0 + u2 * u2 / 120.0;
  }
  return std::sinh(u) / u;
}

enum class Family { band, gaussian, bilateral_exponential, tabulated };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::band: return "band";
    case Family::gaussian: return "gaussian";
    case Family::bilateral_exponential: return "bilateral_exponential";
    case Family::tabulated: return "tabulated";
  }
  return "unknown";
}

struct QuadratureSettings {
  double tolerance = 1e-12;      // relative agreement between successive refinements
  int max_doublings = 8;
  double tail_cutoff = 1e-17;    // truncate unbounded support where the weighted integrand drops below this
};

// Nodes on [0, L] with weights that already include the factor 2 p(λ), so that for an
// even integrand g, ∫ g dρ ≈ Σ w_i g(λ_i).
struct SpectralRule {
  std::vector<double> lambda;
  std::vector<double> weight;

  template <typename G>
  auto integrate(G&& g) const {
    using R = decltype(g(0.0));
    R acc{};
    for (std::size_t i = 0; i < lambda.size(); ++i) acc += weight[i] * g(lambda[i]);
    return acc;
  }
};

// A symmetric probability measure on ℝ with a density. Immutable after construction.
class SpectralModel {
 public:
  static SpectralModel band(double K = 1.0) {
    if (!(K > 0.0) || !std::isfinite(K)) throw ValidationError("band: K must be positive and finite");
    SpectralModel m(Family::band);
    m.band_k_ = K;
    return m;
  }

  static SpectralModel gaussian() { return SpectralModel(Family::gaussian); }

  static SpectralModel bilateral_exponential() {
    return SpectralModel(Family::bilateral_exponential);
  }

  // Tabulated density. If the grid only covers λ ≥ 0 it must start at 0 and is mirrored;
  // a two-sided grid must be symmetric and the density is symmetrized. Renormalized to mass 1.
  static SpectralModel tabulated(std::vector<double> lambda, std::vector<double> density) {
    if (lambda.size() != density.size() || lambda.size() < 2)
      throw ValidationError("tabulated: need at least two (lambda, density) pairs of equal length");
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      if (!std::isfinite(lambda[i]) || !std::isfinite(density[i]))
        throw ValidationError("tabulated: non-finite entry");
      if (density[i] < 0.0) throw ValidationError("tabulated: negative density");
      if (i > 0 && !(lambda[i] > lambda[i - 1]))
        throw ValidationError("tabulated: lambda must be strictly increasing");
    }
    auto table = std::make_shared<Table>();
    if (lambda.front() >= 0.0) {
      if (lambda.front() != 0.0)
        throw ValidationError("tabulated: one-sided grid must start at lambda = 0");
      table->lambda = std::move(lambda);
      table->density = std::move(density);
    } else {
      const std::size_t n = lambda.size();
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(lambda[i] + lambda[n - 1 - i]) > 1e-12 * std::max(1.0, std::abs(lambda[i])))
          throw ValidationError("tabulated: two-sided grid must be symmetric about 0");
      }
      const std::size_t start = n / 2;
      if (n % 2 == 0) {
        // no node at 0: insert one by linear interpolation of the symmetrized density
        table->lambda.push_back(0.0);
        const double a = 0.5 * (density[start - 1] + density[start]);
        table->density.push_back(a);
      }
      for (std::size_t i = start; i < n; ++i) {
        table->lambda.push_back(lambda[i]);
        table->density.push_back(0.5 * (density[i] + density[n - 1 - i]));
      }
    }
    double half_mass = 0.0;
    for (std::size_t i = 1; i < table->lambda.size(); ++i)
      half_mass += 0.5 * (table->density[i] + table->density[i - 1]) *
                   (table->lambda[i] - table->lambda[i - 1]);
    if (!(half_mass > 0.0)) throw ValidationError("tabulated: density has zero mass");
    for (double& p : table->density) p /= 2.0 * half_mass;
    SpectralModel m(Family::tabulated);
    m.table_ = std::move(table);
    return m;
  }

  // Two-column CSV (lambda, density); blank lines, '#' comments and a non-numeric header are skipped.
  static SpectralModel from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open spectral density file: " + path);
    std::vector<double> lam, dens;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::replace(line.begin(), line.end(), ',', ' ');
      std::istringstream row(line);
      double a = 0.0, b = 0.0;
      if (!(row >> a >> b)) {
        if (lam.empty()) continue;
        throw ValidationError("malformed row in " + path + ": " + line);
      }
      lam.push_back(a);
      dens.push_back(b);
    }
    return tabulated(std::move(lam), std::move(dens));
  }

  Family family() const { return family_; }
  double band_width() const { return band_k_; }
  const QuadratureSettings& quadrature() const { return quad_; }
  SpectralModel with_quadrature(QuadratureSettings q) const {
    SpectralModel m = *this;
    m.quad_ = q;
    return m;
  }

  std::string name() const {
    if (family_ == Family::band) {
      std::ostringstream os;
      os << "band(" << band_k_ << ")";
      return os.str();
    }
    return to_string(family_);
  }

  // Supremum of κ with ∫e^{κ|λ|}dρ < ∞ (the integral itself may diverge at the supremum).
  double kappa() const {
    return family_ == Family::bilateral_exponential ? 1.0 : kInf;
  }

  // Radius of the support (∞ for unbounded families).
  double support_radius() const {
    switch (family_) {
      case Family::band: return band_k_;
      case Family::tabulated: return table_->lambda.back();
      default: return kInf;
    }
  }

  double density(double lambda) const {
    const double a = std::abs(lambda);
    switch (family_) {
      case Family::band: return a <= band_k_ ? 0.5 / band_k_ : 0.0;
      case Family::gaussian: return std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
      case Family::bilateral_exponential: return 0.5 * std::exp(-a);
      case Family::tabulated: {
        const auto& L = table_->lambda;
        if (a > L.back()) return 0.0;
        const auto it = std::upper_bound(L.begin(), L.end(), a);
        if (it == L.end()) return table_->density.back();
        const std::size_t i = static_cast<std::size_t>(it - L.begin());
        const double t = (a - L[i - 1]) / (L[i] - L[i - 1]);
        return (1.0 - t) * table_->density[i - 1] + t * table_->density[i];
      }
    }
    return 0.0;
  }

  const std::vector<double>& table_lambda() const { return table_->lambda; }
  const std::vector<double>& table_density() const { return table_->density; }

  // Throws DivergenceError if an integrand growing like e^{growth |λ|} is not integrable.
  void require_growth(double growth, const char* what) const {
    if (growth < 0.0) throw ValidationError(std::string(what) + ": negative growth rate");
    if (family_ == Family::bilateral_exponential && growth >= 1.0)
      throw DivergenceError(std::string(what) + ": integrand grows like e^{" + std::to_string(growth) +
                            "|λ|}, not integrable against ½e^{-|λ|}");
  }

  // Truncation radius for integrands bounded by λ² e^{growth λ} (times the density).
  double truncation_radius(double growth) const {
    if (std::isfinite(support_radius())) return support_radius();
    require_growth(growth, "truncation");
    double L = 1.0;
    auto bound = [&](double l) { return density(l) * std::exp(growth * l) * std::max(1.0, l * l * l); };
    while (bound(L) > quad_.tail_cutoff) L += 0.5;
    // cosh/exp integrands overflow near λ ≈ 709/growth while the tail still matters
    if (growth * L > 700.0)
      throw QuadratureError("spectral tail not negligible before the integrand overflows", growth * L);
    return L;
  }

  // Quadrature rule on the half-line for integrands oscillating at frequency up to
  // `max_freq` and growing like e^{growth λ}. `refine` multiplies the panel count.
  SpectralRule rule(double max_freq, double growth, std::size_t refine = 1) const {
    SpectralRule out;
    const double freq = std::abs(max_freq) + growth + 1.0;
    auto append = [&](double a, double b, std::size_t panels, bool linear_density, double pa, double pb) {
      const auto q = composite_gauss_legendre(a, b, panels);
      for (std::size_t i = 0; i < q.size(); ++i) {
        const double l = q.nodes[i];
        double p = 0.0;
        if (linear_density) {
          const double t = (l - a) / (b - a);
          p = (1.0 - t) * pa + t * pb;
        } else {
          p = density(l);
        }
        out.lambda.push_back(l);
        out.weight.push_back(2.0 * p * q.weights[i]);
      }
    };
    if (family_ == Family::tabulated) {
      const auto& L = table_->lambda;
      const auto& P = table_->density;
      for (std::size_t i = 1; i < L.size(); ++i) {
        const double w = L[i] - L[i - 1];
        const auto panels = refine * std::max<std::size_t>(
                                         1, static_cast<std::size_t>(std::ceil(w * freq / std::numbers::pi)));
        append(L[i - 1], L[i], panels, true, P[i - 1], P[i]);
      }
      return out;
    }
    const double L = truncation_radius(growth);
    const auto panels = refine * std::max<std::size_t>(
                                     4, static_cast<std::size_t>(std::ceil(L * freq / std::numbers::pi)));
    append(0.0, L, panels, false, 0.0, 0.0);
    return out;
  }

  // ∫ g dρ for an even integrand g, refined until two successive panel doublings agree.
  template <typename G>
  double integrate_even(G&& g, double max_freq, double growth, double* error_out = nullptr) const {
    require_growth(growth, "integral");
    std::size_t refine = 1;
    double coarse = rule(max_freq, growth, refine).integrate(g);
    double err = kInf;
    for (int d = 0; d < quad_.max_doublings; ++d) {
      refine *= 2;
      const double fine = rule(max_freq, growth, refine).integrate(g);
      err = std::abs(fine - coarse);
      if (err <= quad_.tolerance * std::max(1.0, std::abs(fine))) {
        if (error_out) *error_out = err;
        return fine;
      }
      coarse = fine;
    }
    throw QuadratureError("spectral integral did not converge", err);
  }

 private:
  struct Table {
    std::vector<double> lambda;   // 0 = λ_0 < λ_1 < ... (half grid)
    std::vector<double> density;  // normalized so that the mirrored density has mass 1
  };

  explicit SpectralModel(Family f) : family_(f) {}

  Family family_;
  double band_k_ = 1.0;
  std::shared_ptr<const Table> table_;
  QuadratureSettings quad_{};
};

// "gaussian", "bilateral_exponential" (or "bilateral"), "band", "band(K)", "band:K",
// "csv:path" or any path ending in .csv.
inline SpectralModel parse_model(const std::string& spec) {
  if (spec == "gaussian") return SpectralModel::gaussian();
  if (spec == "bilateral_exponential" || spec == "bilateral") return SpectralModel::bilateral_exponential();
  if (spec == "band") return SpectralModel::band(1.0);
  auto number = [&](std::string s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ValidationError("bad band width in model spec: " + spec);
    return v;
  };
  if (spec.rfind("band(", 0) == 0 && spec.back() == ')') return SpectralModel::band(number(spec.substr(5, spec.size() - 6)));
  if (spec.rfind("band:", 0) == 0) return SpectralModel::band(number(spec.substr(5)));
  if (spec.rfind("csv:", 0) == 0) return SpectralModel::from_csv(spec.substr(4));
  if (spec.size() > 4 && spec.substr(spec.size() - 4) == ".csv") return SpectralModel::from_csv(spec);
  throw ValidationError("unknown model: " + spec);
}

// ---------------------------------------------------------------------------
// Covariances

inline cplx covariance_complex_quadrature(const SpectralModel& model, cplx z);

// r(z) = ∫cos(λz)dρ continued into the strip |Im z| < κ. Closed forms for the named
// families, quadrature for tabulated densities.
inline cplx covariance_complex(const SpectralModel& model, cplx z) {
  const double y = std::abs(z.imag());
  if (!(y < model.kappa()))
    throw DivergenceError("covariance continuation outside the strip |Im z| < kappa");
  switch (model.family()) {
    case Family::gaussian: return std::exp(-0.5 * z * z);
    case Family::bilateral_exponential: return 1.0 / (1.0 + z * z);
    case Family::band: {
      const cplx u = model.band_width() * z;
      if (std::abs(u) < 1e-4) return 1.0 - u * u / 6.0 + u * u * u * u / 120.0;
      return std::sin(u) / u;
    }
    case Family::tabulated: break;
  }
  return covariance_complex_quadrature(model, z);
}

// ∫cos(λz)dρ by quadrature for complex z: cos λx cosh λy − i sin λx sinh λy.
inline cplx covariance_complex_quadrature(const SpectralModel& model, cplx z) {
  const double x = z.real();
  const double y = z.imag();
  if (!(std::abs(y) < model.kappa()))
    throw DivergenceError("covariance continuation outside the strip |Im z| < kappa");
  const double re = model.integrate_even(
      [=](double l) { return std::cos(l * x) * std::cosh(l * y); }, x, std::abs(y));
  const double im = model.integrate_even(
      [=](double l) { return -std::sin(l * x) * std::sinh(l * y); }, x, std::abs(y));
  return {re, im};
}

// r(t) by direct quadrature of the spectral integral, regardless of family.
inline double covariance_quadrature(const SpectralModel& model, double t, double* error_out = nullptr) {
  return model.integrate_even([t](double l) { return std::cos(l * t); }, t, 0.0, error_out);
}

inline double covariance(const SpectralModel& model, double t) {
  if (model.family() == Family::tabulated) return covariance_quadrature(model, t);
  return covariance_complex(model, cplx(t, 0.0)).real();
}

struct SpectralMoments {
  double alpha;                 // expected zeros per unit length
  double second_moment;         // ∫λ²dρ
  double second_moment_quadrature;
  double minus_r2_fd;           // −r''(0) by central difference, step 1e-3
};

inline double second_moment(const SpectralModel& model) {
  switch (model.family()) {
    case Family::band: return model.band_width() * model.band_width() / 3.0;
    case Family::gaussian: return 1.0;
    case Family::bilateral_exponential: return 2.0;
    case Family::tabulated: break;
  }
  return model.integrate_even([](double l) { return l * l; }, 0.0, 0.0);
}

inline SpectralMoments kac_rice_alpha(const SpectralModel& model) {
  SpectralMoments m{};
  m.second_moment = second_moment(model);
  m.second_moment_quadrature = model.integrate_even([](double l) { return l * l; }, 0.0, 0.0);
  if (!std::isfinite(m.second_moment) || !(m.second_moment > 0.0))
    throw DivergenceError("second spectral moment is not finite and positive");
  const double h = 1e-3;
  m.minus_r2_fd = -(covariance(model, h) - 2.0 * covariance(model, 0.0) + covariance(model, -h)) / (h * h);
  m.alpha = std::sqrt(m.second_moment) / std::numbers::pi;
  return m;
}

// ∫e^{κ|λ|}dρ, +∞ when divergent.
inline double exp_moment(const SpectralModel& model, double kappa) {
  if (!(kappa >= 0.0)) throw ValidationError("exp_moment: kappa must be >= 0");
  if (kappa == 0.0) return 1.0;
  switch (model.family()) {
    case Family::band: {
      const double u = model.band_width() * kappa;
      return std::expm1(u) / u;
    }
    case Family::gaussian:
      return std::exp(0.5 * kappa * kappa) * (1.0 + std::erf(kappa / std::numbers::sqrt2));
    case Family::bilateral_exponential: return kappa < 1.0 ? 1.0 / (1.0 - kappa) : kInf;
    case Family::tabulated: break;
  }
  return model.integrate_even([kappa](double l) { return std::exp(kappa * l); }, 0.0, kappa);
}

inline void require_exp_moment(const SpectralModel& model, double kappa, const char* what) {
  if (!std::isfinite(exp_moment(model, kappa)))
    throw DivergenceError(std::string(what) + ": exponential moment diverges at kappa = " +
                          std::to_string(kappa));
}

// r(t; κ_o) = ∫cos(tλ)cosh(2κ_oλ)dρ = Re r(t + 2iκ_o).
inline double covariance_kappa(const SpectralModel& model, double t, double kappa_o) {
  if (!(kappa_o >= 0.0)) throw ValidationError("covariance_kappa: kappa_o must be >= 0");
  require_exp_moment(model, 2.0 * kappa_o, "covariance_kappa");
  return covariance_complex(model, cplx(t, 2.0 * kappa_o)).real();
}

inline double covariance_kappa_quadrature(const SpectralModel& model, double t, double kappa_o) {
  require_exp_moment(model, 2.0 * kappa_o, "covariance_kappa");
  return model.integrate_even(
      [=](double l) { return std::cos(t * l) * std::cosh(2.0 * kappa_o * l); }, t, 2.0 * kappa_o);
}

// r_ℓ(x;y) = ∫e^{−iλx}φ^ℓ(λy)dρ with φ(u) = sinh(u)/u. Real by evenness of ρ.
inline cplx r_ell(const SpectralModel& model, double x, double y, int ell) {
  if (ell != 1 && ell != 2) throw ValidationError("r_ell: ell must be 1 or 2");
  const double growth = ell * std::abs(y);
  model.require_growth(growth, "r_ell");
  const double re = model.integrate_even(
      [=](double l) {
        const double p = sinhc(l * y);
        return std::cos(l * x) * (ell == 1 ? p : p * p);
      },
      x, growth);
  return {re, 0.0};
}

// x-derivative of r_1: −∫λ sin(λx) φ(λy) dρ.
inline double r1_prime(const SpectralModel& model, double x, double y) {
  const double growth = std::abs(y);
  model.require_growth(growth, "r1_prime");
  return model.integrate_even([=](double l) { return -l * std::sin(l * x) * sinhc(l * y); }, x, growth);
}

// Second x-derivative of r_2: −∫λ² cos(λx) φ²(λy) dρ.
inline double r2_second(const SpectralModel& model, double x, double y) {
  const double growth = 2.0 * std::abs(y);
  model.require_growth(growth, "r2_second");
  return model.integrate_even(
      [=](double l) {
        const double p = sinhc(l * y);
        return -l * l * std::cos(l * x) * p * p;
      },
      x, growth);
}

// ---------------------------------------------------------------------------
// Assumption A: summability of |r|, |r_1'(·;2y)| and |r_2''(·;y)| along the lattice x⋆ℕ.

enum class AssumptionTerm { r = 0, r1prime = 1, r2second = 2 };

inline std::string to_string(AssumptionTerm t) {
  switch (t) {
    case AssumptionTerm::r: return "r";
    case AssumptionTerm::r1prime: return "r1prime";
    case AssumptionTerm::r2second: return "r2second";
  }
  return "unknown";
}

enum class Verdict { satisfied, fails, inconclusive };

struct AssumptionAOptions {
  int horizon = 20;           // k = 1..horizon
  int y_grid = 21;            // interior points of (−κ', κ')
  int truncation_factor = 10; // J_max = truncation_factor · horizon
  double threshold = 0.1;     // tail sums must fall below this at some k ≤ horizon
  double relative_increment = 0.01;
  double absolute_floor = 1e-12;  // tails below this count as numerically zero
};

struct TermBreakdown {
  AssumptionTerm term;
  std::vector<double> tail;   // tail[k-1] = sup_y Σ_{j=k}^{J_max} |term(j x⋆)|
  double last_increment = 0;  // sup_y |term(J_max x⋆)|
  bool truncation_ok = true;
  std::optional<int> first_k_below;
};

struct OmegaStarRow {
  int k;
  double omega_star;
};

struct AssumptionAReport {
  std::string model;
  double x_star = 0;
  double kappa_prime = 0;
  int horizon = 0;
  int j_max = 0;
  double threshold = 0;
  std::vector<double> y_values;
  std::vector<OmegaStarRow> omega_star_table;
  std::array<TermBreakdown, 3> terms;
  Verdict verdict = Verdict::inconclusive;
  std::optional<AssumptionTerm> failing_term;

  std::string verdict_string() const {
    switch (verdict) {
      case Verdict::satisfied: return "satisfied";
      case Verdict::fails: return "fails(" + to_string(*failing_term) + ")";
      case Verdict::inconclusive: return "inconclusive(truncation)";
    }
    return "unknown";
  }
};

// Uniform interior grid of n points on (−a, a); odd n includes 0.
inline std::vector<double> interior_grid(double a, int n) {
  std::vector<double> ys;
  ys.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ys.push_back(-a + 2.0 * a * (i + 1) / (n + 1));
  return ys;
}

namespace detail {

// Evaluates Σ_i w_i g(λ_i) e^{iλ_i j x⋆} for j = 1..jmax by phasor rotation; returns the
// cosine and sine moment tables of a fixed even weight h(λ).
inline void lattice_moments(const SpectralRule& rule, const std::vector<double>& h, double x_star,
                            int jmax, std::vector<double>& cos_out, std::vector<double>& sin_out) {
  cos_out.assign(static_cast<std::size_t>(jmax) + 1, 0.0);
  sin_out.assign(static_cast<std::size_t>(jmax) + 1, 0.0);
  for (std::size_t i = 0; i < rule.lambda.size(); ++i) {
    const double a = rule.weight[i] * h[i];
    const double th = rule.lambda[i] * x_star;
    const cplx step(std::cos(th), std::sin(th));
    cplx ph(1.0, 0.0);
    for (int j = 0; j <= jmax; ++j) {
      if (j % 64 == 0) ph = cplx(std::cos(th * j), std::sin(th * j));
      cos_out[static_cast<std::size_t>(j)] += a * ph.real();
      sin_out[static_cast<std::size_t>(j)] += a * ph.imag();
      ph *= step;
    }
  }
}

// For fixed y: r1'(j x⋆; 2y) and r2''(j x⋆; y) for j = 0..jmax on a validated rule.
inline void derivative_tables(const SpectralModel& model, double x_star, double y, int jmax,
                              std::vector<double>& r1p, std::vector<double>& r2s) {
  const double growth = 2.0 * std::abs(y);
  model.require_growth(growth, "assumption A");
  auto build = [&](std::size_t refine, std::vector<double>& a, std::vector<double>& b) {
    const SpectralRule rule = model.rule(jmax * x_star, growth, refine);
    std::vector<double> h1(rule.lambda.size()), h2(rule.lambda.size());
    for (std::size_t i = 0; i < rule.lambda.size(); ++i) {
      const double l = rule.lambda[i];
      const double p = sinhc(l * y);
      h1[i] = -l * sinhc(2.0 * l * y);
      h2[i] = -l * l * p * p;
    }
    std::vector<double> c, s;
    lattice_moments(rule, h1, x_star, jmax, c, s);
    a = s;  // r1' = −∫λ sin(λx)φ(2λy)
    lattice_moments(rule, h2, x_star, jmax, c, s);
    b = c;  // r2'' = −∫λ² cos(λx)φ²(λy)
  };
  std::vector<double> a1, b1, a2, b2;
  build(1, a1, b1);
  build(2, a2, b2);
  double err = 0.0, scale = 1.0;
  for (std::size_t j = 0; j < a1.size(); ++j) {
    err = std::max({err, std::abs(a1[j] - a2[j]), std::abs(b1[j] - b2[j])});
    scale = std::max({scale, std::abs(a2[j]), std::abs(b2[j])});
  }
  if (err > 1e-9 * scale) throw QuadratureError("assumption A lattice tables did not converge", err);
  r1p = std::move(a2);
  r2s = std::move(b2);
}

}  // namespace detail

inline AssumptionAReport omega_star(const SpectralModel& model, double x_star, double kappa_prime,
                                    const AssumptionAOptions& opt = {}) {
  if (!(x_star > 0.0)) throw ValidationError("omega_star: x_star must be positive");
  if (!(kappa_prime > 0.0) || !(kappa_prime < 0.5 * model.kappa()))
    throw ValidationError("omega_star: need 0 < kappa' < kappa/2");
  if (opt.horizon < 1 || opt.y_grid < 1 || opt.truncation_factor < 1)
    throw ValidationError("omega_star: horizon, y_grid and truncation factor must be positive");

  AssumptionAReport rep;
  rep.model = model.name();
  rep.x_star = x_star;
  rep.kappa_prime = kappa_prime;
  rep.horizon = opt.horizon;
  rep.j_max = opt.truncation_factor * opt.horizon;
  rep.threshold = opt.threshold;
  rep.y_values = interior_grid(kappa_prime, opt.y_grid);
  const int H = rep.horizon;
  const int J = rep.j_max;
  const auto Hs = static_cast<std::size_t>(H);

  // tails over k = 1..H of a per-j sequence
  auto tails = [&](const std::vector<double>& v) {
    std::vector<double> out(Hs, 0.0);
    double acc = 0.0;
    for (int j = J; j >= 1; --j) {
      acc += std::abs(v[static_cast<std::size_t>(j)]);
      if (j <= H) out[static_cast<std::size_t>(j - 1)] = acc;
    }
    return out;
  };

  std::vector<double> rv(static_cast<std::size_t>(J) + 1);
  for (int j = 0; j <= J; ++j) rv[static_cast<std::size_t>(j)] = covariance(model, j * x_star);

  for (int t = 0; t < 3; ++t) {
    rep.terms[static_cast<std::size_t>(t)].term = static_cast<AssumptionTerm>(t);
    rep.terms[static_cast<std::size_t>(t)].tail.assign(Hs, 0.0);
  }
  rep.terms[0].tail = tails(rv);
  rep.terms[0].last_increment = std::abs(rv.back());

  // every tabulated quantity is even in y
  std::vector<double> abs_y;
  for (double y : rep.y_values) {
    const double a = std::abs(y);
    if (std::none_of(abs_y.begin(), abs_y.end(), [a](double b) { return std::abs(a - b) < 1e-14; }))
      abs_y.push_back(a);
  }

  std::vector<double> sup_combined(Hs, 0.0);
  for (double y : abs_y) {
    std::vector<double> r1p, r2s;
    detail::derivative_tables(model, x_star, y, J, r1p, r2s);
    const auto t1 = tails(r1p);
    const auto t2 = tails(r2s);
    for (std::size_t k = 0; k < Hs; ++k) {
      rep.terms[1].tail[k] = std::max(rep.terms[1].tail[k], t1[k]);
      rep.terms[2].tail[k] = std::max(rep.terms[2].tail[k], t2[k]);
      sup_combined[k] = std::max(sup_combined[k], t1[k] + t2[k]);
    }
    rep.terms[1].last_increment = std::max(rep.terms[1].last_increment, std::abs(r1p.back()));
    rep.terms[2].last_increment = std::max(rep.terms[2].last_increment, std::abs(r2s.back()));
  }

  for (int k = 1; k <= H; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    rep.omega_star_table.push_back({k, rep.terms[0].tail[i] + sup_combined[i]});
  }

  bool any_fail = false, any_inconclusive = false;
  for (auto& term : rep.terms) {
    const double tail_h = term.tail.back();
    term.truncation_ok = tail_h <= opt.absolute_floor ||
                         term.last_increment <= opt.relative_increment * tail_h;
    for (int k = 1; k <= H; ++k) {
      if (term.tail[static_cast<std::size_t>(k - 1)] < opt.threshold) {
        term.first_k_below = k;
        break;
      }
    }
    if (!term.first_k_below) {
      if (!any_fail) rep.failing_term = term.term;
      any_fail = true;
    } else if (!term.truncation_ok) {
      any_inconclusive = true;
    }
  }
  rep.verdict = any_fail ? Verdict::fails : any_inconclusive ? Verdict::inconclusive : Verdict::satisfied;
  return rep;
}

}  // namespace gaussroots
