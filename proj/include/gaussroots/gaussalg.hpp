#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gaussroots/error.hpp"
#include "gaussroots/parallel.hpp"
#include "gaussroots/rng.hpp"
#include "gaussroots/spectral.hpp"

namespace gaussroots {

namespace detail {

inline void require_half_strip(const SpectralModel& model, double y, const char* what) {
  if (!(std::abs(y) < 0.5 * model.kappa()))
    throw ValidationError(std::string(what) + ": need |Im z| < kappa/2");
}

}  // namespace detail

// E[f(z) conj f(w)] = r(z − w̄) and E[f(z) f(w)] = r(z − w).
struct ComplexCov {
  cplx K;
  cplx pseudo;
};

inline ComplexCov complex_cov(const SpectralModel& model, cplx z, cplx w) {
  detail::require_half_strip(model, z.imag(), "complex_cov");
  detail::require_half_strip(model, w.imag(), "complex_cov");
  return {covariance_complex_quadrature(model, z - std::conj(w)), covariance_complex_quadrature(model, z - w)};
}

// Cov[(Re f(iy), Im f(iy)), (Re f(x+iy), Im f(x+iy))]; rr = E[Re f(iy) Re f(x+iy)] and so on.
struct ReImCov {
  double rr = 0, ri = 0, ir = 0, ii = 0;        // spectral integrals
  double rr_c = 0, ri_c = 0, ir_c = 0, ii_c = 0; // from r(x + 2iy) and r(x)
  double discrepancy = 0;
};

inline ReImCov reim_cov(const SpectralModel& model, double x, double y) {
  detail::require_half_strip(model, y, "reim_cov");
  const double g = 2.0 * std::abs(y);
  ReImCov c;
  c.rr = model.integrate_even([=](double l) { const double h = std::cosh(l * y); return std::cos(l * x) * h * h; }, x, g);
  c.ii = model.integrate_even([=](double l) { const double h = std::sinh(l * y); return std::cos(l * x) * h * h; }, x, g);
  c.ri = model.integrate_even([=](double l) { return -std::sin(l * x) * std::sinh(l * y) * std::cosh(l * y); }, x, g);
  c.ir = model.integrate_even([=](double l) { return std::sin(l * x) * std::sinh(l * y) * std::cosh(l * y); }, x, g);

  const cplx r2 = covariance_complex(model, cplx(x, 2.0 * y));
  const double r0 = covariance(model, x);
  c.rr_c = 0.5 * (r2.real() + r0);
  c.ii_c = 0.5 * (r2.real() - r0);
  c.ri_c = 0.5 * r2.imag();
  c.ir_c = -0.5 * r2.imag();
  c.discrepancy = std::max({std::abs(c.rr - c.rr_c), std::abs(c.ii - c.ii_c), std::abs(c.ri - c.ri_c),
                            std::abs(c.ir - c.ir_c)});
  if (c.discrepancy > 1e-8) throw QuadratureError("reim_cov: evaluation routes disagree", c.discrepancy);
  return c;
}

struct VMoments {
  double v_R = 1.0;
  double v_I = 0.0;
};

// v_R = ∫cosh²(λy)dρ, v_I = ∫λ²φ²(λy)dρ.
inline VMoments v_moments(const SpectralModel& model, double y) {
  detail::require_half_strip(model, y, "v_moments");
  const double g = 2.0 * std::abs(y);
  VMoments v;
  v.v_R = model.integrate_even([=](double l) { const double h = std::cosh(l * y); return h * h; }, 0.0, g);
  v.v_I = model.integrate_even([=](double l) { const double p = sinhc(l * y); return l * l * p * p; }, 0.0, g);
  if (!std::isfinite(v.v_I)) throw DivergenceError("v_moments: second moment diverges");
  return v;
}

inline double beta_y(const SpectralModel& model, double y) {
  return 2.0 / (covariance_complex(model, cplx(0.0, 2.0 * y)).real() + 1.0);
}

enum class CorrNorm { euclidean, l1 };

// Correlations of the standardized X = Re f/√v_R, Y = Im f/(y√v_I); first letter at x + iy,
// second at iy. Y keeps the sign of y so the formulas hold on both sides of the axis.
struct CorrVector {
  double rr = 1, ii = 1, ri = 0, ir = 0;

  double norm(CorrNorm n = CorrNorm::euclidean) const {
    if (n == CorrNorm::l1) return std::abs(rr) + std::abs(ii) + std::abs(ri) + std::abs(ir);
    return std::sqrt(rr * rr + ii * ii + ri * ri + ir * ir);
  }
};

namespace detail {

inline CorrVector corr_from_parts(double r_x, double r1p_2y, double r2s_y, double beta, const VMoments& v) {
  CorrVector c;
  c.ii = -r2s_y / v.v_I;
  c.ir = r1p_2y / std::sqrt(v.v_R * v.v_I);
  c.rr = (1.0 - beta) * c.ii + beta * r_x;
  c.ri = -c.ir;
  return c;
}

}  // namespace detail

inline CorrVector corr_vector(const SpectralModel& model, double x, double y) {
  detail::require_half_strip(model, y, "corr_vector");
  const VMoments v = v_moments(model, y);
  return detail::corr_from_parts(covariance(model, x), r1_prime(model, x, 2.0 * y), r2_second(model, x, y),
                                 beta_y(model, y), v);
}

struct OmegaTable {
  std::vector<double> omega;      // omega[k-1] = 4 sup_y Σ_{j=k}^{horizon} ‖r̂(j x⋆ + iy)‖
  double truncation_increment = 0; // 4 sup_y ‖r̂(horizon·x⋆ + iy)‖
  int horizon = 0;
  CorrNorm norm = CorrNorm::euclidean;

  double at(int k) const {
    if (k < 1) throw ValidationError("omega: k must be >= 1");
    return k > horizon ? 0.0 : omega[static_cast<std::size_t>(k - 1)];
  }
};

inline OmegaTable omega_table(const SpectralModel& model, double x_star, double kappa_prime, int horizon = 200,
                              int y_grid = 21, CorrNorm norm = CorrNorm::euclidean) {
  if (!(x_star > 0.0)) throw ValidationError("omega: x_star must be positive");
  if (!(kappa_prime > 0.0) || !(kappa_prime < 0.5 * model.kappa()))
    throw ValidationError("omega: need 0 < kappa' < kappa/2");
  if (horizon < 1 || y_grid < 1) throw ValidationError("omega: horizon and y_grid must be positive");
  OmegaTable out;
  out.horizon = horizon;
  out.norm = norm;
  out.omega.assign(static_cast<std::size_t>(horizon), 0.0);

  std::vector<double> rv(static_cast<std::size_t>(horizon) + 1);
  for (int j = 0; j <= horizon; ++j) rv[static_cast<std::size_t>(j)] = covariance(model, j * x_star);

  // ‖r̂‖ is even in y
  std::vector<double> abs_y;
  for (double y : interior_grid(kappa_prime, y_grid)) {
    const double a = std::abs(y);
    if (std::none_of(abs_y.begin(), abs_y.end(), [a](double b) { return std::abs(a - b) < 1e-14; }))
      abs_y.push_back(a);
  }
  for (double y : abs_y) {
    std::vector<double> r1p, r2s;
    detail::derivative_tables(model, x_star, y, horizon, r1p, r2s);
    const VMoments v = v_moments(model, y);
    const double beta = beta_y(model, y);
    double acc = 0.0;
    for (int j = horizon; j >= 1; --j) {
      const auto i = static_cast<std::size_t>(j);
      const double n = detail::corr_from_parts(rv[i], r1p[i], r2s[i], beta, v).norm(norm);
      if (j == horizon) out.truncation_increment = std::max(out.truncation_increment, 4.0 * n);
      acc += n;
      out.omega[i - 1] = std::max(out.omega[i - 1], 4.0 * acc);
    }
  }
  return out;
}

inline double omega(const SpectralModel& model, int k, double x_star, double kappa_prime, int horizon = 200,
                    int y_grid = 21, CorrNorm norm = CorrNorm::euclidean) {
  return omega_table(model, x_star, kappa_prime, horizon, y_grid, norm).at(k);
}

// Smallest k with ω(k) ≤ target, if any within the table.
inline std::optional<int> first_k_below(const OmegaTable& t, double target) {
  for (int k = 1; k <= t.horizon; ++k)
    if (t.at(k) <= target) return k;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Joint covariance of standardized (X_j, Y_j) at the points j x⋆ + iy.

struct CovBlocks {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd defect;         // I − Σ
  double s_norm = 0.0;            // max absolute row sum of the defect
  double min_eigenvalue = 1.0;
  std::vector<int> indices;       // lattice index of each block, ascending
  int block = 2;                  // 2 coordinates per index, 1 when y = 0
  double y = 0.0;
  double x_star = 1.0;

  Eigen::Index dim() const { return sigma.rows(); }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
      for (Eigen::Index j = 0; j < sigma.cols(); ++j) out << (j ? "," : "") << sigma(i, j);
      out << '\n';
    }
  }
};

inline double max_row_sum(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline CovBlocks make_cov_blocks(Eigen::MatrixXd sigma) {
  if (sigma.rows() != sigma.cols()) throw ValidationError("covariance must be square");
  CovBlocks c;
  c.sigma = 0.5 * (sigma + sigma.transpose());
  c.defect = Eigen::MatrixXd::Identity(c.sigma.rows(), c.sigma.cols()) - c.sigma;
  c.s_norm = max_row_sum(c.defect);
  if (c.sigma.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.sigma, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = es.eigenvalues().minCoeff();
  }
  if (c.min_eigenvalue < -1e-10)
    throw QuadratureError("joint covariance is not positive semidefinite", -c.min_eigenvalue);
  return c;
}

inline CovBlocks assemble_joint_cov(const SpectralModel& model, double y, std::vector<int> J, bool include_origin = true,
                                    double x_star = 1.0) {
  if (!(x_star > 0.0)) throw ValidationError("assemble_joint_cov: x_star must be positive");
  detail::require_half_strip(model, y, "assemble_joint_cov");
  for (int j : J)
    if (j < 1) throw ValidationError("assemble_joint_cov: indices must be positive");
  if (include_origin) J.push_back(0);
  std::sort(J.begin(), J.end());
  if (std::adjacent_find(J.begin(), J.end()) != J.end()) throw ValidationError("assemble_joint_cov: repeated index");

  const int b = y == 0.0 ? 1 : 2;
  const auto n = static_cast<Eigen::Index>(J.size()) * b;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(n, n);

  const VMoments v = v_moments(model, y);
  const double beta = beta_y(model, y);
  std::vector<std::optional<CorrVector>> cache(J.empty() ? 0 : static_cast<std::size_t>(J.back() - J.front()) + 1);
  auto corr = [&](int gap) -> const CorrVector& {
    auto& slot = cache[static_cast<std::size_t>(gap)];
    if (!slot) {
      const double x = gap * x_star;
      slot = detail::corr_from_parts(covariance(model, x), r1_prime(model, x, 2.0 * y), r2_second(model, x, y), beta, v);
    }
    return *slot;
  };

  for (std::size_t p = 0; p < J.size(); ++p) {
    for (std::size_t q = p + 1; q < J.size(); ++q) {
      const CorrVector& c = corr(J[q] - J[p]);
      const auto i = static_cast<Eigen::Index>(p) * b;
      const auto k = static_cast<Eigen::Index>(q) * b;
      sigma(i, k) = sigma(k, i) = c.rr;
      if (b == 2) {
        sigma(i + 1, k + 1) = sigma(k + 1, i + 1) = c.ii;
        sigma(i, k + 1) = sigma(k + 1, i) = c.ir;  // Cov(X_p, Y_q), Y_q at the later point
        sigma(i + 1, k) = sigma(k, i + 1) = c.ri;
      }
    }
  }
  CovBlocks out = make_cov_blocks(sigma);
  out.indices = J;
  out.block = b;
  out.y = y;
  out.x_star = x_star;
  return out;
}

// Factor L with LLᵀ = Σ after clipping eigenvalues in (−1e−10, 0) to zero.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  Eigen::VectorXd d = es.eigenvalues();
  if (d.minCoeff() < -1e-10) throw QuadratureError("covariance is not positive semidefinite", -d.minCoeff());
  d = d.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

struct ConditionalGaussian {
  Eigen::MatrixXd mean_map;   // Σ₁₂Σ₂₂⁻¹
  Eigen::MatrixXd cond_cov;   // Σ₁₁ − Σ₁₂Σ₂₂⁻¹Σ₂₁
  double condition_number = 1.0;
  std::vector<Eigen::Index> first, second;
};

inline Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                                 const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

inline ConditionalGaussian schur_condition(const Eigen::MatrixXd& sigma, std::vector<Eigen::Index> first,
                                           std::vector<Eigen::Index> second) {
  const Eigen::Index n = sigma.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (auto* part : {&first, &second})
    for (Eigen::Index i : *part) {
      if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)]) throw ValidationError("schur_condition: bad split");
      seen[static_cast<std::size_t>(i)] = true;
    }
  if (first.empty()) throw ValidationError("schur_condition: empty conditioned block");

  ConditionalGaussian c;
  c.first = first;
  c.second = second;
  const Eigen::MatrixXd s11 = submatrix(sigma, first, first);
  if (second.empty()) {
    c.mean_map = Eigen::MatrixXd::Zero(s11.rows(), 0);
    c.cond_cov = s11;
    return c;
  }
  const Eigen::MatrixXd s12 = submatrix(sigma, first, second);
  const Eigen::MatrixXd s22 = submatrix(sigma, second, second);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s22, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  c.condition_number = lo > 0.0 ? hi / lo : kInf;
  if (!(c.condition_number < 1e12)) throw SingularMatrixError("schur_condition: conditioning block is singular");
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s22);
  c.mean_map = ldlt.solve(s12.transpose()).transpose();
  c.cond_cov = s11 - c.mean_map * s12.transpose();
  c.cond_cov = 0.5 * (c.cond_cov + c.cond_cov.transpose());
  return c;
}

// Split (origin block | the rest), or (first block | the rest) without an origin.
inline ConditionalGaussian schur_condition(const CovBlocks& cov) {
  std::vector<Eigen::Index> a, b;
  for (Eigen::Index i = 0; i < cov.dim(); ++i) (i < cov.block ? a : b).push_back(i);
  return schur_condition(cov.sigma, a, b);
}

struct DiagDominanceReport {
  double omega = 0, hat0 = 1, hat1 = 0, hat2 = 0;
  double max_entry = 0;        // max |Σ₁₁ − Σ₁|₂| entry, bound ω̂₂
  double worst_mean_ratio = 0; // max ‖M z₂‖∞ / (ω̂₁‖z₂‖∞), bound 1
  double worst_density_gap = -kInf;  // max log f(z₂) − log bound, bound 0
  bool entries_ok = true, mean_ok = true, density_ok = true;
  std::size_t samples = 0;

  bool all_ok() const { return entries_ok && mean_ok && density_ok; }
};

// Log of the density of N(0, Σ) relative to the standard normal density at z.
inline double log_density_ratio(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& z) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * logdet + 0.5 * (z.squaredNorm() - z.dot(ldlt.solve(z)));
}

inline DiagDominanceReport check_diag_dominant(const CovBlocks& cov, const std::vector<Eigen::VectorXd>& z2_samples) {
  if (!(cov.s_norm < 1.0)) throw ValidationError("check_diag_dominant: need s_norm < 1");
  DiagDominanceReport rep;
  const double w = cov.s_norm;
  rep.omega = w;
  rep.hat0 = 1.0 / (1.0 - w);
  rep.hat1 = w * rep.hat0;
  rep.hat2 = w * w * rep.hat0;
  const double slack = 1e-12;

  const ConditionalGaussian cg = schur_condition(cov);
  const Eigen::MatrixXd s11 = submatrix(cov.sigma, cg.first, cg.first);
  const Eigen::MatrixXd s22 = submatrix(cov.sigma, cg.second, cg.second);
  rep.max_entry = (s11 - cg.cond_cov).cwiseAbs().maxCoeff();
  rep.entries_ok = rep.max_entry <= rep.hat2 + slack;

  const auto n2 = static_cast<double>(cg.second.size());
  for (const auto& z : z2_samples) {
    if (z.size() != s22.rows()) throw ValidationError("check_diag_dominant: conditioning vector has wrong size");
    ++rep.samples;
    const double zinf = z.size() ? z.cwiseAbs().maxCoeff() : 0.0;
    const double m = cg.mean_map.cols() ? (cg.mean_map * z).cwiseAbs().maxCoeff() : 0.0;
    if (m > rep.hat1 * zinf + slack) rep.mean_ok = false;
    if (zinf > 0.0 && rep.hat1 > 0.0) rep.worst_mean_ratio = std::max(rep.worst_mean_ratio, m / (rep.hat1 * zinf));
    if (s22.rows() > 0) {
      const double gap =
          log_density_ratio(s22, z) - (0.5 * n2 * std::log(rep.hat0) + 0.5 * rep.hat1 * z.squaredNorm());
      rep.worst_density_gap = std::max(rep.worst_density_gap, gap);
      if (gap > slack) rep.density_ok = false;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Second moments E∏|Z_ℓ|².

inline constexpr int kPermanentCap = 12;

// Ryser's formula with Gray-code subset updates.
inline cplx permanent(const Eigen::MatrixXcd& a) {
  const auto n = static_cast<int>(a.rows());
  if (a.cols() != a.rows()) throw ValidationError("permanent: matrix must be square");
  if (n > kPermanentCap) throw ValidationError("permanent: n exceeds 12");
  if (n == 0) return 1.0;
  std::vector<cplx> row_sum(static_cast<std::size_t>(n), 0.0);
  cplx total = 0.0;
  std::uint32_t gray = 0;
  for (std::uint32_t s = 1; s < (1u << n); ++s) {
    const std::uint32_t next = s ^ (s >> 1);
    const std::uint32_t flip = next ^ gray;
    const int col = std::countr_zero(flip);
    const double sign = (next & flip) ? 1.0 : -1.0;
    for (int i = 0; i < n; ++i) row_sum[static_cast<std::size_t>(i)] += sign * a(i, col);
    gray = next;
    cplx prod = 1.0;
    for (const cplx& v : row_sum) prod *= v;
    total += (std::popcount(gray) % 2 == n % 2) ? prod : -prod;
  }
  return total;
}

// Sum over perfect matchings of a symmetric 2n × 2n matrix, by dynamic programming over subsets.
inline cplx hafnian(const Eigen::MatrixXcd& a) {
  const auto m = static_cast<int>(a.rows());
  if (a.cols() != a.rows() || m % 2) throw ValidationError("hafnian: need an even square matrix");
  if (m > 20) throw ValidationError("hafnian: size exceeds 20");
  std::vector<cplx> h(std::size_t{1} << m, 0.0);
  h[0] = 1.0;
  for (std::uint32_t mask = 1; mask < (1u << m); ++mask) {
    if (std::popcount(mask) % 2) continue;
    const int i = std::countr_zero(mask);
    const std::uint32_t rest = mask ^ (1u << i);
    cplx acc = 0.0;
    for (std::uint32_t r = rest; r; r &= r - 1) {
      const int j = std::countr_zero(r);
      acc += a(i, j) * h[rest ^ (1u << j)];
    }
    h[mask] = acc;
  }
  return h.back();
}

struct WickMoment {
  double moment = 0;   // E∏|Z_ℓ|²
  double bound = 0;    // ∏_ℓ Σ_ℓ' |K(ℓ, ℓ')|
  int n = 0;
};

namespace detail {

inline double row_sum_bound(const Eigen::MatrixXcd& k) {
  double b = 1.0;
  for (Eigen::Index i = 0; i < k.rows(); ++i) b *= k.row(i).cwiseAbs().sum();
  return b;
}

inline void check_wick_bound(const WickMoment& w) {
  if (w.moment > w.bound + 1e-9 * std::max(1.0, w.bound))
    throw std::logic_error("second moment exceeds the row-sum product bound");
}

}  // namespace detail

// Circular complex Gaussian vector with covariance K = E[Z Z*]: the moment is perm(K).
inline WickMoment wick_second_moment(const Eigen::MatrixXcd& k) {
  WickMoment w;
  w.n = static_cast<int>(k.rows());
  w.moment = permanent(k).real();
  w.bound = detail::row_sum_bound(k);
  detail::check_wick_bound(w);
  return w;
}

// General complex Gaussian (covariance K, pseudo-covariance P = E[Z Zᵀ]): the moment is the
// hafnian of the pairing matrix of (Z, Z̄). Reduces to perm(K) when P = 0.
inline WickMoment wick_second_moment(const Eigen::MatrixXcd& k, const Eigen::MatrixXcd& p) {
  const Eigen::Index n = k.rows();
  if (k.cols() != n || p.rows() != n || p.cols() != n) throw ValidationError("wick_second_moment: shape mismatch");
  if (n > 10) throw ValidationError("wick_second_moment: n exceeds 10 with a pseudo-covariance");
  Eigen::MatrixXcd a(2 * n, 2 * n);
  a.topLeftCorner(n, n) = p;
  a.topRightCorner(n, n) = k;
  a.bottomLeftCorner(n, n) = k.transpose();
  a.bottomRightCorner(n, n) = p.conjugate();
  WickMoment w;
  w.n = static_cast<int>(n);
  w.moment = hafnian(a).real();
  w.bound = detail::row_sum_bound(k);
  // the row-sum product only bounds perm(K), so it is enforced only in the circular case
  if (p.cwiseAbs().maxCoeff() == 0.0) detail::check_wick_bound(w);
  return w;
}

// K and P for G = (f(z_1), ..., f(z_n)).
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> strip_covariance(const SpectralModel& model,
                                                                      const std::vector<cplx>& z) {
  const auto n = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXcd k(n, n), p(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a; b < n; ++b) {
      const ComplexCov c = complex_cov(model, z[static_cast<std::size_t>(a)], z[static_cast<std::size_t>(b)]);
      k(a, b) = c.K;
      k(b, a) = std::conj(c.K);
      p(a, b) = p(b, a) = c.pseudo;
    }
  return {k, p};
}

// Real 2n × 2n covariance of (Re Z, Im Z) from K and P.
inline Eigen::MatrixXd real_form(const Eigen::MatrixXcd& k, const Eigen::MatrixXcd& p) {
  const Eigen::Index n = k.rows();
  Eigen::MatrixXd s(2 * n, 2 * n);
  s.topLeftCorner(n, n) = 0.5 * (k + p).real();
  s.bottomRightCorner(n, n) = 0.5 * (k - p).real();
  s.topRightCorner(n, n) = 0.5 * (p - k).imag();
  s.bottomLeftCorner(n, n) = s.topRightCorner(n, n).transpose();
  return s;
}

// ---------------------------------------------------------------------------
// Fractional moments of |G_j| = |f(j x⋆ + iy)|.

// E|G_0(y)|^p with independent Re ~ N(0, v_R), Im ~ N(0, y²v_I).
inline double abs_moment(const SpectralModel& model, double y, double p) {
  const VMoments v = v_moments(model, y);
  const double a2 = v.v_R;
  const double b2 = y * y * v.v_I;
  if (b2 == 0.0) {
    if (!(p > -1.0)) throw DivergenceError("abs_moment: need p > -1 on the real axis");
    return std::pow(a2, 0.5 * p) * std::pow(2.0, 0.5 * p) * std::tgamma(0.5 * (1.0 + p)) / std::sqrt(std::numbers::pi);
  }
  if (!(p > -2.0)) throw DivergenceError("abs_moment: need p > -2");
  // angular mean of (a²cos²θ + b²sin²θ)^{p/2}; periodic and analytic, so the trapezoid rule converges fast
  auto mean = [&](std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double th = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      const double c = std::cos(th), sn = std::sin(th);
      s += std::pow(a2 * c * c + b2 * sn * sn, 0.5 * p);
    }
    return s / static_cast<double>(n);
  };
  std::size_t n = 64;
  double prev = mean(n);
  for (;;) {
    n *= 2;
    const double cur = mean(n);
    if (std::abs(cur - prev) <= 1e-14 * std::abs(cur)) return std::pow(2.0, 0.5 * p) * std::tgamma(1.0 + 0.5 * p) * cur;
    if (n > (std::size_t{1} << 22)) throw QuadratureError("abs_moment: angular quadrature did not converge", std::abs(cur - prev));
    prev = cur;
  }
}

struct MCEstimate {
  double mean = 0;
  double se = 0;
};

struct FracMomentResult {
  int m = 0;
  double eps = 0;
  MCEstimate positive;                    // E∏|G_jk|^ε
  std::optional<MCEstimate> negative;     // E∏|G_jk|^{−ε}
  double reference_positive = 1;          // (E|G_0|^{2ε})^{m/2}
  double reference_negative = 1;          // (E|G_0|^{−2ε})^{m/2}
  double single_moment = 1;               // E|G_0|^ε

  double ratio_positive() const { return positive.mean / reference_positive; }
  std::optional<double> ratio_negative() const {
    if (!negative) return std::nullopt;
    return negative->mean / reference_negative;
  }
};

struct FracMomentOptions {
  double x_star = 1.0;
  bool negative = false;
  unsigned workers = 1;
  std::size_t chunk = 1024;  // replicates per derived seed
};

namespace detail {

// Draws standardized vectors of `cov` and maps each to (|G_1|, ..., |G_n|).
class ModulusSampler {
 public:
  ModulusSampler(const CovBlocks& cov, const VMoments& v)
      : L_(psd_factor(cov.sigma)), b_(cov.block), sx_(std::sqrt(v.v_R)), sy_(cov.y * std::sqrt(v.v_I)) {}

  Eigen::Index size() const { return L_.rows() / b_; }

  void draw(NormalStream& normal, Eigen::VectorXd& xi, Eigen::VectorXd& g, std::vector<double>& mod) const {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal();
    g.noalias() = L_ * xi;
    for (Eigen::Index j = 0; j < size(); ++j) {
      const double re = sx_ * g[j * b_];
      const double im = b_ == 2 ? sy_ * g[j * b_ + 1] : 0.0;
      mod[static_cast<std::size_t>(j)] = std::hypot(re, im);
    }
  }

  Eigen::Index dim() const { return L_.rows(); }

 private:
  Eigen::MatrixXd L_;
  Eigen::Index b_;
  double sx_, sy_;
};

inline MCEstimate finish(double sum, double sum_sq, std::size_t n) {
  const double mean = sum / static_cast<double>(n);
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / static_cast<double>(n - 1)) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace detail

inline FracMomentResult frac_moment_mc(const SpectralModel& model, double y, int k, int m, double eps,
                                       std::size_t reps, std::uint64_t seed, const FracMomentOptions& opt = {}) {
  if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("frac_moment_mc: eps must lie in [0, 1)");
  if (k < 1 || m < 1) throw ValidationError("frac_moment_mc: k and m must be >= 1");
  if (reps < 2) throw ValidationError("frac_moment_mc: need at least 2 replicates");
  if (opt.negative) {
    if (eps >= 0.5) throw ValidationError("frac_moment_mc: negative moments need eps < 1/2 (infinite variance)");
    if (eps > 0.25 || reps < 100000)
      throw ValidationError("frac_moment_mc: negative moments are estimated only for eps <= 0.25 with reps >= 1e5");
  }
  std::vector<int> J;
  for (int j = 1; j <= m; ++j) J.push_back(j * k);
  const CovBlocks cov = assemble_joint_cov(model, y, J, false, opt.x_star);
  const VMoments v = v_moments(model, y);
  const detail::ModulusSampler sampler(cov, v);

  const std::size_t chunk = std::max<std::size_t>(1, opt.chunk);
  const std::size_t chunks = (reps + chunk - 1) / chunk;
  std::vector<std::array<double, 4>> part(chunks, {0, 0, 0, 0});
  parallel_for(chunks, opt.workers, [&](std::size_t c) {
    NormalStream normal(derive_seed(seed, c));
    Eigen::VectorXd xi(sampler.dim()), g(sampler.dim());
    std::vector<double> mod(static_cast<std::size_t>(sampler.size()));
    auto& acc = part[c];
    const std::size_t end = std::min(reps, (c + 1) * chunk);
    for (std::size_t r = c * chunk; r < end; ++r) {
      sampler.draw(normal, xi, g, mod);
      double lp = 0.0;
      for (double a : mod) lp += std::log(a);
      const double pos = eps == 0.0 ? 1.0 : std::exp(eps * lp);
      acc[0] += pos;
      acc[1] += pos * pos;
      if (opt.negative) {
        const double neg = eps == 0.0 ? 1.0 : std::exp(-eps * lp);
        acc[2] += neg;
        acc[3] += neg * neg;
      }
    }
  });
  std::array<double, 4> tot{0, 0, 0, 0};
  for (const auto& p : part)
    for (std::size_t i = 0; i < 4; ++i) tot[i] += p[i];

  FracMomentResult out;
  out.m = m;
  out.eps = eps;
  out.positive = detail::finish(tot[0], tot[1], reps);
  if (opt.negative) out.negative = detail::finish(tot[2], tot[3], reps);
  if (eps > 0.0) {
    out.single_moment = abs_moment(model, y, eps);
    out.reference_positive = std::pow(abs_moment(model, y, 2.0 * eps), 0.5 * m);
    if (opt.negative) out.reference_negative = std::pow(abs_moment(model, y, -2.0 * eps), 0.5 * m);
  }
  return out;
}

// E[|G_0|^{−4ε} | G_k, ..., G_mk] at random conditioning values drawn from their marginal law.
struct ConditionalMomentCheck {
  std::vector<MCEstimate> estimates;
  double max_mean = 0;
  double max_se = 0;
};

inline ConditionalMomentCheck conditional_negative_moment(const SpectralModel& model, double y, int k, int m,
                                                          double eps, std::size_t conditions, std::size_t draws,
                                                          std::uint64_t seed, double x_star = 1.0) {
  if (!(eps > 0.0 && eps <= 0.25)) throw ValidationError("conditional_negative_moment: eps must lie in (0, 0.25]");
  if (y == 0.0) throw ValidationError("conditional_negative_moment: y must be nonzero");
  std::vector<int> J;
  for (int j = 1; j <= m; ++j) J.push_back(j * k);
  const CovBlocks cov = assemble_joint_cov(model, y, J, true, x_star);
  const ConditionalGaussian cg = schur_condition(cov);
  const Eigen::MatrixXd l2 = psd_factor(submatrix(cov.sigma, cg.second, cg.second));
  const Eigen::MatrixXd l1 = psd_factor(cg.cond_cov);
  const VMoments v = v_moments(model, y);
  const double sx = std::sqrt(v.v_R), sy = y * std::sqrt(v.v_I);

  ConditionalMomentCheck out;
  out.estimates.resize(conditions);
  for (std::size_t c = 0; c < conditions; ++c) {
    NormalStream normal(derive_seed(seed, c));
    Eigen::VectorXd xi2(l2.cols());
    for (Eigen::Index i = 0; i < xi2.size(); ++i) xi2[i] = normal();
    const Eigen::VectorXd mu = cg.mean_map * (l2 * xi2);
    double s = 0.0, s2 = 0.0;
    Eigen::VectorXd xi(2);
    for (std::size_t d = 0; d < draws; ++d) {
      xi[0] = normal();
      xi[1] = normal();
      const Eigen::VectorXd z = mu + l1 * xi;
      const double val = std::pow(std::hypot(sx * z[0], sy * z[1]), -4.0 * eps);
      s += val;
      s2 += val * val;
    }
    out.estimates[c] = detail::finish(s, s2, draws);
    out.max_mean = std::max(out.max_mean, out.estimates[c].mean);
    out.max_se = std::max(out.max_se, out.estimates[c].se);
  }
  return out;
}

}  // namespace gaussroots
