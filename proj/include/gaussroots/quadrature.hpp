#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace gaussroots {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }

  template <typename F>
  auto integrate(F&& f) const {
    using R = decltype(f(0.0));
    R acc{};
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(std::size_t n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / static_cast<double>(j);
      }
      dp = static_cast<double>(n) * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

inline constexpr std::size_t kPanelOrder = 20;

// The fixed per-panel rule used by all composite integrals.
inline const QuadratureRule& panel_rule() {
  static const QuadratureRule rule = gauss_legendre(kPanelOrder);
  return rule;
}

// Composite Gauss-Legendre on [a, b] with `panels` equal panels.
inline QuadratureRule composite_gauss_legendre(double a, double b, std::size_t panels) {
  const auto& base = panel_rule();
  QuadratureRule rule;
  rule.nodes.reserve(panels * base.size());
  rule.weights.reserve(panels * base.size());
  const double h = (b - a) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = a + (static_cast<double>(p) + 0.5) * h;
    for (std::size_t i = 0; i < base.size(); ++i) {
      rule.nodes.push_back(mid + 0.5 * h * base.nodes[i]);
      rule.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return rule;
}

// Integrate f over [a, b] with composite Gauss-Legendre, doubling the panel count
// until two successive estimates agree. Returns {value, error estimate}.
template <typename F>
std::pair<double, double> adaptive_integrate(F&& f, double a, double b, std::size_t panels = 4,
                                             double tol = 1e-13, std::size_t max_panels = 1 << 16) {
  auto eval = [&](std::size_t n) { return composite_gauss_legendre(a, b, n).integrate(f); };
  double coarse = eval(panels);
  double err = 0.0;
  while (true) {
    panels *= 2;
    const double fine = eval(panels);
    err = std::abs(fine - coarse);
    if (err <= tol * std::max(1.0, std::abs(fine)) || panels >= max_panels) return {fine, err};
    coarse = fine;
  }
}

}  // namespace gaussroots
