#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gaussroots/spectral.hpp"
#include "oracles.hpp"

using namespace gaussroots;
constexpr double pi = std::numbers::pi;

TEST(Covariance, NormalizedAtZero) {
  EXPECT_DOUBLE_EQ(covariance(SpectralModel::gaussian(), 0.0), 1.0);
  EXPECT_NEAR(covariance_quadrature(SpectralModel::gaussian(), 0.0), 1.0, 1e-12);
}

TEST(Covariance, BilateralAtOne) {
  const auto m = SpectralModel::bilateral_exponential();
  EXPECT_NEAR(covariance(m, 1.0), 0.5, 1e-15);
  EXPECT_NEAR(oracle::bilateral_expect([](double l) { return std::cos(l); }), 0.5, 1e-10);
  EXPECT_NEAR(covariance_quadrature(m, 1.0), 0.5, 1e-10);
}

TEST(Covariance, BandVanishesAtPi) {
  const auto m = SpectralModel::band(1.0);
  EXPECT_NEAR(covariance(m, pi), 0.0, 1e-15);
  EXPECT_NEAR(oracle::band_expect([](double l) { return std::cos(pi * l); }), 0.0, 1e-13);
  EXPECT_NEAR(covariance_quadrature(m, pi), 0.0, 1e-12);
}

TEST(Covariance, ClosedFormMatchesQuadrature) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::band(2.5),
                        SpectralModel::bilateral_exponential()}) {
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double t = u(gen);
      worst = std::max(worst, std::abs(covariance(m, t) - covariance_quadrature(m, t)));
    }
    EXPECT_LT(worst, 1e-8) << m.name();
  }
}

TEST(Covariance, EvenAndBounded) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()}) {
    for (int i = 0; i < 200; ++i) {
      const double t = u(gen);
      EXPECT_EQ(covariance(m, t), covariance(m, -t));
      EXPECT_LE(std::abs(covariance(m, t)), 1.0);
    }
  }
}

TEST(Covariance, GaussianMatchesOracleOffAxis) {
  const auto m = SpectralModel::gaussian();
  for (double y : {0.1, 0.4, 1.5})
    for (double x : {0.0, 0.7, 3.0}) {
      const cplx z(x, y);
      const double re = oracle::gaussian_expect([&](double l) { return std::cos(l * x) * std::cosh(l * y); });
      const double im = oracle::gaussian_expect([&](double l) { return -std::sin(l * x) * std::sinh(l * y); });
      EXPECT_NEAR(covariance_complex(m, z).real(), re, 1e-10);
      EXPECT_NEAR(covariance_complex(m, z).imag(), im, 1e-10);
      EXPECT_NEAR(std::abs(covariance_complex_quadrature(m, z) - covariance_complex(m, z)), 0.0, 1e-10);
    }
}

TEST(Covariance, StripViolationThrows) {
  EXPECT_THROW(covariance_complex(SpectralModel::bilateral_exponential(), cplx(0.0, 1.0)), DivergenceError);
}

TEST(KacRice, NamedFamilies) {
  const auto g = kac_rice_alpha(SpectralModel::gaussian());
  EXPECT_NEAR(g.alpha, 1.0 / pi, 1e-12);
  EXPECT_NEAR(g.alpha, 0.3183099, 5e-8);
  const auto b = kac_rice_alpha(SpectralModel::band(1.0));
  EXPECT_NEAR(b.alpha, 1.0 / (pi * std::sqrt(3.0)), 1e-12);
  EXPECT_NEAR(b.alpha, 0.1837763, 5e-8);
  const auto e = kac_rice_alpha(SpectralModel::bilateral_exponential());
  EXPECT_NEAR(e.alpha, std::sqrt(2.0) / pi, 1e-12);
  EXPECT_NEAR(e.alpha, 0.4501582, 5e-8);
}

TEST(KacRice, SecondMomentOracles) {
  EXPECT_NEAR(oracle::gaussian_expect([](double l) { return l * l; }), 1.0, 1e-12);
  EXPECT_NEAR(oracle::band_expect([](double l) { return l * l; }), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(oracle::bilateral_expect([](double l) { return l * l; }), 2.0, 1e-10);
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()}) {
    const auto s = kac_rice_alpha(m);
    EXPECT_NEAR(s.second_moment_quadrature, s.second_moment, 1e-10 * s.second_moment) << m.name();
    EXPECT_NEAR(s.minus_r2_fd / s.second_moment, 1.0, 1e-4) << m.name();
  }
}

TEST(ExpMoment, Values) {
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()})
    EXPECT_NEAR(exp_moment(m, 0.0), 1.0, 1e-12);
  EXPECT_NEAR(exp_moment(SpectralModel::band(1.0), 1.0), std::numbers::e - 1.0, 1e-12);
  EXPECT_NEAR(exp_moment(SpectralModel::bilateral_exponential(), 0.5), 2.0, 1e-10);
  EXPECT_TRUE(std::isinf(exp_moment(SpectralModel::bilateral_exponential(), 1.0)));
  EXPECT_THROW(exp_moment(SpectralModel::gaussian(), -1.0), ValidationError);
}

TEST(CovarianceKappa, ReducesToCovariance) {
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()})
    for (double t : {0.0, 0.5, 2.0, 7.0}) EXPECT_NEAR(covariance_kappa(m, t, 0.0), covariance(m, t), 1e-14);
}

TEST(CovarianceKappa, GaussianClosedForm) {
  const auto m = SpectralModel::gaussian();
  EXPECT_NEAR(covariance_kappa(m, 0.0, 0.5), std::exp(0.5), 1e-12);
  EXPECT_NEAR(covariance_kappa(m, 0.0, 0.5), 1.6487213, 5e-8);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ut(-10.0, 10.0), uk(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double t = ut(gen), k = uk(gen);
    const double closed = std::exp(2.0 * k * k) * std::exp(-0.5 * t * t) * std::cos(2.0 * k * t);
    EXPECT_NEAR(covariance_kappa(m, t, k), closed, 1e-10 * std::exp(2.0 * k * k));
    EXPECT_NEAR(covariance_kappa_quadrature(m, t, k), closed, 1e-8);
  }
}

TEST(CovarianceKappa, Band) {
  EXPECT_NEAR(covariance_kappa(SpectralModel::band(1.0), 0.0, 0.5), std::sinh(1.0), 1e-13);
  EXPECT_NEAR(covariance_kappa_quadrature(SpectralModel::band(1.0), 0.0, 0.5), 1.1752012, 5e-8);
}

TEST(CovarianceKappa, DivergenceRejected) {
  EXPECT_THROW(covariance_kappa(SpectralModel::bilateral_exponential(), 0.0, 0.5), DivergenceError);
}

TEST(REll, ReducesAtZeroY) {
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()})
    for (double x : {0.0, 0.3, 2.0}) {
      const cplx v = r_ell(m, x, 0.0, 1);
      EXPECT_NEAR(v.real(), covariance(m, x), 1e-10);
      EXPECT_EQ(v.imag(), 0.0);
    }
}

TEST(REll, AtOriginIsSinhcMoment) {
  const auto m = SpectralModel::gaussian();
  for (double y : {0.1, 0.3}) {
    const double ref = oracle::gaussian_expect([&](double l) {
      const double p = oracle::sinhc(l * y);
      return p * p;
    });
    EXPECT_NEAR(r_ell(m, 0.0, y, 2).real(), ref, 1e-10);
  }
}

TEST(REll, GaussianOracle) {
  const auto m = SpectralModel::gaussian();
  const double ref = oracle::gaussian_expect([](double l) { return std::cos(l) * oracle::sinhc(0.3 * l); });
  EXPECT_NEAR(r_ell(m, 1.0, 0.3, 1).real(), ref, 1e-8);
  // finer quadrature settings must not move the value
  QuadratureSettings q;
  q.tolerance = 1e-14;
  q.max_doublings = 12;
  EXPECT_NEAR(r_ell(m.with_quadrature(q), 1.0, 0.3, 1).real(), r_ell(m, 1.0, 0.3, 1).real(), 1e-8);
  EXPECT_THROW(r_ell(m, 1.0, 0.3, 3), ValidationError);
}

TEST(Derivatives, TrivialValues) {
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()}) {
    EXPECT_EQ(r1_prime(m, 0.0, 0.2), 0.0);
    const double vI = m.integrate_even(
        [](double l) {
          const double p = sinhc(0.2 * l);
          return l * l * p * p;
        },
        0.0, 0.4);
    EXPECT_NEAR(r2_second(m, 0.0, 0.2), -vI, 1e-12);
  }
}

TEST(Derivatives, FiniteDifferenceOracle) {
  const auto m = SpectralModel::gaussian();
  const double h = 1e-4;
  const double fd = (r_ell(m, 0.7 + h, 0.2, 1).real() - r_ell(m, 0.7 - h, 0.2, 1).real()) / (2.0 * h);
  EXPECT_NEAR(r1_prime(m, 0.7, 0.2), fd, 1e-6);
}

TEST(Derivatives, RandomFiniteDifferences) {
  std::mt19937_64 gen(4);
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()}) {
    const double kp = std::min(0.4, 0.45 * m.kappa());
    std::uniform_real_distribution<double> ux(-5.0, 5.0), uy(-kp, kp);
    for (int i = 0; i < 50; ++i) {
      const double x = ux(gen), y = uy(gen);
      const double h1 = 1e-4, h2 = 1e-3;
      const double d1 = (r_ell(m, x + h1, y, 1).real() - r_ell(m, x - h1, y, 1).real()) / (2.0 * h1);
      auto second = [&](double h) {
        return (r_ell(m, x + h, y, 2).real() - 2.0 * r_ell(m, x, y, 2).real() + r_ell(m, x - h, y, 2).real()) / (h * h);
      };
      // Richardson step; heavy spectral tails make the plain h² error visible
      const double d2 = (4.0 * second(h2 / 2) - second(h2)) / 3.0;
      EXPECT_NEAR(r1_prime(m, x, y), d1, 1e-6) << m.name() << " x=" << x << " y=" << y;
      EXPECT_NEAR(r2_second(m, x, y), d2, 1e-6) << m.name() << " x=" << x << " y=" << y;
    }
  }
}

TEST(Derivatives, StripIdentities) {
  for (const auto& m : {SpectralModel::gaussian(), SpectralModel::band(1.0), SpectralModel::bilateral_exponential()}) {
    for (double y : {0.05, 0.2, 0.35}) {
      const double r2y = covariance_complex(m, cplx(0.0, 2.0 * y)).real();
      const double vR = m.integrate_even([=](double l) { return std::cosh(l * y) * std::cosh(l * y); }, 0.0, 2 * y);
      const double vI = -r2_second(m, 0.0, y);
      EXPECT_NEAR(vR, 0.5 * (r2y + 1.0), 1e-8) << m.name();
      EXPECT_NEAR(y * y * vI, 0.5 * (r2y - 1.0), 1e-8) << m.name();
    }
  }
}

TEST(AssumptionA, GaussianSatisfied) {
  const auto rep = omega_star(SpectralModel::gaussian(), 1.0, 0.2);
  EXPECT_EQ(rep.verdict_string(), "satisfied");
  ASSERT_EQ(rep.omega_star_table.size(), 20u);
  for (std::size_t k = 1; k < rep.omega_star_table.size(); ++k) {
    EXPECT_LE(rep.omega_star_table[k].omega_star, rep.omega_star_table[k - 1].omega_star);
    EXPECT_GE(rep.omega_star_table[k].omega_star, 0.0);
  }
  EXPECT_LT(rep.omega_star_table.back().omega_star, 1e-12);
  EXPECT_EQ(rep.j_max, 200);
  EXPECT_EQ(rep.y_values.size(), 21u);
}

TEST(AssumptionA, BandFailsOnDerivativeTerm) {
  const auto rep = omega_star(SpectralModel::band(1.0), 2.0 * pi, 0.2);
  EXPECT_EQ(rep.verdict_string(), "fails(r1prime)");
  // sinc(2πj) = 0 for j ≥ 1
  for (double t : rep.terms[0].tail) EXPECT_LT(t, 1e-12);
  EXPECT_FALSE(rep.terms[1].first_k_below.has_value());
  EXPECT_GT(rep.terms[1].tail.back(), rep.threshold);
}

TEST(AssumptionA, BilateralSatisfied) {
  const auto rep = omega_star(SpectralModel::bilateral_exponential(), 1.0, 0.1);
  EXPECT_EQ(rep.verdict_string(), "satisfied");
  for (std::size_t k = 1; k < rep.omega_star_table.size(); ++k)
    EXPECT_LE(rep.omega_star_table[k].omega_star, rep.omega_star_table[k - 1].omega_star);
}

TEST(AssumptionA, RejectsWideStrip) {
  EXPECT_THROW(omega_star(SpectralModel::bilateral_exponential(), 1.0, 0.5), ValidationError);
  EXPECT_THROW(omega_star(SpectralModel::gaussian(), 0.0, 0.2), ValidationError);
}

TEST(Tabulated, FlatTableReproducesBand) {
  const auto t = SpectralModel::tabulated({0.0, 0.5, 1.0}, {3.0, 3.0, 3.0});
  const auto b = SpectralModel::band(1.0);
  for (double x : {0.0, 0.4, 2.0, 9.0}) EXPECT_NEAR(covariance(t, x), covariance(b, x), 1e-10);
  EXPECT_NEAR(kac_rice_alpha(t).alpha, kac_rice_alpha(b).alpha, 1e-10);
  EXPECT_TRUE(std::isinf(t.kappa()));
}

TEST(Tabulated, TwoSidedGridIsSymmetrized) {
  const auto t = SpectralModel::tabulated({-1.0, -0.5, 0.5, 1.0}, {1.0, 2.0, 2.0, 1.0});
  EXPECT_NEAR(t.density(0.3), t.density(-0.3), 0.0);
  EXPECT_NEAR(covariance(t, 0.0), 1.0, 1e-10);
}

TEST(Tabulated, CsvAndValidation) {
  const auto path = std::filesystem::temp_directory_path() / "gaussroots_density.csv";
  {
    std::ofstream out(path);
    out << "lambda,density\n# comment\n0,1\n1,1\n2,0\n";
  }
  const auto m = parse_model("csv:" + path.string());
  EXPECT_EQ(m.family(), Family::tabulated);
  EXPECT_NEAR(covariance(m, 0.0), 1.0, 1e-10);
  std::filesystem::remove(path);
  EXPECT_THROW(SpectralModel::tabulated({0.0, 1.0}, {1.0, -1.0}), ValidationError);
  EXPECT_THROW(SpectralModel::tabulated({0.5, 1.0}, {1.0, 1.0}), ValidationError);
  EXPECT_THROW(SpectralModel::tabulated({-1.0, 0.0, 2.0}, {1.0, 1.0, 1.0}), ValidationError);
}

TEST(ParseModel, Specs) {
  EXPECT_EQ(parse_model("gaussian").family(), Family::gaussian);
  EXPECT_EQ(parse_model("bilateral").family(), Family::bilateral_exponential);
  EXPECT_DOUBLE_EQ(parse_model("band(2)").band_width(), 2.0);
  EXPECT_DOUBLE_EQ(parse_model("band:0.5").band_width(), 0.5);
  EXPECT_THROW(parse_model("cauchy"), ValidationError);
  EXPECT_THROW(parse_model("band(x)"), ValidationError);
}
