#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lch/physics.hpp"

using namespace lch;
using namespace lch::physics;

TEST(Potential, ScalarValues) {
  EXPECT_NEAR(F(0.5, 7.0), std::log(0.5) + 7.0 / 8.0, 1e-14);
  EXPECT_NEAR(F(0.5, 7.0), 0.181853, 1e-6);
  for (double th : {0.5, 3.0, 7.0}) EXPECT_NEAR(f(0.5, th), 0.0, 1e-15);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-6, 1 - 1e-6);
  for (int k = 0; k < 200; ++k) {
    const double p = u(rng);
    EXPECT_NEAR(F(p, 7.0), F(1 - p, 7.0), 1e-12);
    EXPECT_NEAR(F(p, 7.0), F1(p) - F2(p, 7.0), 1e-12 * (1 + std::abs(F(p, 7.0))));
    EXPECT_NEAR(f(p, 7.0), f1(p) - f2(p, 7.0), 1e-12 * (1 + std::abs(f(p, 7.0))));
  }
}

TEST(Potential, DomainErrors) {
  for (double p : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    EXPECT_THROW(F(p, 7.0), DomainError);
    EXPECT_THROW(f(p, 7.0), DomainError);
    EXPECT_THROW(F1(p), DomainError);
    EXPECT_THROW(f1_delta(p, 0.0), DomainError);
    EXPECT_THROW(F1_delta(p, 0.0), DomainError);
  }
  EXPECT_THROW(f1_delta(0.3, 0.5), DomainError);
  EXPECT_THROW(f1_delta(0.3, -1e-3), DomainError);
  EXPECT_THROW(F1_delta(0.3, 0.7), DomainError);
}

TEST(Regularized, ScalarValues) {
  EXPECT_NEAR(f1_delta(0.5, 1e-3), 0.0, 1e-15);
  EXPECT_NEAR(f1_delta(0.005, 0.01), -0.5 + std::log(0.01) - std::log(0.995), 1e-13);
  EXPECT_NEAR(f1_delta(0.005, 0.01), -5.100157, 1e-6);
  // both branches meet at φ = δ
  for (double d : {1e-3, 0.01, 0.2}) {
    const double target = std::log(d) - std::log(1 - d);
    EXPECT_NEAR(f1_delta(d, d), target, 1e-12);
    EXPECT_NEAR(f1_delta(std::nextafter(d, 1.0), d), target, 1e-12);
  }
}

TEST(Regularized, ContinuityAtBreakpoints) {
  for (double d : {1e-3, 0.05, 0.25, 0.4}) {
    for (double b : {d, 1 - d}) {
      const double lo = std::nextafter(b, -1.0), hi = std::nextafter(b, 2.0);
      EXPECT_NEAR(F1_delta(lo, d), F1_delta(hi, d), 1e-12);
      EXPECT_NEAR(f1_delta(lo, d), f1_delta(hi, d), 1e-12);
      EXPECT_NEAR(f1_delta_prime(lo, d), f1_delta_prime(hi, d), 1e-12 * f1_delta_prime(b, d));
    }
  }
}

TEST(Regularized, AgreesWithLogInside) {
  for (double p = 0.01; p < 0.99; p += 0.01) {
    EXPECT_NEAR(F1_delta(p, 1e-3), F1(p), 1e-14);
    EXPECT_NEAR(f1_delta(p, 1e-3), f1(p), 1e-13);
    EXPECT_NEAR(f1_delta_prime(p, 1e-3), f1_prime(p), 1e-11);
  }
}

// central difference error of a C¹ piecewise-smooth function: O(e²) away from
// breakpoints; near one the second-derivative jump gives O(e).
TEST(Regularized, FiniteDifferenceDerivatives) {
  const double e = 1e-5;
  for (double d : {1e-3, 0.01, 0.1, 0.25}) {
    for (double p = -1.0; p <= 2.0; p += 0.0173) {
      if (std::abs(p - d) < 2 * e || std::abs(p - 1 + d) < 2 * e) continue;
      const double fd = (F1_delta(p + e, d) - F1_delta(p - e, d)) / (2 * e);
      const double scale = 1 + std::abs(f1_delta(p, d));
      EXPECT_NEAR(fd, f1_delta(p, d), 1e-6 * scale) << "phi=" << p << " delta=" << d;
      const double fd2 = (f1_delta(p + e, d) - f1_delta(p - e, d)) / (2 * e);
      // truncation error e²/6·|f'''| with |f'''| ≤ 2/dist³
      const double dist = std::max(std::min(std::abs(p), std::abs(1 - p)), d);
      EXPECT_NEAR(fd2, f1_delta_prime(p, d), 1e-6 * f1_delta_prime(p, d) + e * e / std::pow(dist, 3))
          << p;
    }
  }
  for (double p = -1.0; p <= 2.0; p += 0.1)
    EXPECT_NEAR((F2(p + e, 7) - F2(p - e, 7)) / (2 * e), f2(p, 7), 1e-8);
  for (double p = 0.05; p < 0.96; p += 0.05)
    EXPECT_NEAR((F(p + e, 7) - F(p - e, 7)) / (2 * e), f(p, 7), 1e-7);
}

TEST(Regularized, StrictlyIncreasingAndBoundedBelow) {
  for (double d : {1e-3, 0.01, 0.1, 0.25}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double p = -2.0; p <= 3.0; p += 1e-4) {
      EXPECT_GE(f1_delta_prime(p, d), 4.0 - 1e-12) << p << " " << d;
      const double v = f1_delta(p, d);
      EXPECT_GT(v, prev);
      prev = v;
    }
  }
}

TEST(Concave, Values) {
  EXPECT_EQ(f2(0.5, 7), 0.0);
  EXPECT_EQ(F2(0.0, 7), 0.0);
  EXPECT_EQ(F2(1.0, 7), 0.0);
  EXPECT_DOUBLE_EQ(f2(1.0, 7), 3.5);
}

TEST(Nutrient, Values) {
  EXPECT_DOUBLE_EQ(h(1.0, 0.6), 0.18);
  EXPECT_NEAR(h_c(0.3, 0.4), 1.1, 1e-15);
  EXPECT_EQ(h_phi(0.3, 0.4), -0.4);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 100; ++k) {
    const double p = u(rng), c = u(rng);
    EXPECT_NEAR(h(p, c) - (h1(c) - h2(p, c)), 0.0, 1e-13);
  }
}

TEST(Mobility, ScalarValues) {
  EXPECT_EQ(m(0.0), 0.0);
  EXPECT_EQ(m(1.0), 0.0);
  EXPECT_DOUBLE_EQ(m(0.5), 0.0625);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 3);
  for (int k = 0; k < 100; ++k) {
    const double p = u(rng);
    EXPECT_GE(m(p), 0.0);
    EXPECT_NEAR(m(p), m(1 - p), 1e-12 * (1 + m(p)));
  }
  EXPECT_EQ(g(0.0), 0.0);
  EXPECT_DOUBLE_EQ(g(-0.5), 0.25);
  EXPECT_DOUBLE_EQ(g(3.0), 9.0);
  EXPECT_EQ(parse_g_kind("quadratic"), GKind::quadratic);
  EXPECT_THROW(parse_g_kind("cubic"), ConfigError);
}

TEST(Mobility, Matrix) {
  const auto z = mobility_matrix(0.0, 0.7);
  EXPECT_EQ(z.a11, 0.0);
  EXPECT_EQ(z.a12, 0.0);
  EXPECT_EQ(z.a21, 0.0);
  EXPECT_DOUBLE_EQ(z.a22, 0.49);
  const auto k = mobility_matrix(0.5, 1.0);
  EXPECT_DOUBLE_EQ(k.a11, 1.0 / 16);
  EXPECT_DOUBLE_EQ(k.a12, -1.0 / 16);
  EXPECT_DOUBLE_EQ(k.a21, -1.0 / 16);
  EXPECT_DOUBLE_EQ(k.a22, 17.0 / 16);
  EXPECT_NEAR(k.det(), 1.0 / 16, 1e-15);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 3);
  for (int n = 0; n < 500; ++n) {
    const double p = u(rng), c = u(rng);
    const auto a = mobility_matrix(p, c);
    EXPECT_EQ(a.a12, a.a21);
    const double det = m(p) * g(c);
    EXPECT_NEAR(a.det(), det, 1e-12 * (1 + std::abs(det)) + 1e-12 * a.a11 * a.a22);
    EXPECT_GE(a.trace(), 0.0);
    // eigenvalues of the symmetric 2x2
    const double tr = a.a11 + a.a22, dif = a.a11 - a.a22;
    const double lmin = 0.5 * (tr - std::sqrt(dif * dif + 4 * a.a12 * a.a12));
    EXPECT_GE(lmin, -1e-14 * (1 + tr));
    const double x = u(rng), y = u(rng);
    EXPECT_GE(a.quad(x, y), -1e-12 * (1 + tr) * (x * x + y * y));
  }
}

TEST(Params, Validation) {
  ModelParams p;
  EXPECT_NO_THROW(p.validate());
  auto bad = [](auto mutate) {
    ModelParams q;
    mutate(q);
    EXPECT_THROW(q.validate(), ConfigError);
  };
  bad([](ModelParams& q) { q.eps = 0; });
  bad([](ModelParams& q) { q.theta0 = -1; });
  bad([](ModelParams& q) { q.sigma = 0; });
  bad([](ModelParams& q) { q.tau = 0; });
  bad([](ModelParams& q) { q.delta = 0.5; });
  bad([](ModelParams& q) { q.delta = -1e-3; });
  bad([](ModelParams& q) { q.M = 1; });
}
