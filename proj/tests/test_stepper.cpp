#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lch/diagnostics.hpp"
#include "lch/fem.hpp"
#include "lch/initial.hpp"
#include "lch/stepper.hpp"
#include "oracles.hpp"

using namespace lch;

namespace {

ModelParams params_for(int M, double L = 2 * std::numbers::pi) {
  ModelParams p;
  p.M = M;
  p.L = L;
  return p;
}

SimState constant_state(const PeriodicMesh& mesh, const ModelParams& p, double a, double b) {
  SimState s{NodalField(mesh, a), NodalField(mesh, b), NodalField(mesh, 0.0)};
  s.mu = init_mu0(mesh, s.phi, s.c, p);
  return s;
}

SimState random_state(const PeriodicMesh& mesh, const ModelParams& p, std::uint64_t seed) {
  return initial_state(mesh, InitialSpec{}, seed, p);
}

double rel_diff(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

}  // namespace

TEST(InitMu0, ConstantStates) {
  const auto mesh = build_mesh(6);
  const auto p = params_for(6);
  const auto s = constant_state(mesh, p, 0.5, 0.4);
  for (double v : s.mu) EXPECT_NEAR(v, -0.4, 1e-13);
  const auto t = constant_state(mesh, p, 0.23, 0.61);
  const double expect =
      (physics::f1_delta(0.23, p.delta) - physics::f2(0.23, p.theta0)) / p.eps - 0.61;
  for (double v : t.mu) EXPECT_NEAR(v, expect, 1e-12 * std::abs(expect));
}

TEST(InitMu0, SolvesChemicalPotentialEquation) {
  const auto mesh = build_mesh(3);
  const auto p = params_for(3);
  const auto s = random_state(mesh, p, 5);
  // Bμ - εKφ - B(f1δ(φ) - f2(φ))/ε + Bc = 0, row by row, against dense K
  const auto k = oracle::stiffness(mesh, std::vector<double>(mesh.triangle_count(), 1.0));
  const auto kphi = oracle::dense_matvec(k, std::vector<double>(s.phi.begin(), s.phi.end()));
  const auto beta = lumped_weights(mesh);
  for (std::size_t j = 0; j < 9; ++j) {
    const double r = beta[j] * s.mu[j] - p.eps * kphi[j] -
                     beta[j] * (physics::f1_delta(s.phi[j], p.delta) - physics::f2(s.phi[j], p.theta0)) / p.eps +
                     beta[j] * s.c[j];
    EXPECT_NEAR(r, 0.0, 1e-12);
  }
}

TEST(InitMu0, DomainViolationWithoutRegularization) {
  const auto mesh = build_mesh(3);
  auto p = params_for(3);
  p.delta = 0.0;
  EXPECT_THROW(init_mu0(mesh, NodalField(mesh, 1.0), NodalField(mesh, 0.0), p), DomainError);
}

// residual assembled from scratch with dense matrices from the geometric oracle
TEST(StepSystem, ResidualMatchesDenseOracle) {
  const auto mesh = build_mesh(3, 1.9);
  auto p = params_for(3, 1.9);
  p.tau = 0.01;
  const auto old = random_state(mesh, p, 11);
  auto guess = random_state(mesh, p, 12);
  const auto sys = assemble_step_system(mesh, old, guess, p, NewtonSettings{});

  const std::size_t N = 9, nt = mesh.triangle_count();
  std::vector<double> wm(nt), wmc(nt), wmc2(nt), wg(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangle(t);
    const double pb = (old.phi[tri[0]] + old.phi[tri[1]] + old.phi[tri[2]]) / 3;
    const double cb = (old.c[tri[0]] + old.c[tri[1]] + old.c[tri[2]]) / 3;
    wm[t] = pb * pb * (1 - pb) * (1 - pb);
    wmc[t] = wm[t] * cb;
    wmc2[t] = wm[t] * cb * cb;
    wg[t] = cb * cb;
  }
  const auto K = oracle::stiffness(mesh, std::vector<double>(nt, 1.0));
  const auto Km = oracle::stiffness(mesh, wm), Kmc = oracle::stiffness(mesh, wmc),
             Kmc2 = oracle::stiffness(mesh, wmc2), Kg = oracle::stiffness(mesh, wg);
  const double beta = std::pow(1.9 / 3, 2);
  std::vector<double> phi(guess.phi.begin(), guess.phi.end()), c(guess.c.begin(), guess.c.end()),
      mu(guess.mu.begin(), guess.mu.end()), h(N);
  for (std::size_t j = 0; j < N; ++j) h[j] = c[j] - old.phi[j];
  const auto Kmmu = oracle::dense_matvec(Km, mu), Kmch = oracle::dense_matvec(Kmc, h),
             Kgh = oracle::dense_matvec(Kg, h), Kmc2h = oracle::dense_matvec(Kmc2, h),
             Kmcmu = oracle::dense_matvec(Kmc, mu), Kphi = oracle::dense_matvec(K, phi);
  for (std::size_t j = 0; j < N; ++j) {
    const double r1 = beta * (phi[j] - old.phi[j]) / p.tau + p.sigma * p.tau * beta * (mu[j] - old.mu[j]) +
                      Kmmu[j] - Kmch[j];
    const double r2 = beta * (c[j] - old.c[j]) / p.tau + Kgh[j] + Kmc2h[j] - Kmcmu[j];
    const double r3 = beta * mu[j] - p.eps * Kphi[j] - beta * physics::f1_delta(phi[j], p.delta) / p.eps +
                      beta * physics::f2(old.phi[j], p.theta0) / p.eps + beta * c[j];
    EXPECT_NEAR(sys.residual[j], r1, 1e-12 * (1 + std::abs(r1)));
    EXPECT_NEAR(sys.residual[N + j], r2, 1e-12 * (1 + std::abs(r2)));
    EXPECT_NEAR(sys.residual[2 * N + j], r3, 1e-12 * (1 + std::abs(r3)));
  }
}

TEST(StepSystem, ConstantConsistentStateHasZeroResidual) {
  const auto mesh = build_mesh(5);
  const auto p = params_for(5);
  const auto s = constant_state(mesh, p, 0.3, 0.45);
  const auto sys = assemble_step_system(mesh, s, s, p, NewtonSettings{});
  EXPECT_LE(norm_inf(sys.residual), 1e-13);
}

TEST(StepSystem, JacobianMatchesFiniteDifferences) {
  for (double delta : {1e-3, 0.0, 0.3}) {
    const auto mesh = build_mesh(2);
    auto p = params_for(2);
    p.delta = delta;
    p.tau = 0.05;
    const auto old = random_state(mesh, p, 21);
    auto guess = random_state(mesh, p, 22);
    if (delta == 0.3) guess.phi[1] = 0.1;  // lower quadratic branch
    const auto sys = assemble_step_system(mesh, old, guess, p, NewtonSettings{});
    const std::size_t N = 4;
    const auto J = oracle::to_dense(sys.jacobian);
    const double hstep = 1e-6;
    for (std::size_t col = 0; col < 3 * N; ++col) {
      SimState plus = guess, minus = guess;
      auto field = [&](SimState& s) -> NodalField& {
        return col < N ? s.phi : col < 2 * N ? s.c : s.mu;
      };
      field(plus)[col % N] += hstep;
      field(minus)[col % N] -= hstep;
      const auto rp = assemble_step_system(mesh, old, plus, p, NewtonSettings{}).residual;
      const auto rm = assemble_step_system(mesh, old, minus, p, NewtonSettings{}).residual;
      for (std::size_t row = 0; row < 3 * N; ++row) {
        const double fd = (rp[row] - rm[row]) / (2 * hstep);
        EXPECT_NEAR(J[row][col], fd, 1e-6 * (1 + std::abs(fd))) << row << "," << col << " delta=" << delta;
      }
    }
  }
}

TEST(StepSystem, GuardWithoutRegularization) {
  const auto mesh = build_mesh(3);
  auto p = params_for(3);
  p.delta = 0.0;
  const auto old = random_state(mesh, p, 1);
  auto guess = old;
  guess.phi[4] = 1.0;
  EXPECT_THROW(assemble_step_system(mesh, old, guess, p, NewtonSettings{}), DomainError);
}

TEST(Stepper, RejectsMismatchedParams) {
  const auto mesh = build_mesh(4);
  EXPECT_THROW(Stepper(mesh, params_for(5)), MeshMismatch);
  auto p = params_for(4);
  p.tau = -1;
  EXPECT_THROW(Stepper(mesh, p), ConfigError);
  NewtonSettings s;
  s.max_iter = 0;
  EXPECT_THROW(Stepper(mesh, params_for(4), s), ConfigError);
}

TEST(Stepper, ConstantStateIsFixedPoint) {
  const auto mesh = build_mesh(8);
  const auto p = params_for(8);
  const auto s = constant_state(mesh, p, 0.35, 0.4);
  Stepper stepper(mesh, p);
  StepStats st;
  const auto next = stepper.advance(s, &st);
  EXPECT_EQ(st.iterations, 1);
  for (std::size_t j = 0; j < mesh.node_count(); ++j) {
    EXPECT_NEAR(next.phi[j], s.phi[j], 1e-13);
    EXPECT_NEAR(next.c[j], s.c[j], 1e-13);
    EXPECT_NEAR(next.mu[j], s.mu[j], 1e-12);
  }
  EXPECT_EQ(next.step, 1);
  EXPECT_DOUBLE_EQ(next.time, p.tau);

  const auto fin = stepper.run(s, 100);
  EXPECT_EQ(fin.step, 100);
  for (std::size_t j = 0; j < mesh.node_count(); ++j) {
    EXPECT_NEAR(fin.phi[j], s.phi[j], 1e-12);
    EXPECT_NEAR(fin.c[j], s.c[j], 1e-12);
    EXPECT_NEAR(fin.mu[j], s.mu[j], 1e-12);
  }
  const auto same = stepper.run(s, 0);
  EXPECT_TRUE(same == s);
  EXPECT_THROW(stepper.run(s, -1), DomainError);
}

TEST(Stepper, StepConservesMasses) {
  const auto mesh = build_mesh(12);
  auto p = params_for(12);
  const auto s0 = random_state(mesh, p, 3);
  Stepper stepper(mesh, p);
  const auto m0 = masses(mesh, s0, p);
  SimState s = s0;
  for (int n = 0; n < 10; ++n) {
    StepStats st;
    const auto next = stepper.advance(s, &st);
    EXPECT_LE(st.residual_norms.back(), 1e-10);
    const auto a = masses(mesh, s, p), b = masses(mesh, next, p);
    EXPECT_LE(rel_diff(b.c_mass, a.c_mass), 1e-10);
    EXPECT_LE(rel_diff(b.phi_mu_combo, a.phi_mu_combo), 1e-10);
    s = next;
  }
  const auto m1 = masses(mesh, s, p);
  EXPECT_LE(rel_diff(m1.c_mass, m0.c_mass), 1e-9);
  EXPECT_LE(rel_diff(m1.phi_mu_combo, m0.phi_mu_combo), 1e-9);
}

TEST(Stepper, DefaultsEnergyDecreasesAndNewtonTailIsFast) {
  const auto mesh = build_mesh(60);
  const auto p = params_for(60);
  const auto s0 = random_state(mesh, p, 42);
  Stepper stepper(mesh, p);
  double e_prev = discrete_energy(mesh, s0, p).total;
  int checked = 0;
  stepper.run(s0, 64, [&](const SimState& prev, const SimState& next, const StepStats& st) {
    const auto e = step_report(mesh, prev, next, p);
    EXPECT_LE(e.total - e_prev, 1e-8 * (1 + std::abs(e_prev)));
    EXPECT_LE(e.total - e_prev + e.dissipation_m + e.dissipation_g, 1e-8 * (1 + std::abs(e_prev)));
    EXPECT_GE(e.dissipation_m, 0.0);
    EXPECT_GE(e.dissipation_g, 0.0);
    e_prev = e.total;
    const auto& inc = st.increment_norms;
    if (inc.size() >= 3 && inc[inc.size() - 2] > 1e-13) {
      EXPECT_LT(inc.back() / inc[inc.size() - 2], 0.5) << "step " << next.step;
      ++checked;
    }
  });
  EXPECT_GT(checked, 0);
}

TEST(Stepper, NoRegularizationKeepsPhiInside) {
  const auto mesh = build_mesh(16);
  auto p = params_for(16);
  p.delta = 0.0;
  InitialSpec spec;
  spec.phi = {0.6, 0.2};
  const auto s0 = initial_state(mesh, spec, 9, p);
  Stepper stepper(mesh, p);
  stepper.run(s0, 30, [&](const SimState&, const SimState& next, const StepStats&) {
    for (double v : next.phi) {
      ASSERT_GT(v, 0.0);
      ASSERT_LT(v, 1.0);
    }
  });
}

TEST(Stepper, Deterministic) {
  const auto mesh = build_mesh(14);
  const auto p = params_for(14);
  const auto s0 = random_state(mesh, p, 77);
  Stepper a(mesh, p), b(mesh, p);
  EXPECT_TRUE(a.run(s0, 25) == b.run(s0, 25));
}

TEST(Stepper, ReportsNonConvergence) {
  const auto mesh = build_mesh(10);
  auto p = params_for(10);
  p.tau = 0.5;
  NewtonSettings s;
  s.max_iter = 1;
  Stepper stepper(mesh, p, s);
  InitialSpec spec;
  spec.phi = {0.6, 0.2};
  const auto s0 = initial_state(mesh, spec, 4, p);
  try {
    stepper.advance(s0);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 0.0);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
  }
}
