#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lch/error.hpp"
#include "lch/fem.hpp"
#include "lch/mesh.hpp"
#include "lch/physics.hpp"
#include "lch/stepper.hpp"

namespace lch {

/// Discrete energy
///   E = (ε/2)∫|∇φ|² + (F₁,δ(φ) - F₂(φ), 1)_h/ε + (h(φ,c), 1)_h + (στ²/2)|μ|²_h
/// and, when produced by step_report(), the dissipation of the step that led
/// to this state.
struct EnergyReport {
  double gradient_part = 0.0;
  double potential_part = 0.0;
  double nutrient_part = 0.0;
  double stabilization_part = 0.0;
  double total = 0.0;
  double dissipation_m = 0.0;
  double dissipation_g = 0.0;
};

inline EnergyReport discrete_energy(const PeriodicMesh& mesh, const SimState& s,
                                    const ModelParams& p) {
  require_on_mesh(s.phi, mesh, "discrete_energy");
  require_on_mesh(s.c, mesh, "discrete_energy");
  require_on_mesh(s.mu, mesh, "discrete_energy");
  const NodalField beta = lumped_weights(mesh);
  EnergyReport e;
  // (ε/2)∫|∇φ|², element by element
  double grad = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const Point2 g = triangle_gradient(mesh, s.phi, t);
    grad += mesh.triangle_area(t) * (g.x * g.x + g.y * g.y);
  }
  e.gradient_part = 0.5 * p.eps * grad;
  double pot = 0.0, nut = 0.0, stab = 0.0;
  for (std::size_t j = 0; j < s.phi.size(); ++j) {
    const double phi = s.phi[j];
    pot += beta[j] * (physics::F1_delta(phi, p.delta) - physics::F2(phi, p.theta0));
    nut += beta[j] * physics::h(phi, s.c[j]);
    stab += beta[j] * s.mu[j] * s.mu[j];
  }
  e.potential_part = pot / p.eps;
  e.nutrient_part = nut;
  e.stabilization_part = 0.5 * p.sigma * p.tau * p.tau * stab;
  e.total = e.gradient_part + e.potential_part + e.nutrient_part + e.stabilization_part;
  return e;
}

struct Dissipation {
  double m = 0.0;  // τ∫ m(φⁿ)|∇μⁿ⁺¹ - cⁿ∇(cⁿ⁺¹+1-φⁿ)|²
  double g = 0.0;  // τ∫ g(cⁿ)|∇(cⁿ⁺¹+1-φⁿ)|²
};

/// Dissipation of the step old → next, with the per-triangle coefficients the
/// stepper froze for that step. Both terms are sums of nonnegative
/// per-triangle contributions.
inline Dissipation dissipation(const PeriodicMesh& mesh, const SimState& old,
                               const SimState& next, const ModelParams& p) {
  require_on_mesh(next.c, mesh, "dissipation");
  require_on_mesh(next.mu, mesh, "dissipation");
  const auto w = frozen_coefficients(mesh, old, p.g_kind);
  Dissipation d;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const Point2 gmu = triangle_gradient(mesh, next.mu, t);
    const Point2 gc = triangle_gradient(mesh, next.c, t);
    const Point2 gphi = triangle_gradient(mesh, old.phi, t);
    const double hx = gc.x - gphi.x, hy = gc.y - gphi.y;
    const double fx = gmu.x - w.c_bar[t] * hx, fy = gmu.y - w.c_bar[t] * hy;
    const double area = mesh.triangle_area(t);
    d.m += w.w_m[t] * (fx * fx + fy * fy) * area;
    d.g += w.w_g[t] * (hx * hx + hy * hy) * area;
  }
  d.m *= p.tau;
  d.g *= p.tau;
  return d;
}

inline EnergyReport step_report(const PeriodicMesh& mesh, const SimState& old,
                                const SimState& next, const ModelParams& p) {
  EnergyReport e = discrete_energy(mesh, next, p);
  const auto d = dissipation(mesh, old, next, p);
  e.dissipation_m = d.m;
  e.dissipation_g = d.g;
  return e;
}

struct Masses {
  double c_mass = 0.0;        // (c, 1)_h
  double phi_mu_combo = 0.0;  // (φ + στ²μ, 1)_h
};

inline Masses masses(const PeriodicMesh& mesh, const SimState& s, const ModelParams& p) {
  require_on_mesh(s.phi, mesh, "masses");
  require_on_mesh(s.c, mesh, "masses");
  require_on_mesh(s.mu, mesh, "masses");
  const NodalField beta = lumped_weights(mesh);
  const double st2 = p.sigma * p.tau * p.tau;
  Masses m;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    m.c_mass += beta[j] * s.c[j];
    m.phi_mu_combo += beta[j] * (s.phi[j] + st2 * s.mu[j]);
  }
  return m;
}

struct Extrema {
  double min_phi, max_phi, min_c, max_c;
};

inline Extrema extrema(const SimState& s) {
  if (s.phi.size() == 0 || s.c.size() == 0) throw DomainError("extrema: empty field");
  const auto [pmin, pmax] = std::minmax_element(s.phi.begin(), s.phi.end());
  const auto [cmin, cmax] = std::minmax_element(s.c.begin(), s.c.end());
  return {*pmin, *pmax, *cmin, *cmax};
}

/// Errors of one coarse run against the reference solution.
struct ErrorSample {
  double tau;
  double err_phi;
  double err_c;
};

/// Observed temporal convergence orders; rate k compares row k with row k-1.
/// A rate is absent where either error vanishes.
struct RateTable {
  struct Row {
    double tau;
    double err_phi;
    std::optional<double> rate_phi;
    double err_c;
    std::optional<double> rate_c;
  };
  std::vector<Row> rows;
};

inline RateTable convergence_rates(std::span<const ErrorSample> samples) {
  if (samples.size() < 2) throw DomainError("convergence_rates: need at least two runs");
  auto rate = [](double e_prev, double e, double t_prev, double t) -> std::optional<double> {
    if (!(e_prev > 0.0) || !(e > 0.0)) return std::nullopt;
    return std::log(e_prev / e) / std::log(t_prev / t);
  };
  RateTable table;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (!(s.tau > 0.0)) throw DomainError("convergence_rates: time steps must be positive");
    RateTable::Row row{s.tau, s.err_phi, std::nullopt, s.err_c, std::nullopt};
    if (k > 0) {
      const auto& q = samples[k - 1];
      if (q.tau == s.tau) throw DomainError("convergence_rates: repeated time step");
      row.rate_phi = rate(q.err_phi, s.err_phi, q.tau, s.tau);
      row.rate_c = rate(q.err_c, s.err_c, q.tau, s.tau);
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace lch
