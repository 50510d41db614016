#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lch/error.hpp"
#include "lch/fem.hpp"
#include "lch/mesh.hpp"
#include "lch/physics.hpp"
#include "lch/sparse.hpp"

namespace lch {

/// (φⁿ, cⁿ, μⁿ) at time step n.
struct SimState {
  NodalField phi;
  NodalField c;
  NodalField mu;
  long step = 0;
  double time = 0.0;

  friend bool operator==(const SimState&, const SimState&) = default;
};

struct NewtonSettings {
  double abs_tol = 1e-11;  // on ‖R‖∞
  double rel_tol = 1e-10;  // relative to ‖R‖∞ at the initial guess
  int max_iter = 25;
  double phi_guard = 1e-12;  // δ = 0 only: iterates must keep φ in (ω, 1-ω)
  int max_halvings = 8;
};

/// What one call to advance() did.
struct StepStats {
  int iterations = 0;  // Newton corrections applied
  int halvings = 0;    // total step-length halvings over all iterations
  std::vector<double> residual_norms;   // ‖R‖∞ before each correction and at exit
  std::vector<double> increment_norms;  // ‖λ dx‖∞ of each accepted correction
};

/// Per-triangle coefficients frozen at the old time level: m(φ̄ⁿ), m(φ̄ⁿ)c̄ⁿ,
/// m(φ̄ⁿ)(c̄ⁿ)², g(c̄ⁿ), where bars are barycentric (triangle-average) values.
/// Shared by the step assembly and the dissipation audit.
struct FrozenCoefficients {
  std::vector<double> c_bar;
  std::vector<double> w_m;
  std::vector<double> w_mc;
  std::vector<double> w_mc2;
  std::vector<double> w_g;
};

inline FrozenCoefficients frozen_coefficients(const PeriodicMesh& mesh,
                                              const SimState& old,
                                              GKind g_kind) {
  require_on_mesh(old.phi, mesh, "frozen_coefficients");
  require_on_mesh(old.c, mesh, "frozen_coefficients");
  const std::size_t nt = mesh.triangle_count();
  FrozenCoefficients w;
  w.c_bar.resize(nt);
  w.w_m.resize(nt);
  w.w_mc.resize(nt);
  w.w_mc2.resize(nt);
  w.w_g.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const double phi_bar = triangle_average(mesh, old.phi, t);
    const double c_bar = triangle_average(mesh, old.c, t);
    const double mo = physics::m(phi_bar);
    w.c_bar[t] = c_bar;
    w.w_m[t] = mo;
    w.w_mc[t] = mo * c_bar;
    w.w_mc2[t] = mo * c_bar * c_bar;
    w.w_g[t] = physics::g(c_bar, g_kind);
  }
  return w;
}

/// Consistent initial chemical potential: the discrete μ-equation evaluated
/// at φ⁰, i.e. μ⁰_j = (ε/β_j)(Kφ⁰)_j + (f₁,δ(φ⁰_j) - f₂(φ⁰_j))/ε - c⁰_j.
inline NodalField init_mu0(const PeriodicMesh& mesh, const NodalField& phi0,
                           const NodalField& c0, const ModelParams& p) {
  require_on_mesh(phi0, mesh, "init_mu0");
  require_on_mesh(c0, mesh, "init_mu0");
  const NodalField beta = lumped_weights(mesh);
  const auto kphi = matvec(stiffness_matrix(mesh), phi0.values());
  NodalField mu(mesh, 0.0);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    mu[j] = p.eps / beta[j] * kphi[j] +
            (physics::f1_delta(phi0[j], p.delta) - physics::f2(phi0[j], p.theta0)) / p.eps -
            c0[j];
  }
  return mu;
}

/// Residual and Jacobian of one time step, unknowns ordered in blocks
/// x = (φ, c, μ) of length N each.
struct StepSystem {
  std::vector<double> residual;
  CsrMatrix jacobian;
};

/// Time stepper for the stabilized semi-convex-splitting scheme.
///
/// With B = diag(β), K the stiffness matrix and K_w the stiffness matrices
/// weighted by the frozen coefficients, the step residual is
///
///   R₁ = B(φ-φⁿ)/τ + στ B(μ-μⁿ) + K_m μ - K_mc (c - φⁿ)
///   R₂ = B(c-cⁿ)/τ + (K_g + K_mc²)(c - φⁿ) - K_mc μ
///   R₃ = Bμ - εKφ - B f₁,δ(φ)/ε + B f₂(φⁿ)/ε + Bc
///
/// The first two blocks are linear; only ∂R₃/∂φ changes between Newton
/// iterations. The Jacobian pattern is fixed per mesh, so the LU column
/// ordering is computed once and reused.
class Stepper {
 public:
  Stepper(const PeriodicMesh& mesh, ModelParams params, NewtonSettings settings = {})
      : mesh_(mesh),
        p_(params),
        s_(settings),
        beta_(lumped_weights(mesh)),
        assembler_(mesh),
        linear_(ReusedLuSolver::Settings{}, block_order(mesh)) {
    p_.validate();
    if (mesh.cells_per_side() != p_.M || mesh.side_length() != p_.L)
      throw MeshMismatch("Stepper: mesh does not match ModelParams (M, L)");
    if (!(s_.abs_tol > 0.0) || !(s_.rel_tol > 0.0) || s_.max_iter < 1)
      throw ConfigError("NewtonSettings: tolerances must be positive and max_iter >= 1");
    build_jacobian_pattern();
  }

  const PeriodicMesh& mesh() const noexcept { return mesh_; }
  const ModelParams& params() const noexcept { return p_; }
  const NewtonSettings& settings() const noexcept { return s_; }
  const NodalField& beta() const noexcept { return beta_; }
  const CsrMatrix& stiffness() const noexcept { return assembler_.pattern(); }
  const ReusedLuSolver& linear_solver() const noexcept { return linear_; }

  /// Residual and Jacobian at `guess` for the step starting from `old`.
  StepSystem assemble_step_system(const SimState& old, const SimState& guess) {
    prepare(old);
    const auto x = pack(guess);
    check_guard(x);
    StepSystem sys;
    sys.residual = residual(x);
    update_jacobian(x);
    sys.jacobian = jac_;
    return sys;
  }

  /// One time step. Newton starts from the old state and applies full steps,
  /// halving the step length while the residual does not decrease (or, with
  /// δ = 0, while φ leaves (ω, 1-ω)).
  SimState advance(const SimState& old, StepStats* stats = nullptr) {
    prepare(old);
    StepStats st;
    auto x = pack(old);
    check_guard(x);
    auto r = residual(x);
    double rn = norm_inf(r);
    const double r0 = rn;
    st.residual_norms.push_back(rn);

    // At least one correction is always applied; at an exact solution it is zero.
    while (st.iterations == 0 || !(rn <= s_.abs_tol || rn <= s_.rel_tol * r0)) {
      if (st.iterations >= s_.max_iter) {
        std::ostringstream msg;
        msg << "Newton did not converge in " << s_.max_iter << " iterations at step "
            << old.step + 1 << " (residual " << rn
            << "); try a smaller time step tau";
        throw SolverError(msg.str(), rn);
      }
      update_jacobian(x);
      const auto dx = linear_.solve(jac_, r);

      double lambda = 1.0;
      bool accepted = false;
      std::vector<double> cand(x.size());
      std::vector<double> rc;
      double rcn = 0.0;
      for (int k = 0; k <= s_.max_halvings; ++k) {
        for (std::size_t i = 0; i < x.size(); ++i) cand[i] = x[i] - lambda * dx[i];
        if (guard_ok(cand)) {
          rc = residual(cand);
          rcn = norm_inf(rc);
          if (rcn < rn || rcn <= s_.abs_tol) {
            accepted = true;
            break;
          }
        }
        lambda *= 0.5;
        ++st.halvings;
      }
      if (!accepted) {
        std::ostringstream msg;
        msg << "Newton line search failed at step " << old.step + 1
            << " after " << s_.max_halvings << " halvings (residual " << rn
            << "); try a smaller time step tau";
        throw SolverError(msg.str(), rn);
      }
      st.increment_norms.push_back(lambda * norm_inf(dx));
      x.swap(cand);
      r.swap(rc);
      rn = rcn;
      st.residual_norms.push_back(rn);
      ++st.iterations;
    }

    SimState next = unpack(x);
    next.step = old.step + 1;
    next.time = static_cast<double>(next.step) * p_.tau;
    if (stats) *stats = std::move(st);
    return next;
  }

  using Observer =
      std::function<void(const SimState& prev, const SimState& next, const StepStats&)>;

  SimState run(const SimState& initial, long n_steps, const Observer& observer = {}) {
    if (n_steps < 0) throw DomainError("run: negative step count");
    SimState state = initial;
    for (long n = 0; n < n_steps; ++n) {
      StepStats st;
      SimState next = advance(state, &st);
      if (observer) observer(state, next, st);
      state = std::move(next);
    }
    return state;
  }

 private:
  std::size_t n() const noexcept { return mesh_.node_count(); }

  // Nested dissection over nodes, with the three unknowns of a node adjacent.
  static std::vector<std::size_t> block_order(const PeriodicMesh& mesh) {
    const std::size_t N = mesh.node_count();
    std::vector<std::size_t> order;
    order.reserve(3 * N);
    for (std::size_t node : nested_dissection_order(mesh))
      for (std::size_t b = 0; b < 3; ++b) order.push_back(b * N + node);
    return order;
  }

  std::vector<double> pack(const SimState& s) const {
    require_on_mesh(s.phi, mesh_, "Stepper");
    require_on_mesh(s.c, mesh_, "Stepper");
    require_on_mesh(s.mu, mesh_, "Stepper");
    std::vector<double> x(3 * n());
    std::copy(s.phi.begin(), s.phi.end(), x.begin());
    std::copy(s.c.begin(), s.c.end(), x.begin() + static_cast<std::ptrdiff_t>(n()));
    std::copy(s.mu.begin(), s.mu.end(), x.begin() + static_cast<std::ptrdiff_t>(2 * n()));
    return x;
  }

  SimState unpack(std::span<const double> x) const {
    const auto N = static_cast<std::ptrdiff_t>(n());
    SimState s;
    s.phi = NodalField(mesh_, std::vector<double>(x.begin(), x.begin() + N));
    s.c = NodalField(mesh_, std::vector<double>(x.begin() + N, x.begin() + 2 * N));
    s.mu = NodalField(mesh_, std::vector<double>(x.begin() + 2 * N, x.end()));
    return s;
  }

  bool guard_ok(std::span<const double> x) const {
    if (p_.delta > 0.0) {
      for (double v : x)
        if (!std::isfinite(v)) return false;
      return true;
    }
    const double w = s_.phi_guard;
    for (std::size_t j = 0; j < n(); ++j)
      if (!(x[j] > w && x[j] < 1.0 - w)) return false;
    for (std::size_t j = n(); j < x.size(); ++j)
      if (!std::isfinite(x[j])) return false;
    return true;
  }

  void check_guard(std::span<const double> x) const {
    if (!guard_ok(x))
      throw DomainError("Stepper: phi outside (omega, 1-omega) or non-finite value (delta = " +
                        std::to_string(p_.delta) + ")");
  }

  // Builds the old-state dependent parts of the step.
  void prepare(const SimState& old) {
    require_on_mesh(old.phi, mesh_, "Stepper");
    require_on_mesh(old.c, mesh_, "Stepper");
    require_on_mesh(old.mu, mesh_, "Stepper");
    old_ = old;
    const auto w = frozen_coefficients(mesh_, old, p_.g_kind);
    k_m_ = assembler_.assemble(w.w_m);
    k_mc_ = assembler_.assemble(w.w_mc);
    std::vector<double> w_c(w.w_g.size());
    for (std::size_t t = 0; t < w_c.size(); ++t) w_c[t] = w.w_g[t] + w.w_mc2[t];
    k_c_ = assembler_.assemble(w_c);

    f2_old_.resize(n());
    for (std::size_t j = 0; j < n(); ++j) f2_old_[j] = physics::f2(old.phi[j], p_.theta0);

    // Constant blocks of the Jacobian.
    const double inv_tau = 1.0 / p_.tau;
    const double stab = p_.sigma * p_.tau;
    std::fill(jac_.values.begin(), jac_.values.end(), 0.0);
    for (std::size_t j = 0; j < n(); ++j) {
      jac_.values[diag_slot_[0][j]] += beta_[j] * inv_tau;       // (φ,φ)
      jac_.values[diag_slot_[1][j]] += stab * beta_[j];          // (φ,μ)
      jac_.values[diag_slot_[2][j]] += beta_[j] * inv_tau;       // (c,c)
      jac_.values[diag_slot_[4][j]] += beta_[j];                 // (μ,c)
      jac_.values[diag_slot_[5][j]] += beta_[j];                 // (μ,μ)
    }
    const auto& kv = stiffness().values;
    for (std::size_t q = 0; q < kv.size(); ++q) {
      jac_.values[k_slot_[0][q]] += k_m_.values[q];       // (φ,μ)
      jac_.values[k_slot_[1][q]] -= k_mc_.values[q];      // (φ,c)
      jac_.values[k_slot_[2][q]] += k_c_.values[q];       // (c,c)
      jac_.values[k_slot_[3][q]] -= k_mc_.values[q];      // (c,μ)
      jac_.values[k_slot_[4][q]] -= p_.eps * kv[q];       // (μ,φ)
    }
    jac_const_ = jac_.values;
  }

  std::vector<double> residual(std::span<const double> x) const {
    const std::size_t N = n();
    const auto phi = x.subspan(0, N);
    const auto c = x.subspan(N, N);
    const auto mu = x.subspan(2 * N, N);

    std::vector<double> c_minus_phi_old(N);
    for (std::size_t j = 0; j < N; ++j) c_minus_phi_old[j] = c[j] - old_.phi[j];

    const auto km_mu = matvec(k_m_, mu);
    const auto kmc_h = matvec(k_mc_, c_minus_phi_old);
    const auto kc_h = matvec(k_c_, c_minus_phi_old);
    const auto kmc_mu = matvec(k_mc_, mu);
    const auto k_phi = matvec(stiffness(), phi);

    const double inv_tau = 1.0 / p_.tau;
    const double stab = p_.sigma * p_.tau;
    const double inv_eps = 1.0 / p_.eps;
    std::vector<double> r(3 * N);
    for (std::size_t j = 0; j < N; ++j) {
      const double b = beta_[j];
      r[j] = b * (phi[j] - old_.phi[j]) * inv_tau + stab * b * (mu[j] - old_.mu[j]) +
             km_mu[j] - kmc_h[j];
      r[N + j] = b * (c[j] - old_.c[j]) * inv_tau + kc_h[j] - kmc_mu[j];
      r[2 * N + j] = b * mu[j] - p_.eps * k_phi[j] -
                     inv_eps * b * physics::f1_delta(phi[j], p_.delta) +
                     inv_eps * b * f2_old_[j] + b * c[j];
    }
    return r;
  }

  void update_jacobian(std::span<const double> x) {
    jac_.values = jac_const_;
    const double inv_eps = 1.0 / p_.eps;
    for (std::size_t j = 0; j < n(); ++j)
      jac_.values[diag_slot_[3][j]] -=
          inv_eps * beta_[j] * physics::f1_delta_prime(x[j], p_.delta);
  }

  void build_jacobian_pattern() {
    const std::size_t N = n();
    const auto& k = stiffness();
    Triplets t(3 * N, 3 * N);
    // K-shaped blocks (row block, column block)
    const std::size_t kb[5][2] = {{0, 2}, {0, 1}, {1, 1}, {1, 2}, {2, 0}};
    for (const auto& b : kb)
      for (std::size_t r = 0; r < N; ++r)
        for (std::size_t q = k.row_ptr[r]; q < k.row_ptr[r + 1]; ++q)
          t.add(b[0] * N + r, b[1] * N + k.col_idx[q], 0.0);
    // diagonal blocks: (φ,φ), (φ,μ), (c,c), (μ,φ), (μ,c), (μ,μ)
    const std::size_t db[6][2] = {{0, 0}, {0, 2}, {1, 1}, {2, 0}, {2, 1}, {2, 2}};
    for (const auto& b : db)
      for (std::size_t j = 0; j < N; ++j) t.add(b[0] * N + j, b[1] * N + j, 0.0);
    jac_ = compress(t);

    for (std::size_t i = 0; i < 5; ++i) {
      k_slot_[i].resize(k.nnz());
      for (std::size_t r = 0; r < N; ++r)
        for (std::size_t q = k.row_ptr[r]; q < k.row_ptr[r + 1]; ++q)
          k_slot_[i][q] = jac_.slot(kb[i][0] * N + r, kb[i][1] * N + k.col_idx[q]);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      diag_slot_[i].resize(N);
      for (std::size_t j = 0; j < N; ++j)
        diag_slot_[i][j] = jac_.slot(db[i][0] * N + j, db[i][1] * N + j);
    }
  }

  const PeriodicMesh& mesh_;
  ModelParams p_;
  NewtonSettings s_;
  NodalField beta_;
  StiffnessAssembler assembler_;

  SimState old_;
  CsrMatrix k_m_, k_mc_, k_c_;
  std::vector<double> f2_old_;
  CsrMatrix jac_;
  std::vector<double> jac_const_;
  std::vector<std::size_t> k_slot_[5];
  std::vector<std::size_t> diag_slot_[6];
  ReusedLuSolver linear_;
};

/// Free-function form of a single assembly, for callers without a Stepper.
inline StepSystem assemble_step_system(const PeriodicMesh& mesh, const SimState& old,
                                       const SimState& guess, const ModelParams& p,
                                       const NewtonSettings& s = {}) {
  Stepper stepper(mesh, p, s);
  return stepper.assemble_step_system(old, guess);
}

inline SimState advance(const PeriodicMesh& mesh, const SimState& old,
                        const ModelParams& p, const NewtonSettings& s = {},
                        StepStats* stats = nullptr) {
  Stepper stepper(mesh, p, s);
  return stepper.advance(old, stats);
}

}  // namespace lch
