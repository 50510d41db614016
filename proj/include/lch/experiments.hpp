#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lch/config.hpp"
#include "lch/diagnostics.hpp"
#include "lch/error.hpp"
#include "lch/initial.hpp"
#include "lch/io.hpp"
#include "lch/mesh.hpp"
#include "lch/stepper.hpp"

namespace lch {

/// Structure-preservation audit of one run, accumulated step by step.
struct Certificate {
  static constexpr double energy_tol = 1e-8;  // relative to 1+|Eⁿ|
  static constexpr double mass_tol = 1e-9;    // relative to 1+|mass⁰|

  long steps = 0;
  double energy_initial = 0.0;
  double energy_final = 0.0;
  // max over steps of (Eⁿ⁺¹ - Eⁿ + D_m + D_g)/(1+|Eⁿ|)
  double max_energy_excess = -std::numeric_limits<double>::infinity();
  // max over steps of (Eⁿ⁺¹ - Eⁿ)/(1+|Eⁿ|)
  double max_energy_increase = -std::numeric_limits<double>::infinity();
  double min_dissipation = std::numeric_limits<double>::infinity();
  double c_mass_drift = 0.0;
  double phi_mu_drift = 0.0;
  double min_phi = std::numeric_limits<double>::infinity();
  double max_phi = -std::numeric_limits<double>::infinity();
  double min_c = std::numeric_limits<double>::infinity();
  double max_c = -std::numeric_limits<double>::infinity();
  int max_newton_iters = 0;
  long total_newton_iters = 0;

  // vacuous for zero-step runs
  bool energy_ok() const {
    return steps == 0 || (max_energy_excess <= energy_tol && min_dissipation >= 0.0);
  }
  bool energy_nonincreasing() const { return steps == 0 || max_energy_increase <= energy_tol; }
  bool mass_ok() const { return c_mass_drift <= mass_tol && phi_mu_drift <= mass_tol; }
  bool phi_in_bounds() const { return min_phi > 0.0 && max_phi < 1.0; }
};

inline std::string describe(const Certificate& c) {
  auto mark = [](bool ok) { return ok ? "yes" : "NO"; };
  std::ostringstream o;
  o.precision(3);
  o << std::scientific;
  o << "steps                  " << c.steps << '\n'
    << "energy                 " << c.energy_initial << " -> " << c.energy_final << '\n'
    << "energy inequality      " << mark(c.energy_ok())
    << " (max excess " << c.max_energy_excess << ", tol " << Certificate::energy_tol << ")\n"
    << "energy monotone        " << mark(c.energy_nonincreasing()) << '\n'
    << "c-mass drift           " << c.c_mass_drift << ' ' << mark(c.c_mass_drift <= Certificate::mass_tol)
    << '\n'
    << "phi+st2*mu mass drift  " << c.phi_mu_drift << ' '
    << mark(c.phi_mu_drift <= Certificate::mass_tol) << '\n'
    << "phi in (0,1)           " << mark(c.phi_in_bounds()) << " [" << c.min_phi << ", "
    << c.max_phi << "]\n"
    << "c range                [" << c.min_c << ", " << c.max_c << "]\n"
    << "newton iterations      max " << c.max_newton_iters << ", total " << c.total_newton_iters
    << '\n';
  return o.str();
}

struct RunOptions {
  long diag_every = 1;
  long dump_every = 0;  // 0: initial and final dumps only
  std::optional<std::filesystem::path> out_dir;  // nothing is written without one
  bool keep_rows = true;
  // called with every state, the initial one included
  std::function<void(const SimState&)> on_state;
};

struct RunResult {
  SimState final_state;
  Certificate certificate;
  std::vector<TimeSeriesRow> rows;
  std::optional<std::string> failure;  // solver failure message
  long failed_step = -1;
};

inline TimeSeriesRow make_row(const PeriodicMesh& mesh, const SimState& s,
                              const EnergyReport& e, const ModelParams& p, int iters) {
  TimeSeriesRow r;
  r.step = s.step;
  r.time = s.time;
  r.energy = e;
  r.mass = masses(mesh, s, p);
  r.ext = extrema(s);
  r.newton_iters = iters;
  return r;
}

inline std::string dump_stem(long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fields_%06ld", step);
  return buf;
}

/// Runs n_steps of the scheme from `initial`, auditing every step. A Newton
/// failure ends the run early and is reported in the result; I/O errors throw.
inline RunResult simulate(const PeriodicMesh& mesh, const ModelParams& p,
                          const NewtonSettings& newton, const SimState& initial,
                          long n_steps, const RunOptions& opt = {}) {
  if (n_steps < 0) throw ConfigError("simulate: negative step count");
  if (opt.diag_every < 1 || opt.dump_every < 0) throw ConfigError("simulate: bad cadence");
  Stepper stepper(mesh, p, newton);

  std::optional<TimeSeriesWriter> ts;
  auto dump = [&](const SimState& s) {
    if (!opt.out_dir) return;
    const auto stem = *opt.out_dir / dump_stem(s.step);
    write_vtk(stem.string() + ".vtk", mesh, s);
    write_field_csv(stem.string() + ".csv", mesh, s);
  };
  if (opt.out_dir) ts.emplace(*opt.out_dir / "timeseries.csv");

  RunResult res;
  Certificate& cert = res.certificate;
  auto track = [&](const TimeSeriesRow& r, bool record) {
    cert.min_phi = std::min(cert.min_phi, r.ext.min_phi);
    cert.max_phi = std::max(cert.max_phi, r.ext.max_phi);
    cert.min_c = std::min(cert.min_c, r.ext.min_c);
    cert.max_c = std::max(cert.max_c, r.ext.max_c);
    if (record) {
      if (ts) ts->write(r);
      if (opt.keep_rows) res.rows.push_back(r);
    }
  };

  SimState state = initial;
  EnergyReport e_prev = discrete_energy(mesh, state, p);
  const Masses mass0 = masses(mesh, state, p);
  cert.energy_initial = cert.energy_final = e_prev.total;
  track(make_row(mesh, state, e_prev, p, 0), true);
  if (opt.on_state) opt.on_state(state);
  dump(state);

  for (long n = 0; n < n_steps; ++n) {
    StepStats st;
    SimState next;
    try {
      next = stepper.advance(state, &st);
    } catch (const SolverError& err) {
      res.failure = err.what();
      res.failed_step = state.step + 1;
      break;
    } catch (const SingularMatrix& err) {
      res.failure = err.what();
      res.failed_step = state.step + 1;
      break;
    }
    const EnergyReport e = step_report(mesh, state, next, p);
    const double scale = 1.0 + std::abs(e_prev.total);
    cert.max_energy_excess = std::max(
        cert.max_energy_excess,
        (e.total - e_prev.total + e.dissipation_m + e.dissipation_g) / scale);
    cert.max_energy_increase = std::max(cert.max_energy_increase, (e.total - e_prev.total) / scale);
    cert.min_dissipation = std::min({cert.min_dissipation, e.dissipation_m, e.dissipation_g});
    cert.max_newton_iters = std::max(cert.max_newton_iters, st.iterations);
    cert.total_newton_iters += st.iterations;
    cert.steps = n + 1;
    cert.energy_final = e.total;

    const bool last = n + 1 == n_steps;
    const bool record = (next.step % opt.diag_every == 0) || last;
    TimeSeriesRow row = make_row(mesh, next, e, p, st.iterations);
    cert.c_mass_drift = std::max(cert.c_mass_drift, std::abs(row.mass.c_mass - mass0.c_mass) /
                                                        (1.0 + std::abs(mass0.c_mass)));
    cert.phi_mu_drift =
        std::max(cert.phi_mu_drift, std::abs(row.mass.phi_mu_combo - mass0.phi_mu_combo) /
                                        (1.0 + std::abs(mass0.phi_mu_combo)));
    track(row, record);
    if (opt.on_state) opt.on_state(next);
    if ((opt.dump_every > 0 && next.step % opt.dump_every == 0) || last) dump(next);
    state = std::move(next);
    e_prev = e;
  }
  res.final_state = std::move(state);
  return res;
}

inline RunResult run_config(const RunConfig& cfg, bool write_outputs = true) {
  cfg.validate();
  const PeriodicMesh mesh(cfg.params.M, cfg.params.L);
  const SimState init = initial_state(mesh, cfg.init, cfg.seed, cfg.params);
  RunOptions opt;
  opt.diag_every = cfg.diag_every;
  opt.dump_every = cfg.dump_every;
  if (write_outputs) {
    opt.out_dir = cfg.out_dir;
    write_text_file(std::filesystem::path(cfg.out_dir) / "config.resolved.txt",
                    resolved_config_text(cfg));
  }
  return simulate(mesh, cfg.params, cfg.newton, init, cfg.steps(), opt);
}

// ---------------------------------------------------------------- convergence

struct ConvergenceResult {
  std::vector<ErrorSample> samples;  // coarse runs, largest τ first
  std::optional<RateTable> rates;    // absent with fewer than two samples
  std::vector<std::pair<double, Certificate>> certificates;  // reference first
  std::optional<std::string> failure;
};

inline long steps_for(double t_final, double tau) {
  const double n = std::round(t_final / tau);
  if (n < 1.0 || std::abs(n * tau - t_final) > 1e-12 * std::max(1.0, t_final))
    throw ConfigError("final time is not an integer multiple of tau = " + detail::fmt17(tau));
  return static_cast<long>(n);
}

inline const std::vector<double>& default_coarse_taus() {
  static const std::vector<double> taus{64e-4, 32e-4, 16e-4, 8e-4, 4e-4, 2e-4};
  return taus;
}

/// Errors at t_final of coarse runs against a fine reference run, all started
/// from the same seeded initial datum.
inline ConvergenceResult convergence_study(const RunConfig& cfg, double t_final,
                                           double tau_ref, const std::vector<double>& taus,
                                           const std::function<void(const std::string&)>& log = {}) {
  cfg.validate();
  const PeriodicMesh mesh(cfg.params.M, cfg.params.L);
  ConvergenceResult out;
  auto run_with = [&](double tau) -> std::optional<SimState> {
    ModelParams p = cfg.params;
    p.tau = tau;
    p.validate();
    const long n = steps_for(t_final, tau);
    const SimState init = initial_state(mesh, cfg.init, cfg.seed, p);
    RunOptions opt;
    opt.keep_rows = false;
    auto r = simulate(mesh, p, cfg.newton, init, n, opt);
    out.certificates.emplace_back(tau, r.certificate);
    if (r.failure) {
      out.failure = "tau = " + detail::fmt17(tau) + ": " + *r.failure;
      return std::nullopt;
    }
    if (log) log("tau = " + detail::fmt17(tau) + " done (" + std::to_string(n) + " steps)");
    return std::move(r.final_state);
  };
  for (double tau : taus) steps_for(t_final, tau);  // validate all before running

  const auto ref = run_with(tau_ref);
  if (!ref) return out;
  for (double tau : taus) {
    if (tau == tau_ref) continue;  // zero error row
    const auto s = run_with(tau);
    if (!s) break;
    out.samples.push_back({tau, l2_error(mesh, s->phi, ref->phi), l2_error(mesh, s->c, ref->c)});
  }
  if (out.samples.size() >= 2) out.rates = convergence_rates(out.samples);
  return out;
}

inline std::string rate_table_csv(const RateTable& t) {
  using detail::fmt17;
  std::string s = "tau,err_phi,rate_phi,err_c,rate_c\n";
  for (const auto& r : t.rows) {
    s += fmt17(r.tau) + ',' + fmt17(r.err_phi) + ',' + (r.rate_phi ? fmt17(*r.rate_phi) : "") +
         ',' + fmt17(r.err_c) + ',' + (r.rate_c ? fmt17(*r.rate_c) : "") + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------- min-c

struct MinCResult {
  std::vector<int> meshes;
  std::vector<double> times;
  // cells[time][mesh]; absent where the run failed before that time
  std::vector<std::vector<std::optional<double>>> cells;
  std::vector<std::optional<std::string>> failures;  // per mesh
  std::vector<Certificate> certificates;             // per mesh
};

inline MinCResult min_c_study(const RunConfig& cfg, const std::vector<int>& meshes,
                              const std::vector<double>& times,
                              const std::function<void(const std::string&)>& log = {}) {
  cfg.validate();
  if (meshes.empty() || times.empty()) throw ConfigError("min-c: need meshes and times");
  MinCResult out;
  out.meshes = meshes;
  out.times = times;
  out.cells.assign(times.size(), std::vector<std::optional<double>>(meshes.size()));
  std::vector<long> at;
  for (double t : times) at.push_back(steps_for(t, cfg.params.tau));
  const long n_steps = *std::max_element(at.begin(), at.end());
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    ModelParams p = cfg.params;
    p.M = meshes[k];
    p.validate();
    const PeriodicMesh mesh(p.M, p.L);
    const SimState init = initial_state(mesh, cfg.init, cfg.seed, p);
    RunOptions opt;
    opt.keep_rows = false;
    opt.on_state = [&](const SimState& s) {
      for (std::size_t i = 0; i < at.size(); ++i)
        if (s.step == at[i]) out.cells[i][k] = *std::min_element(s.c.begin(), s.c.end());
    };
    auto r = simulate(mesh, p, cfg.newton, init, n_steps, opt);
    out.failures.push_back(r.failure);
    out.certificates.push_back(r.certificate);
    if (log)
      log("mesh " + std::to_string(p.M) + (r.failure ? " FAILED: " + *r.failure : " done"));
  }
  return out;
}

inline std::string min_c_csv(const MinCResult& r) {
  std::string s = "time";
  for (int m : r.meshes) s += ",M" + std::to_string(m);
  s += '\n';
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    s += detail::fmt17(r.times[i]);
    for (const auto& cell : r.cells[i]) s += ',' + (cell ? detail::fmt17(*cell) : std::string());
    s += '\n';
  }
  return s;
}

// ---------------------------------------------------------------------- sweep

enum class SweepParam { tau, delta, theta0 };

inline SweepParam parse_sweep_param(std::string_view s) {
  if (s == "tau") return SweepParam::tau;
  if (s == "delta") return SweepParam::delta;
  if (s == "theta0") return SweepParam::theta0;
  throw ConfigError("unknown sweep parameter '" + std::string(s) + "' (tau|delta|theta0)");
}

inline std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::tau: return "tau";
    case SweepParam::delta: return "delta";
    case SweepParam::theta0: return "theta0";
  }
  return "?";
}

struct SweepEntry {
  double value = 0.0;
  RunResult run;
  bool phi_exceeded_one() const { return run.certificate.max_phi > 1.0; }
};

/// One run per value, same seed and initial-data spec. With a τ sweep the
/// final time is held fixed. Runs write under out_dir/<param>_<value>/ when
/// write_outputs is set.
inline std::vector<SweepEntry> sweep(const RunConfig& cfg, SweepParam param,
                                     const std::vector<double>& values, bool write_outputs,
                                     const std::function<void(const std::string&)>& log = {}) {
  cfg.validate();
  if (values.empty()) throw ConfigError("sweep: no values");
  const double t_final = cfg.final_time();
  std::vector<SweepEntry> out;
  for (double v : values) {
    RunConfig c = cfg;
    switch (param) {
      case SweepParam::tau:
        c.params.tau = v;
        c.n_steps.reset();
        c.t_final = t_final;
        break;
      case SweepParam::delta: c.params.delta = v; break;
      case SweepParam::theta0: c.params.theta0 = v; break;
    }
    c.out_dir = (std::filesystem::path(cfg.out_dir) / (to_string(param) + "_" + detail::fmt17(v)))
                    .string();
    SweepEntry e;
    e.value = v;
    try {
      c.validate();
      e.run = run_config(c, write_outputs);
    } catch (const ConfigError& err) {
      e.run.failure = err.what();
    } catch (const DomainError& err) {
      e.run.failure = err.what();
    }
    if (log) log(to_string(param) + " = " + detail::fmt17(v) + (e.run.failure ? " FAILED" : " done"));
    out.push_back(std::move(e));
  }
  return out;
}

inline std::string sweep_csv(SweepParam param, const std::vector<SweepEntry>& entries) {
  using detail::fmt17;
  std::string s = to_string(param) +
                  ",steps,energy_initial,energy_final,max_energy_excess,energy_nonincreasing,"
                  "min_phi,max_phi,phi_exceeded_one,min_c,c_mass_drift,failed\n";
  for (const auto& e : entries) {
    const auto& c = e.run.certificate;
    s += fmt17(e.value) + ',' + std::to_string(c.steps) + ',' + fmt17(c.energy_initial) + ',' +
         fmt17(c.energy_final) + ',' + fmt17(c.max_energy_excess) + ',' +
         (c.energy_nonincreasing() ? "1" : "0") + ',' + fmt17(c.min_phi) + ',' +
         fmt17(c.max_phi) + ',' + (e.phi_exceeded_one() ? "1" : "0") + ',' + fmt17(c.min_c) +
         ',' + fmt17(c.c_mass_drift) + ',' + (e.run.failure ? "1" : "0") + '\n';
  }
  return s;
}

}  // namespace lch
