#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lch/config.hpp"
#include "lch/error.hpp"
#include "lch/experiments.hpp"
#include "lch/io.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kIo = 4 };

// Flags shared by every subcommand; unset ones leave the config alone.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<long> steps;
  std::optional<double> tmax, eps, theta0, sigma, delta, tau;
  std::optional<int> mesh;
  std::vector<std::string> sets;  // --set key=value

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key = value config file");
    app->add_option("--seed", seed, "RNG seed for the initial data");
    app->add_option("--out", out, "output directory");
    app->add_option("--steps", steps, "number of time steps");
    app->add_option("--tmax", tmax, "final time");
    app->add_option("--eps", eps, "interface width");
    app->add_option("--theta0", theta0, "Flory-Huggins interaction");
    app->add_option("--sigma", sigma, "stabilization");
    app->add_option("--delta", delta, "log regularization (0: singular)");
    app->add_option("--tau", tau, "time step");
    app->add_option("--mesh", mesh, "cells per side");
    app->add_option("--set", sets, "any config key, as key=value (repeatable)");
  }

  void apply(lch::RunConfig& cfg) const {
    if (!config_path.empty()) lch::apply_config_file(cfg, config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw lch::ConfigError("--set expects key=value, got '" + kv + "'");
      lch::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    if (out) cfg.out_dir = *out;
    if (steps) cfg.n_steps = *steps;
    if (tmax) cfg.t_final = *tmax;
    if (eps) cfg.params.eps = *eps;
    if (theta0) cfg.params.theta0 = *theta0;
    if (sigma) cfg.params.sigma = *sigma;
    if (delta) cfg.params.delta = *delta;
    if (tau) cfg.params.tau = *tau;
    if (mesh) cfg.params.M = *mesh;
    cfg.validate();
  }
};

void log_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

std::filesystem::path out_path(const lch::RunConfig& cfg, const char* name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

int cmd_run(const lch::RunConfig& cfg) {
  std::printf("run: M=%d tau=%g steps=%ld -> %s\n", cfg.params.M, cfg.params.tau, cfg.steps(),
              cfg.out_dir.c_str());
  const auto r = lch::run_config(cfg);
  const std::string cert = lch::describe(r.certificate);
  lch::write_text_file(out_path(cfg, "certificate.txt"), cert);
  std::printf("%s", cert.c_str());
  if (r.failure) {
    std::fprintf(stderr, "solver failure at step %ld: %s\n", r.failed_step, r.failure->c_str());
    return kSolver;
  }
  return kOk;
}

int cmd_convergence(const lch::RunConfig& cfg, double tau_ref, const std::vector<double>& taus) {
  const double t_final = cfg.t_final.value_or(0.064);
  lch::write_text_file(out_path(cfg, "config.resolved.txt"), lch::resolved_config_text(cfg));
  const auto r = lch::convergence_study(cfg, t_final, tau_ref, taus, log_line);
  if (r.rates) {
    const auto csv = lch::rate_table_csv(*r.rates);
    lch::write_text_file(out_path(cfg, "rates.csv"), csv);
    std::printf("%s", csv.c_str());
  }
  bool energy = true;
  for (const auto& [tau, c] : r.certificates) energy = energy && c.energy_ok();
  std::printf("energy inequality on all runs: %s\n", energy ? "yes" : "NO");
  if (r.failure) {
    std::fprintf(stderr, "convergence study aborted: %s\n", r.failure->c_str());
    return kSolver;
  }
  return kOk;
}

int cmd_min_c(const lch::RunConfig& cfg, const std::vector<int>& meshes,
              const std::vector<double>& times) {
  lch::write_text_file(out_path(cfg, "config.resolved.txt"), lch::resolved_config_text(cfg));
  const auto r = lch::min_c_study(cfg, meshes, times, log_line);
  const auto csv = lch::min_c_csv(r);
  lch::write_text_file(out_path(cfg, "min_c.csv"), csv);
  std::printf("%s", csv.c_str());
  int code = kOk;
  for (std::size_t k = 0; k < r.failures.size(); ++k)
    if (r.failures[k]) {
      std::fprintf(stderr, "mesh %d: %s\n", r.meshes[k], r.failures[k]->c_str());
      code = kSolver;
    }
  return code;
}

int cmd_sweep(const lch::RunConfig& cfg, const std::string& param,
              const std::vector<double>& values) {
  const auto p = lch::parse_sweep_param(param);
  lch::write_text_file(out_path(cfg, "config.resolved.txt"), lch::resolved_config_text(cfg));
  const auto entries = lch::sweep(cfg, p, values, true, log_line);
  const auto csv = lch::sweep_csv(p, entries);
  lch::write_text_file(out_path(cfg, ("sweep_" + param + ".csv").c_str()), csv);
  std::printf("%s", csv.c_str());
  int code = kOk;
  for (const auto& e : entries) {
    if (e.phi_exceeded_one())
      std::printf("%s = %g: max phi exceeded 1 (%.6g)\n", param.c_str(), e.value,
                  e.run.certificate.max_phi);
    if (e.run.failure) {
      std::fprintf(stderr, "%s = %g: %s\n", param.c_str(), e.value, e.run.failure->c_str());
      code = kSolver;
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cahn-Hilliard / nutrient cross-diffusion solver on a periodic square"};
  app.require_subcommand(1);

  Overrides run_o, conv_o, minc_o, sweep_o;
  auto* run = app.add_subcommand("run", "single simulation with time series and field dumps");
  run_o.attach(run);

  auto* conv = app.add_subcommand("convergence", "temporal convergence against a fine reference");
  conv_o.attach(conv);
  double tau_ref = 1e-4;
  std::vector<double> taus = lch::default_coarse_taus();
  conv->add_option("--tau-ref", tau_ref, "reference time step")->capture_default_str();
  conv->add_option("--taus", taus, "coarse time steps")->delimiter(',');

  auto* minc = app.add_subcommand("min-c", "minimum of c over nodes for several meshes and times");
  minc_o.attach(minc);
  std::vector<int> meshes{30, 60, 90};
  std::vector<double> times{0.2, 0.4, 0.6};
  minc->add_option("--meshes", meshes, "cells per side")->delimiter(',');
  minc->add_option("--times", times, "sampling times")->delimiter(',');

  auto* sw = app.add_subcommand("sweep", "one run per parameter value");
  sweep_o.attach(sw);
  std::string param;
  std::vector<double> values;
  sw->add_option("--param", param, "tau | delta | theta0")->required();
  sw->add_option("--values", values, "comma-separated values")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    lch::RunConfig cfg;
    if (*run) {
      run_o.apply(cfg);
      return cmd_run(cfg);
    }
    if (*conv) {
      conv_o.apply(cfg);
      return cmd_convergence(cfg, tau_ref, taus);
    }
    if (*minc) {
      cfg.params.tau = 1e-4;
      cfg.init.c = {0.001, 0.0};
      minc_o.apply(cfg);
      return cmd_min_c(cfg, meshes, times);
    }
    sweep_o.apply(cfg);
    return cmd_sweep(cfg, param, values);
  } catch (const lch::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const lch::DomainError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfig;
  } catch (const lch::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kIo;
  } catch (const lch::SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolver;
  } catch (const lch::SingularMatrix& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return kSolver;
  }
}
