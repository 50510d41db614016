#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lch/error.hpp"
#include "lch/physics.hpp"
#include "lch/stepper.hpp"

namespace lch {

/// value = scale·u + offset, u uniform in [0,1)
struct AffineUniform {
  double scale = 0.0;
  double offset = 0.0;
};

enum class MuInit { consistent, zero };

inline MuInit parse_mu_init(std::string_view s) {
  if (s == "consistent") return MuInit::consistent;
  if (s == "zero") return MuInit::zero;
  throw ConfigError("unknown mu0 mode '" + std::string(s) + "' (consistent|zero)");
}

inline std::string to_string(MuInit m) { return m == MuInit::zero ? "zero" : "consistent"; }

struct InitialSpec {
  AffineUniform phi{0.08, 0.2};
  AffineUniform c{0.1, 0.4};
  MuInit mu0 = MuInit::consistent;
};

/// Everything a run needs. Later sources override earlier ones:
/// built-in defaults, subcommand presets, config file, command line.
struct RunConfig {
  ModelParams params;
  NewtonSettings newton;
  std::optional<long> n_steps;
  std::optional<double> t_final;
  std::uint64_t seed = 20240501;
  InitialSpec init;
  std::string out_dir = "out";
  long dump_every = 0;  // 0: dump only the initial and final fields
  long diag_every = 1;

  /// Number of steps implied by n_steps / t_final (5000 if neither is set).
  long steps() const {
    if (n_steps && t_final) return *n_steps;
    if (n_steps) return *n_steps;
    if (t_final) return std::lround(*t_final / params.tau);
    return 5000;
  }

  double final_time() const { return static_cast<double>(steps()) * params.tau; }

  void validate() const {
    params.validate();
    if (n_steps && *n_steps < 0) throw ConfigError("steps must be >= 0");
    if (t_final) {
      if (!(*t_final >= 0.0) || !std::isfinite(*t_final))
        throw ConfigError("tmax must be finite and >= 0");
      const double n = std::round(*t_final / params.tau);
      if (std::abs(n * params.tau - *t_final) > 1e-12 * std::max(1.0, *t_final))
        throw ConfigError("tmax is not an integer multiple of tau");
      if (n_steps && static_cast<double>(*n_steps) != n)
        throw ConfigError("steps * tau does not match tmax");
    }
    if (!(init.phi.scale >= 0.0) || !(init.c.scale >= 0.0))
      throw ConfigError("initial-data scales must be >= 0");
    for (double v : {init.phi.scale, init.phi.offset, init.c.scale, init.c.offset})
      if (!std::isfinite(v)) throw ConfigError("initial-data spec must be finite");
    if (dump_every < 0) throw ConfigError("dump_every must be >= 0");
    if (diag_every < 1) throw ConfigError("diag_every must be >= 1");
    if (!(newton.abs_tol > 0.0) || !(newton.rel_tol > 0.0) || newton.max_iter < 1 ||
        newton.max_halvings < 0)
      throw ConfigError("invalid Newton settings");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("bad number for '" + key + "': '" + v + "'");
  return d;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("bad integer for '" + key + "': '" + v + "'");
  return n;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  if (v.empty() || v[0] == '-') throw ConfigError("bad seed for '" + key + "': '" + v + "'");
  const unsigned long long n = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError("bad seed for '" + key + "': '" + v + "'");
  return n;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are errors.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_integer;
  auto& p = cfg.params;
  if (key == "eps") p.eps = parse_double(key, value);
  else if (key == "theta0") p.theta0 = parse_double(key, value);
  else if (key == "sigma") p.sigma = parse_double(key, value);
  else if (key == "delta") p.delta = parse_double(key, value);
  else if (key == "tau") p.tau = parse_double(key, value);
  else if (key == "g") p.g_kind = parse_g_kind(value);
  else if (key == "L") p.L = parse_double(key, value);
  else if (key == "mesh") {
    const auto m = parse_integer(key, value);
    if (m < 2 || m > 100000) throw ConfigError("mesh must be in [2, 100000]");
    p.M = static_cast<int>(m);
  } else if (key == "steps") cfg.n_steps = parse_integer(key, value);
  else if (key == "tmax") cfg.t_final = parse_double(key, value);
  else if (key == "seed") cfg.seed = detail::parse_u64(key, value);
  else if (key == "phi_scale") cfg.init.phi.scale = parse_double(key, value);
  else if (key == "phi_offset") cfg.init.phi.offset = parse_double(key, value);
  else if (key == "c_scale") cfg.init.c.scale = parse_double(key, value);
  else if (key == "c_offset") cfg.init.c.offset = parse_double(key, value);
  else if (key == "mu0") cfg.init.mu0 = parse_mu_init(value);
  else if (key == "out") cfg.out_dir = value;
  else if (key == "dump_every") cfg.dump_every = parse_integer(key, value);
  else if (key == "diag_every") cfg.diag_every = parse_integer(key, value);
  else if (key == "newton_abs_tol") cfg.newton.abs_tol = parse_double(key, value);
  else if (key == "newton_rel_tol") cfg.newton.rel_tol = parse_double(key, value);
  else if (key == "newton_max_iter") cfg.newton.max_iter = static_cast<int>(parse_integer(key, value));
  else if (key == "newton_max_halvings") cfg.newton.max_halvings = static_cast<int>(parse_integer(key, value));
  else if (key == "phi_guard") cfg.newton.phi_guard = parse_double(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Flat text format: one `key = value` per line, `#` starts a comment.
inline void apply_config_text(RunConfig& cfg, std::string_view text,
                              const std::string& origin = "config") {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    try {
      apply_setting(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

/// Every setting, fully resolved, in the same format apply_config_text reads.
inline std::string resolved_config_text(const RunConfig& cfg) {
  using detail::fmt17;
  std::ostringstream o;
  const auto& p = cfg.params;
  o << "eps = " << fmt17(p.eps) << '\n'
    << "theta0 = " << fmt17(p.theta0) << '\n'
    << "sigma = " << fmt17(p.sigma) << '\n'
    << "delta = " << fmt17(p.delta) << '\n'
    << "tau = " << fmt17(p.tau) << '\n'
    << "g = " << to_string(p.g_kind) << '\n'
    << "L = " << fmt17(p.L) << '\n'
    << "mesh = " << p.M << '\n'
    << "steps = " << cfg.steps() << '\n'
    << "tmax = " << fmt17(cfg.final_time()) << '\n'
    << "seed = " << cfg.seed << '\n'
    << "phi_scale = " << fmt17(cfg.init.phi.scale) << '\n'
    << "phi_offset = " << fmt17(cfg.init.phi.offset) << '\n'
    << "c_scale = " << fmt17(cfg.init.c.scale) << '\n'
    << "c_offset = " << fmt17(cfg.init.c.offset) << '\n'
    << "mu0 = " << to_string(cfg.init.mu0) << '\n'
    << "out = " << cfg.out_dir << '\n'
    << "dump_every = " << cfg.dump_every << '\n'
    << "diag_every = " << cfg.diag_every << '\n'
    << "newton_abs_tol = " << fmt17(cfg.newton.abs_tol) << '\n'
    << "newton_rel_tol = " << fmt17(cfg.newton.rel_tol) << '\n'
    << "newton_max_iter = " << cfg.newton.max_iter << '\n'
    << "newton_max_halvings = " << cfg.newton.max_halvings << '\n'
    << "phi_guard = " << fmt17(cfg.newton.phi_guard) << '\n';
  return o.str();
}

}  // namespace lch
