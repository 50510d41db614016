#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "lch/error.hpp"

namespace lch {

// Diffusivity g(c) of the nutrient flux. Every kind satisfies g ≥ 0 and g(0) = 0.
enum class GKind { quadratic };

inline GKind parse_g_kind(std::string_view s) {
  if (s == "quadratic") return GKind::quadratic;
  throw ConfigError("unknown diffusivity kind '" + std::string(s) +
                    "' (supported: quadratic)");
}

inline std::string to_string(GKind k) {
  switch (k) {
    case GKind::quadratic:
      return "quadratic";
  }
  return "?";
}

/// Physical and numerical constants of one simulation.
struct ModelParams {
  double eps = 0.15;     // interface width ε
  double theta0 = 7.0;   // Flory–Huggins interaction θ₀
  double sigma = 0.1;    // stabilization σ
  double delta = 1e-3;   // regularization δ; 0 selects the singular logarithm
  double tau = 1e-3;     // time step
  GKind g_kind = GKind::quadratic;
  double L = 2.0 * std::numbers::pi;
  int M = 60;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string(name) + " must be positive and finite");
    };
    positive(eps, "eps");
    positive(theta0, "theta0");
    positive(sigma, "sigma");
    positive(tau, "tau");
    positive(L, "L");
    if (!(delta >= 0.0 && delta < 0.5))
      throw ConfigError("delta must lie in [0, 1/2)");
    if (M < 2) throw ConfigError("mesh must have at least 2 cells per side");
  }
};

namespace physics {

inline void require_open_unit(double phi, const char* where) {
  if (!(phi > 0.0 && phi < 1.0))
    throw DomainError(std::string(where) + ": phi = " + std::to_string(phi) +
                      " outside (0,1)");
}

inline void require_delta(double delta, const char* where) {
  if (!(delta >= 0.0 && delta < 0.5))
    throw DomainError(std::string(where) + ": delta = " + std::to_string(delta) +
                      " outside [0, 1/2)");
}

// Convex part of the Flory–Huggins potential and its derivative.
inline double F1(double phi) {
  require_open_unit(phi, "F1");
  return phi * std::log(phi) + (1.0 - phi) * std::log(1.0 - phi);
}

inline double f1(double phi) {
  require_open_unit(phi, "f1");
  return std::log(phi) - std::log1p(-phi);
}

inline double f1_prime(double phi) {
  require_open_unit(phi, "f1_prime");
  return 1.0 / phi + 1.0 / (1.0 - phi);
}

// Concave part, F = F1 - F2.
inline double F2(double phi, double theta0) { return 0.5 * theta0 * phi * (phi - 1.0); }
inline double f2(double phi, double theta0) { return 0.5 * theta0 * (2.0 * phi - 1.0); }

inline double F(double phi, double theta0) { return F1(phi) - F2(phi, theta0); }

inline double f(double phi, double theta0) {
  require_open_unit(phi, "f");
  return std::log(phi / (1.0 - phi)) + 0.5 * theta0 * (1.0 - 2.0 * phi);
}

/// C¹ regularization of F1: the logarithms are continued by quadratics
/// outside [δ, 1-δ], so the potential is defined on all of ℝ. δ = 0 falls
/// back to the singular F1.
inline double F1_delta(double phi, double delta) {
  require_delta(delta, "F1_delta");
  if (delta == 0.0) return F1(phi);
  const double ld = std::log(delta);
  if (phi <= delta) {
    const double s = phi - delta;
    return (1.0 - phi) * std::log1p(-phi) + s * s / (2.0 * delta) + (ld + 1.0) * s +
           delta * ld;
  }
  if (phi >= 1.0 - delta) {
    const double s = phi - 1.0 + delta;
    return phi * std::log(phi) + s * s / (2.0 * delta) - (ld + 1.0) * s + delta * ld;
  }
  return phi * std::log(phi) + (1.0 - phi) * std::log1p(-phi);
}

inline double f1_delta(double phi, double delta) {
  require_delta(delta, "f1_delta");
  if (delta == 0.0) return f1(phi);
  if (phi <= delta) return (phi - delta) / delta + std::log(delta) - std::log1p(-phi);
  if (phi >= 1.0 - delta) return (phi - 1.0 + delta) / delta + std::log(phi) - std::log(delta);
  return std::log(phi) - std::log1p(-phi);
}

inline double f1_delta_prime(double phi, double delta) {
  require_delta(delta, "f1_delta_prime");
  if (delta == 0.0) return f1_prime(phi);
  if (phi <= delta) return 1.0 / delta + 1.0 / (1.0 - phi);
  if (phi >= 1.0 - delta) return 1.0 / delta + 1.0 / phi;
  return 1.0 / phi + 1.0 / (1.0 - phi);
}

// Nutrient energy h(φ,c) = c²/2 + c(1-φ) = h1(c) - h2(φ,c).
inline double h(double phi, double c) { return 0.5 * c * c + c * (1.0 - phi); }
inline double h_c(double phi, double c) { return c + 1.0 - phi; }
inline double h_phi(double /*phi*/, double c) { return -c; }
inline double h1(double c) { return 0.5 * c * c; }
inline double h2(double phi, double c) { return c * (phi - 1.0); }

// Degenerate mobility.
inline double m(double phi) {
  const double q = phi * (1.0 - phi);
  return q * q;
}

inline double g(double c, GKind kind = GKind::quadratic) {
  switch (kind) {
    case GKind::quadratic:
      return c * c;
  }
  throw DomainError("g: unsupported diffusivity kind");
}

struct Mat2 {
  double a11, a12, a21, a22;

  double det() const noexcept { return a11 * a22 - a12 * a21; }
  double trace() const noexcept { return a11 + a22; }
  double quad(double x, double y) const noexcept {
    return x * (a11 * x + a12 * y) + y * (a21 * x + a22 * y);
  }
};

/// Mobility of the gradient-flow form ∂ₜ(φ,c) = div(M ∇(μ, h_c)).
inline Mat2 mobility_matrix(double phi, double c, GKind kind = GKind::quadratic) {
  const double mo = m(phi);
  return {mo, -c * mo, -c * mo, g(c, kind) + c * c * mo};
}

}  // namespace physics
}  // namespace lch
