#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "lch/config.hpp"
#include "lch/mesh.hpp"
#include "lch/stepper.hpp"

namespace lch {

/// Uniform double in [0,1) from the top 53 bits of one 64-bit draw.
/// Spelled out instead of std::uniform_real_distribution, whose algorithm
/// differs between standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Seeded initial data. Generator: std::mt19937_64 (MT19937-64, fully
/// specified by the standard, so the stream is identical on every platform).
/// Nodes are visited in index order i + M·j; all φ⁰ values are drawn first,
/// then all c⁰ values.
inline std::pair<NodalField, NodalField> gen_initial(const PeriodicMesh& mesh,
                                                     const InitialSpec& spec,
                                                     std::uint64_t seed) {
  if (!(spec.phi.scale >= 0.0) || !(spec.c.scale >= 0.0))
    throw ConfigError("gen_initial: scales must be >= 0");
  std::mt19937_64 rng(seed);
  NodalField phi(mesh), c(mesh);
  for (double& v : phi) v = spec.phi.scale * uniform01(rng) + spec.phi.offset;
  for (double& v : c) v = spec.c.scale * uniform01(rng) + spec.c.offset;
  return {std::move(phi), std::move(c)};
}

inline SimState initial_state(const PeriodicMesh& mesh, const InitialSpec& spec,
                              std::uint64_t seed, const ModelParams& p) {
  auto [phi, c] = gen_initial(mesh, spec, seed);
  for (double v : phi)
    if (p.delta == 0.0 && !(v > 0.0 && v < 1.0))
      throw ConfigError("initial phi must lie in (0,1) when delta = 0");
  SimState s;
  s.mu = spec.mu0 == MuInit::zero ? NodalField(mesh, 0.0) : init_mu0(mesh, phi, c, p);
  s.phi = std::move(phi);
  s.c = std::move(c);
  return s;
}

}  // namespace lch
