#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lch/error.hpp"
#include "lch/mesh.hpp"
#include "lch/sparse.hpp"

namespace lch {

/// Lumped nodal weights β_j = ∫ p_j dx, i.e. one third of the area of every
/// incident triangle.
inline NodalField lumped_weights(const PeriodicMesh& mesh) {
  NodalField beta(mesh, 0.0);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const double third = mesh.triangle_area(t) / 3.0;
    for (std::size_t v : mesh.triangle(t)) beta[v] += third;
  }
  return beta;
}

// (u, v)_h = Σ_j β_j u_j v_j
inline double lumped_inner(const NodalField& beta, const NodalField& u,
                           const NodalField& v) {
  require_same_mesh(beta, u, "lumped_inner");
  require_same_mesh(u, v, "lumped_inner");
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += beta[j] * u[j] * v[j];
  return s;
}

inline double lumped_inner(const PeriodicMesh& mesh, const NodalField& u,
                           const NodalField& v) {
  return lumped_inner(lumped_weights(mesh), u, v);
}

/// K_w[i,j] = Σ_T w_T ∫_T ∇p_i·∇p_j dx. Triangles are visited in index order.
inline CsrMatrix weighted_stiffness(const PeriodicMesh& mesh,
                                    std::span<const double> triangle_weights) {
  if (triangle_weights.size() != mesh.triangle_count())
    throw DomainError("weighted_stiffness: " + std::to_string(triangle_weights.size()) +
                      " weights for " + std::to_string(mesh.triangle_count()) +
                      " triangles");
  const std::size_t n = mesh.node_count();
  Triplets t(n, n);
  t.entries.reserve(9 * mesh.triangle_count());
  for (std::size_t e = 0; e < mesh.triangle_count(); ++e) {
    const auto& tri = mesh.triangle(e);
    const auto& g = mesh.gradients(e);
    const double area = mesh.triangle_area(e);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        t.add(tri[a], tri[b],
              triangle_weights[e] * (area * (g[a].x * g[b].x + g[a].y * g[b].y)));
  }
  return compress(t);
}

/// Plain stiffness matrix K_ij = ∫ ∇p_i·∇p_j dx.
inline CsrMatrix stiffness_matrix(const PeriodicMesh& mesh) {
  const std::vector<double> ones(mesh.triangle_count(), 1.0);
  return weighted_stiffness(mesh, ones);
}

/// Reassembles weighted stiffness matrices on a fixed sparsity pattern.
/// Produces bitwise the same values as weighted_stiffness(): contributions are
/// added to each entry in the same triangle order.
class StiffnessAssembler {
 public:
  explicit StiffnessAssembler(const PeriodicMesh& mesh)
      : pattern_(stiffness_matrix(mesh)) {
    const std::size_t nt = mesh.triangle_count();
    slots_.resize(nt);
    local_.resize(nt);
    for (std::size_t e = 0; e < nt; ++e) {
      const auto& tri = mesh.triangle(e);
      const auto& g = mesh.gradients(e);
      const double area = mesh.triangle_area(e);
      for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
          slots_[e][3 * a + b] = pattern_.slot(tri[a], tri[b]);
          local_[e][3 * a + b] = area * (g[a].x * g[b].x + g[a].y * g[b].y);
        }
    }
  }

  const CsrMatrix& pattern() const noexcept { return pattern_; }

  // Element-local stiffness entries of triangle e, row-major over local vertices.
  const std::array<double, 9>& local(std::size_t e) const { return local_.at(e); }
  const std::array<std::size_t, 9>& slots(std::size_t e) const { return slots_.at(e); }

  CsrMatrix assemble(std::span<const double> triangle_weights) const {
    if (triangle_weights.size() != local_.size())
      throw DomainError("StiffnessAssembler: weight count mismatch");
    CsrMatrix k = pattern_;
    std::fill(k.values.begin(), k.values.end(), 0.0);
    for (std::size_t e = 0; e < local_.size(); ++e)
      for (std::size_t q = 0; q < 9; ++q)
        k.values[slots_[e][q]] += triangle_weights[e] * local_[e][q];
    return k;
  }

 private:
  CsrMatrix pattern_;
  std::vector<std::array<std::size_t, 9>> slots_;
  std::vector<std::array<double, 9>> local_;
};

/// Consistent P1 mass matrix (area/6 on the diagonal, area/12 off it, per triangle).
inline CsrMatrix consistent_mass_matrix(const PeriodicMesh& mesh) {
  const std::size_t n = mesh.node_count();
  Triplets t(n, n);
  t.entries.reserve(9 * mesh.triangle_count());
  for (std::size_t e = 0; e < mesh.triangle_count(); ++e) {
    const auto& tri = mesh.triangle(e);
    const double area = mesh.triangle_area(e);
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        t.add(tri[a], tri[b], a == b ? area / 6.0 : area / 12.0);
  }
  return compress(t);
}

// Value of the P1 interpolant at the barycenter of triangle t.
inline double triangle_average(const PeriodicMesh& mesh, const NodalField& u,
                               std::size_t t) {
  require_on_mesh(u, mesh, "triangle_average");
  if (t >= mesh.triangle_count())
    throw DomainError("triangle_average: triangle index " + std::to_string(t) +
                      " out of range");
  const auto& tri = mesh.triangle(t);
  return (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
}

// Constant gradient of the P1 interpolant of u on triangle t.
inline Point2 triangle_gradient(const PeriodicMesh& mesh, const NodalField& u,
                                std::size_t t) {
  const auto& tri = mesh.triangle(t);
  const auto& g = mesh.gradients(t);
  Point2 r;
  for (std::size_t a = 0; a < 3; ++a) {
    r.x += u[tri[a]] * g[a].x;
    r.y += u[tri[a]] * g[a].y;
  }
  return r;
}

/// Exact L² norm of the P1 interpolant, ‖u‖² = uᵀ M_c u.
///
/// Evaluated element by element rather than through an assembled matrix, so it
/// stays cheap inside convergence studies.
inline double l2_norm(const PeriodicMesh& mesh, const NodalField& u) {
  require_on_mesh(u, mesh, "l2_norm");
  double s = 0.0;
  for (std::size_t e = 0; e < mesh.triangle_count(); ++e) {
    const auto& tri = mesh.triangle(e);
    const double a = u[tri[0]], b = u[tri[1]], c = u[tri[2]];
    // area/12 * (Σ u_i² + (Σ u_i)²)
    const double sum = a + b + c;
    s += mesh.triangle_area(e) / 12.0 * (a * a + b * b + c * c + sum * sum);
  }
  return std::sqrt(s);
}

inline double l2_error(const PeriodicMesh& mesh, const NodalField& u,
                       const NodalField& v) {
  require_same_mesh(u, v, "l2_error");
  NodalField d = u;
  for (std::size_t j = 0; j < d.size(); ++j) d[j] -= v[j];
  return l2_norm(mesh, d);
}

}  // namespace lch
