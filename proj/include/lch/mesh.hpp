#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lch/error.hpp"

namespace lch {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Identifies the mesh a nodal field lives on. Two meshes built from the same
// (M, L) are identical, so the pair is a sufficient identity.
struct MeshTag {
  int cells_per_side = 0;
  double side_length = 0.0;

  friend bool operator==(const MeshTag&, const MeshTag&) = default;
};

/// Uniform periodic triangulation of the square torus [0,L)².
///
/// Node (i,j) sits at (iL/M, jL/M) and has index i + M*j. Every square cell
/// (i,j) is cut along its rising diagonal into the triangles
/// {(i,j),(i+1,j),(i+1,j+1)} and {(i,j),(i+1,j+1),(i,j+1)}, indices mod M.
/// Element geometry is stored unwrapped, so per-triangle gradients of the
/// P1 hat functions are exact and independent of the wrap-around.
class PeriodicMesh {
 public:
  using Triangle = std::array<std::size_t, 3>;
  using Gradients = std::array<Point2, 3>;

  PeriodicMesh(int cells_per_side, double side_length)
      : m_(cells_per_side), l_(side_length) {
    if (cells_per_side < 2)
      throw DomainError("PeriodicMesh: need at least 2 cells per side, got " +
                        std::to_string(cells_per_side));
    if (!(side_length > 0.0) || !std::isfinite(side_length))
      throw DomainError("PeriodicMesh: side length must be positive and finite");

    h_ = l_ / m_;
    const auto M = static_cast<std::size_t>(m_);
    coords_.reserve(M * M);
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t i = 0; i < M; ++i)
        coords_.push_back({static_cast<double>(i) * h_, static_cast<double>(j) * h_});

    triangles_.reserve(2 * M * M);
    grads_.reserve(2 * M * M);
    const double hinv = 1.0 / h_;
    for (std::size_t j = 0; j < M; ++j) {
      for (std::size_t i = 0; i < M; ++i) {
        const std::size_t ip = (i + 1) % M, jp = (j + 1) % M;
        const std::size_t n00 = i + M * j, n10 = ip + M * j;
        const std::size_t n11 = ip + M * jp, n01 = i + M * jp;
        // lower-right: (0,0),(h,0),(h,h)
        triangles_.push_back({n00, n10, n11});
        grads_.push_back({Point2{-hinv, 0.0}, Point2{hinv, -hinv}, Point2{0.0, hinv}});
        // upper-left: (0,0),(h,h),(0,h)
        triangles_.push_back({n00, n11, n01});
        grads_.push_back({Point2{0.0, -hinv}, Point2{hinv, 0.0}, Point2{-hinv, hinv}});
      }
    }
  }

  int cells_per_side() const noexcept { return m_; }
  double side_length() const noexcept { return l_; }
  double spacing() const noexcept { return h_; }
  std::size_t node_count() const noexcept { return coords_.size(); }
  std::size_t triangle_count() const noexcept { return triangles_.size(); }
  MeshTag tag() const noexcept { return {m_, l_}; }

  std::span<const Point2> node_coords() const noexcept { return coords_; }
  std::span<const Triangle> triangles() const noexcept { return triangles_; }
  const Triangle& triangle(std::size_t t) const { return triangles_.at(t); }

  // Gradients of the three local hat functions on triangle t (constant per element).
  const Gradients& gradients(std::size_t t) const { return grads_.at(t); }

  double triangle_area(std::size_t) const noexcept { return 0.5 * h_ * h_; }

  std::size_t node_index(std::size_t i, std::size_t j) const noexcept {
    const auto M = static_cast<std::size_t>(m_);
    return (i % M) + M * (j % M);
  }

 private:
  int m_;
  double l_;
  double h_ = 0.0;
  std::vector<Point2> coords_;
  std::vector<Triangle> triangles_;
  std::vector<Gradients> grads_;
};

namespace detail {

// Nodes of the (unwrapped) rectangle [i0,i1) x [j0,j1): both halves first,
// then the grid line separating them.
inline void dissect_rectangle(const PeriodicMesh& mesh, int i0, int i1, int j0, int j1,
                              std::vector<std::size_t>& out) {
  const int w = i1 - i0, h = j1 - j0;
  if (w <= 0 || h <= 0) return;
  auto node = [&](int i, int j) {
    return mesh.node_index(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  };
  if (w * h <= 16) {
    for (int j = j0; j < j1; ++j)
      for (int i = i0; i < i1; ++i) out.push_back(node(i, j));
    return;
  }
  if (w >= h) {
    const int im = i0 + w / 2;
    dissect_rectangle(mesh, i0, im, j0, j1, out);
    dissect_rectangle(mesh, im + 1, i1, j0, j1, out);
    for (int j = j0; j < j1; ++j) out.push_back(node(im, j));
  } else {
    const int jm = j0 + h / 2;
    dissect_rectangle(mesh, i0, i1, j0, jm, out);
    dissect_rectangle(mesh, i0, i1, jm + 1, j1, out);
    for (int i = i0; i < i1; ++i) out.push_back(node(i, jm));
  }
}

}  // namespace detail

/// Geometric nested-dissection order of the mesh nodes (position k holds the
/// node eliminated k-th). Grid lines are vertex separators for the P1 stencil
/// of this triangulation; the torus is first cut open along the columns 0 and
/// M/2, then the two rectangles are bisected recursively.
inline std::vector<std::size_t> nested_dissection_order(const PeriodicMesh& mesh) {
  const int M = mesh.cells_per_side();
  const int half = M / 2;
  std::vector<std::size_t> order;
  order.reserve(mesh.node_count());
  detail::dissect_rectangle(mesh, 1, half, 0, M, order);
  detail::dissect_rectangle(mesh, half + 1, M, 0, M, order);
  for (int j = 0; j < M; ++j)
    order.push_back(mesh.node_index(static_cast<std::size_t>(half), static_cast<std::size_t>(j)));
  for (int j = 0; j < M; ++j) order.push_back(mesh.node_index(0, static_cast<std::size_t>(j)));
  return order;
}

inline PeriodicMesh build_mesh(int cells_per_side,
                               double side_length = 2.0 * std::numbers::pi) {
  return PeriodicMesh(cells_per_side, side_length);
}

/// One scalar degree of freedom per mesh node.
class NodalField {
 public:
  NodalField() = default;
  explicit NodalField(const PeriodicMesh& mesh, double value = 0.0)
      : values_(mesh.node_count(), value), tag_(mesh.tag()) {}
  NodalField(const PeriodicMesh& mesh, std::vector<double> values)
      : values_(std::move(values)), tag_(mesh.tag()) {
    if (values_.size() != mesh.node_count())
      throw MeshMismatch("NodalField: " + std::to_string(values_.size()) +
                         " values for a mesh with " +
                         std::to_string(mesh.node_count()) + " nodes");
  }

  std::size_t size() const noexcept { return values_.size(); }
  const MeshTag& tag() const noexcept { return tag_; }

  double& operator[](std::size_t j) noexcept { return values_[j]; }
  double operator[](std::size_t j) const noexcept { return values_[j]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool all_finite() const noexcept {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const NodalField&, const NodalField&) = default;

 private:
  std::vector<double> values_;
  MeshTag tag_;
};

inline void require_same_mesh(const NodalField& u, const NodalField& v,
                              const char* where) {
  if (u.tag() != v.tag() || u.size() != v.size())
    throw MeshMismatch(std::string(where) + ": fields live on different meshes");
}

inline void require_on_mesh(const NodalField& u, const PeriodicMesh& mesh,
                            const char* where) {
  if (u.tag() != mesh.tag() || u.size() != mesh.node_count())
    throw MeshMismatch(std::string(where) + ": field does not live on this mesh");
}

}  // namespace lch
