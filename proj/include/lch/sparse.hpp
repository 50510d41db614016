#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include "lch/error.hpp"

namespace lch {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Coordinate-format accumulator. Duplicates are allowed and summed by compress().
struct Triplets {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<Triplet> entries;

  Triplets() = default;
  Triplets(std::size_t rows, std::size_t cols) : n_rows(rows), n_cols(cols) {}

  void add(std::size_t r, std::size_t c, double v) { entries.push_back({r, c, v}); }
};

/// Compressed sparse row matrix. Column indices are sorted and unique within a row.
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }

  // Stored value at (r, c), or 0 when the entry is structurally absent.
  double at(std::size_t r, std::size_t c) const {
    const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr.at(r));
    const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr.at(r + 1));
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c) return 0.0;
    return values[static_cast<std::size_t>(it - col_idx.begin())];
  }

  // Position of (r, c) in `values`; throws if structurally absent.
  std::size_t slot(std::size_t r, std::size_t c) const {
    const auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr.at(r));
    const auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr.at(r + 1));
    const auto it = std::lower_bound(first, last, c);
    if (it == last || *it != c)
      throw DomainError("CsrMatrix::slot: entry (" + std::to_string(r) + ", " +
                        std::to_string(c) + ") is not in the sparsity pattern");
    return static_cast<std::size_t>(it - col_idx.begin());
  }

  bool same_pattern(const CsrMatrix& o) const noexcept {
    return n_rows == o.n_rows && n_cols == o.n_cols && row_ptr == o.row_ptr &&
           col_idx == o.col_idx;
  }
};

inline CsrMatrix compress(const Triplets& t) {
  for (const auto& e : t.entries)
    if (e.row >= t.n_rows || e.col >= t.n_cols)
      throw DomainError("compress: entry (" + std::to_string(e.row) + ", " +
                        std::to_string(e.col) + ") outside " +
                        std::to_string(t.n_rows) + "x" + std::to_string(t.n_cols));

  // Stable counting sort by row, then a stable sort by column within each row,
  // so duplicates are summed in insertion order.
  CsrMatrix a;
  a.n_rows = t.n_rows;
  a.n_cols = t.n_cols;
  std::vector<std::size_t> count(t.n_rows + 1, 0);
  for (const auto& e : t.entries) ++count[e.row + 1];
  std::partial_sum(count.begin(), count.end(), count.begin());
  std::vector<std::size_t> order(t.entries.size());
  {
    auto next = count;
    for (std::size_t k = 0; k < t.entries.size(); ++k) order[next[t.entries[k].row]++] = k;
  }

  a.row_ptr.assign(t.n_rows + 1, 0);
  a.col_idx.reserve(t.entries.size());
  a.values.reserve(t.entries.size());
  for (std::size_t r = 0; r < t.n_rows; ++r) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(count[r]);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(count[r + 1]);
    std::stable_sort(first, last, [&](std::size_t p, std::size_t q) {
      return t.entries[p].col < t.entries[q].col;
    });
    for (auto it = first; it != last; ++it) {
      const auto& e = t.entries[*it];
      if (a.col_idx.size() > a.row_ptr[r] && a.col_idx.back() == e.col)
        a.values.back() += e.value;
      else {
        a.col_idx.push_back(e.col);
        a.values.push_back(e.value);
      }
    }
    a.row_ptr[r + 1] = a.col_idx.size();
  }
  return a;
}

inline std::vector<double> matvec(const CsrMatrix& a, std::span<const double> x) {
  if (x.size() != a.n_cols)
    throw DomainError("matvec: vector of length " + std::to_string(x.size()) +
                      " for a matrix with " + std::to_string(a.n_cols) + " columns");
  std::vector<double> y(a.n_rows, 0.0);
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    double s = 0.0;
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
      s += a.values[k] * x[a.col_idx[k]];
    y[r] = s;
  }
  return y;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

/// Direct sparse LU solver with partial pivoting, backed by Eigen::SparseLU.
///
/// By default the columns are ordered by COLAMD and pivoting is strict. A
/// caller that knows a good fill-reducing order can pass it as a symmetric
/// permutation (position k holds the original index eliminated k-th); the
/// factorization then keeps that order and prefers diagonal pivots that are at
/// least a tenth of the column maximum. The ordering is analyzed once and
/// reused while the sparsity pattern is unchanged.
class SparseLu {
 public:
  SparseLu() = default;
  explicit SparseLu(std::vector<std::size_t> symmetric_order)
      : order_(std::move(symmetric_order)) {
    std::vector<bool> seen(order_.size(), false);
    inverse_.assign(order_.size(), 0);
    for (std::size_t k = 0; k < order_.size(); ++k) {
      if (order_[k] >= order_.size() || seen[order_[k]])
        throw DomainError("SparseLu: ordering is not a permutation");
      seen[order_[k]] = true;
      inverse_[order_[k]] = k;
    }
    natural_.setPivotThreshold(0.1);
  }

  void factorize(const CsrMatrix& a) {
    if (a.n_rows != a.n_cols)
      throw DomainError("SparseLu: matrix must be square");
    if (!order_.empty() && order_.size() != a.n_rows)
      throw DomainError("SparseLu: ordering size does not match the matrix");
    const bool new_pattern = !analyzed_ || !pattern_.same_pattern(a);
    if (new_pattern) pattern_ = CsrMatrix{a.n_rows, a.n_cols, a.row_ptr, a.col_idx, {}};
    factorized_ = false;

    std::string msg;
    if (order_.empty()) {
      load_plain(a);
      if (new_pattern) colamd_.analyzePattern(work_);
      colamd_.factorize(work_);
      if (colamd_.info() != Eigen::Success) msg = colamd_.lastErrorMessage();
    } else {
      load_permuted(a, new_pattern);
      if (new_pattern) natural_.analyzePattern(work_);
      natural_.factorize(work_);
      if (natural_.info() != Eigen::Success) msg = natural_.lastErrorMessage();
    }
    analyzed_ = true;

    if (!msg.empty()) {
      // Eigen reports the 1-based column of the vanishing pivot at the end of
      // its message.
      long pivot = -1;
      const auto pos = msg.find_last_of(' ');
      if (pos != std::string::npos) {
        try {
          pivot = std::stol(msg.substr(pos + 1)) - 1;
        } catch (...) {
        }
      }
      if (pivot >= 0 && !order_.empty() && static_cast<std::size_t>(pivot) < order_.size())
        pivot = static_cast<long>(order_[static_cast<std::size_t>(pivot)]);
      throw SingularMatrix("sparse LU: zero pivot at column " + std::to_string(pivot) +
                               " (" + msg + ")",
                           pivot);
    }
    factorized_ = true;
  }

  // Plain triangular solves with the last factorization.
  std::vector<double> solve_once(std::span<const double> b) const {
    if (!factorized_) throw Error("SparseLu::solve called before factorize");
    if (b.size() != pattern_.n_rows) throw DomainError("SparseLu::solve: size mismatch");
    const auto n = static_cast<Eigen::Index>(b.size());
    if (order_.empty()) {
      Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);
      Eigen::VectorXd x = colamd_.solve(rhs);
      return std::vector<double>(x.data(), x.data() + x.size());
    }
    Eigen::VectorXd rhs(n);
    for (std::size_t k = 0; k < b.size(); ++k) rhs[static_cast<Eigen::Index>(k)] = b[order_[k]];
    Eigen::VectorXd y = natural_.solve(rhs);
    std::vector<double> x(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) x[order_[k]] = y[static_cast<Eigen::Index>(k)];
    return x;
  }

  // Solves with the last factorization, then applies one step of iterative
  // refinement against `a`, which must be the matrix that was factorized.
  std::vector<double> solve(const CsrMatrix& a, std::span<const double> b) const {
    auto x = solve_once(b);
    auto r = matvec(a, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    const auto dx = solve_once(r);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
    for (double v : x)
      if (!std::isfinite(v))
        throw SingularMatrix("sparse LU: solution is not finite (matrix singular to "
                             "working precision)",
                             -1);
    return x;
  }

 private:
  using ColMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  void load_plain(const CsrMatrix& a) {
    using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
    outer_.assign(a.row_ptr.begin(), a.row_ptr.end());
    inner_.assign(a.col_idx.begin(), a.col_idx.end());
    Eigen::Map<const RowMat> view(static_cast<Eigen::Index>(a.n_rows),
                                  static_cast<Eigen::Index>(a.n_cols),
                                  static_cast<Eigen::Index>(a.nnz()), outer_.data(),
                                  inner_.data(), a.values.data());
    work_ = view;
    work_.makeCompressed();
  }

  // Builds Pᵀ A P. The permuted pattern is assembled once with each stored
  // value tagged by its source slot, which yields the slot map reused later.
  void load_permuted(const CsrMatrix& a, bool new_pattern) {
    if (new_pattern) {
      std::vector<Eigen::Triplet<double, int>> t;
      t.reserve(a.nnz());
      for (std::size_t r = 0; r < a.n_rows; ++r)
        for (std::size_t q = a.row_ptr[r]; q < a.row_ptr[r + 1]; ++q)
          t.emplace_back(static_cast<int>(inverse_[r]), static_cast<int>(inverse_[a.col_idx[q]]),
                         static_cast<double>(q));
      work_.resize(static_cast<Eigen::Index>(a.n_rows), static_cast<Eigen::Index>(a.n_cols));
      work_.setFromTriplets(t.begin(), t.end());
      work_.makeCompressed();
      slot_map_.resize(a.nnz());
      for (std::size_t k = 0; k < a.nnz(); ++k)
        slot_map_[k] = static_cast<std::size_t>(work_.valuePtr()[k]);
    }
    for (std::size_t k = 0; k < slot_map_.size(); ++k)
      work_.valuePtr()[k] = a.values[slot_map_[k]];
  }

  std::vector<std::size_t> order_, inverse_;
  ColMat work_;
  Eigen::SparseLU<ColMat, Eigen::COLAMDOrdering<int>> colamd_;
  Eigen::SparseLU<ColMat, Eigen::NaturalOrdering<int>> natural_;
  CsrMatrix pattern_;
  std::vector<int> outer_, inner_;
  std::vector<std::size_t> slot_map_;
  bool analyzed_ = false;
  bool factorized_ = false;
};

/// Solver for a sequence of nearby matrices with a fixed sparsity pattern
/// (the Jacobians of successive Newton iterations and time steps).
///
/// Keeps the LU factorization of an earlier matrix and uses it as the
/// preconditioner of GMRES on the current one. When GMRES cannot reach the
/// residual target within `max_krylov` iterations the current matrix is
/// factorized and solved directly; when it needs more than
/// `refactor_after` iterations the next call refactorizes up front.
class ReusedLuSolver {
 public:
  struct Settings {
    double rel_tol = 1e-12;  // ‖b - Ax‖₂ / ‖b‖₂
    int max_krylov = 40;
    int refactor_after = 20;
  };

  ReusedLuSolver() = default;
  explicit ReusedLuSolver(Settings s, std::vector<std::size_t> symmetric_order = {})
      : s_(s), lu_(make_lu(std::move(symmetric_order))) {}

  std::vector<double> solve(const CsrMatrix& a, std::span<const double> b) {
    const double bn = norm2(b);
    if (bn == 0.0) return std::vector<double>(b.size(), 0.0);
    last_krylov_ = 0;
    if (have_lu_ && !stale_) {
      to_eigen(a, work_);
      Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
      Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
      std::vector<double> xv(b.size());
      // GMRES is left-preconditioned, so its own stopping test is on the
      // preconditioned residual; restart from the current iterate until the
      // true residual meets the target.
      for (int pass = 0; pass < 3 && last_krylov_ < s_.max_krylov; ++pass) {
        Eigen::Index iters = s_.max_krylov - last_krylov_;
        double tol = 1e-14;
        Eigen::internal::gmres(work_, rhs, x, Precond{lu_}, iters,
                               Eigen::Index{s_.max_krylov}, tol);
        last_krylov_ += static_cast<int>(iters);
        std::copy(x.data(), x.data() + x.size(), xv.begin());
        if (!all_finite(xv)) break;
        if (relative_residual(a, xv, b, bn) <= s_.rel_tol) {
          if (last_krylov_ > s_.refactor_after) stale_ = true;
          return xv;
        }
      }
    }
    lu_.factorize(a);
    have_lu_ = true;
    stale_ = false;
    ++factorizations_;
    auto xv = lu_.solve(a, b);
    const double rr = relative_residual(a, xv, b, bn);
    if (!(rr <= 1e-8))
      throw SingularMatrix("sparse LU: relative residual " + std::to_string(rr) +
                               " (matrix singular to working precision)",
                           -1);
    return xv;
  }

  // Drops the stored factorization; the next solve factorizes.
  void reset() noexcept {
    have_lu_ = false;
    stale_ = false;
  }

  long factorizations() const noexcept { return factorizations_; }
  int last_krylov_iterations() const noexcept { return last_krylov_; }

 private:
  struct Precond {
    const SparseLu& lu;
    Eigen::VectorXd solve(const Eigen::VectorXd& v) const {
      const auto y = lu.solve_once(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
      return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    }
  };

  static SparseLu make_lu(std::vector<std::size_t> order) {
    return order.empty() ? SparseLu() : SparseLu(std::move(order));
  }

  static bool all_finite(std::span<const double> x) {
    for (double v : x)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static double relative_residual(const CsrMatrix& a, std::span<const double> x,
                                  std::span<const double> b, double bn) {
    auto r = matvec(a, x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return norm2(r) / bn;
  }

  static void to_eigen(const CsrMatrix& a,
                       Eigen::SparseMatrix<double, Eigen::RowMajor, long>& out) {
    out.resize(static_cast<Eigen::Index>(a.n_rows), static_cast<Eigen::Index>(a.n_cols));
    out.resizeNonZeros(static_cast<Eigen::Index>(a.nnz()));
    for (std::size_t r = 0; r <= a.n_rows; ++r)
      out.outerIndexPtr()[r] = static_cast<long>(a.row_ptr[r]);
    for (std::size_t k = 0; k < a.nnz(); ++k) {
      out.innerIndexPtr()[k] = static_cast<long>(a.col_idx[k]);
      out.valuePtr()[k] = a.values[k];
    }
  }

  Settings s_;
  SparseLu lu_;
  Eigen::SparseMatrix<double, Eigen::RowMajor, long> work_;
  bool have_lu_ = false;
  bool stale_ = false;
  long factorizations_ = 0;
  int last_krylov_ = 0;
};

/// One-shot solve of A x = b.
inline std::vector<double> solve(const CsrMatrix& a, std::span<const double> b) {
  SparseLu lu;
  lu.factorize(a);
  return lu.solve(a, b);
}

}  // namespace lch
