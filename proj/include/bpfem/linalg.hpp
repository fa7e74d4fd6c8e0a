#pragma once

#include <limits>
#include <memory>
#include <vector>

#include <Eigen/SparseLU>

#include "bpfem/core.hpp"

namespace bpfem {

inline SparseMatrix from_triplets(std::size_t rows, std::size_t cols, const std::vector<Eigen::Triplet<double>>& t) {
  SparseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

/// True when the sparsity pattern of A equals that of A^T.
inline bool has_symmetric_pattern(const SparseMatrix& a) {
  if (a.rows() != a.cols()) return false;
  const SparseMatrix at = a.transpose();
  if (a.nonZeros() != at.nonZeros()) return false;
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    SparseMatrix::InnerIterator i(a, r), j(at, r);
    for (; i && j; ++i, ++j)
      if (i.col() != j.col()) return false;
    if (i || j) return false;
  }
  return true;
}

/// A(rows, cols) for the given index lists.
inline SparseMatrix submatrix(const SparseMatrix& a, const std::vector<int>& index) {
  std::vector<int> compact(static_cast<std::size_t>(a.cols()), -1);
  for (std::size_t k = 0; k < index.size(); ++k) compact[index[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()));
  for (std::size_t k = 0; k < index.size(); ++k)
    for (SparseMatrix::InnerIterator it(a, index[k]); it; ++it)
      if (compact[it.col()] >= 0) t.emplace_back(static_cast<int>(k), compact[it.col()], it.value());
  return from_triplets(index.size(), index.size(), t);
}

/// Direct sparse LU of a (possibly nonsymmetric) operator. The factorization
/// is computed once and reused for every subsequent solve.
class LinearSolver {
 public:
  LinearSolver() = default;
  explicit LinearSolver(const SparseMatrix& a) { factorize(a); }

  void factorize(const SparseMatrix& a) {
    if (a.rows() != a.cols()) throw InvalidArgument("LinearSolver: matrix is not square");
    matrix_ = a;
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>>();
    Eigen::SparseMatrix<double> col_major = a;
    lu_->analyzePattern(col_major);
    lu_->factorize(col_major);
    if (lu_->info() != Eigen::Success) {
      lu_.reset();
      throw SolverFailure("LinearSolver: factorization failed, matrix is singular", std::numeric_limits<double>::infinity());
    }
  }

  bool ready() const { return lu_ != nullptr; }
  const SparseMatrix& matrix() const { return matrix_; }

  Vector solve(const Vector& b) const {
    if (!lu_) throw SolverFailure("LinearSolver: no factorization", std::numeric_limits<double>::infinity());
    if (b.size() != matrix_.rows()) throw InvalidArgument("LinearSolver: right-hand side has the wrong size");
    Vector x = lu_->solve(b);
    Vector r = b - matrix_ * x;
    const double bound = 1e-10 * (1.0 + b.norm());
    // one step of iterative refinement before giving up
    if (!(r.norm() <= bound)) {
      x += lu_->solve(r);
      r = b - matrix_ * x;
    }
    if (!(r.norm() <= bound)) throw SolverFailure("LinearSolver: residual above tolerance", r.norm());
    return x;
  }

 private:
  SparseMatrix matrix_;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>> lu_;
};

inline Vector solve(const SparseMatrix& a, const Vector& b) { return LinearSolver(a).solve(b); }

}  // namespace bpfem
