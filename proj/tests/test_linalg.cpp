#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace bpfem;

namespace {

SparseMatrix dense_to_sparse(const Eigen::MatrixXd& d) {
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      if (d(i, j) != 0.0) t.emplace_back(int(i), int(j), d(i, j));
  return from_triplets(d.rows(), d.cols(), t);
}

}  // namespace

TEST(LinearSolver, Identity) {
  const SparseMatrix id = dense_to_sparse(Eigen::MatrixXd::Identity(5, 5));
  const Vector b = oracle::random_vector(5);
  EXPECT_NEAR((solve(id, b) - b).norm(), 0.0, 1e-15);
}

TEST(LinearSolver, TwoByTwo) {
  Eigen::MatrixXd a(2, 2);
  a << 2, 0, 0, 4;
  const Vector x = solve(dense_to_sparse(a), Vector::Constant(2, 1.0));
  EXPECT_NEAR(x[0], 0.5, 1e-15);
  EXPECT_NEAR(x[1], 0.25, 1e-15);
}

TEST(LinearSolver, NonsymmetricStepOperatorMatchesDenseLu) {
  const auto space = build_space(build_structured_triangular(4), ElementKind::P1);
  const auto hfun = compute_mesh_function(*space->mesh);
  const FormParameters p{1e-3, 1.0, [](Point, double) { return Point{2.0, 1.0}; }, 0.05, 1.0};
  const auto forms = assemble_forms(*space, hfun, p, 0.0, 0.01);
  const SparseMatrix l = submatrix(theta_operator(forms, 1.0, 0.01), space->interior_dofs);
  const Vector b = oracle::random_vector(space->num_interior());
  const Vector x = solve(l, b);
  const Vector ref = oracle::dense_lu_solve(oracle::to_dense(l), b);
  EXPECT_LE((x - ref).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(LinearSolver, CachedFactorizationIsDeterministic) {
  const auto space = build_space(build_structured_triangular(6), ElementKind::P2);
  const SparseMatrix m = submatrix(assemble_mass(*space), space->interior_dofs);
  const LinearSolver solver(m);
  const Vector b = oracle::random_vector(space->num_interior());
  const Vector x1 = solver.solve(b), x2 = solver.solve(b);
  for (Eigen::Index i = 0; i < x1.size(); ++i) EXPECT_EQ(x1[i], x2[i]);
}

TEST(LinearSolver, SingularMatrixIsReported) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 2, 4;
  EXPECT_THROW(solve(dense_to_sparse(a), Vector::Constant(2, 1.0)), SolverFailure);
}

TEST(LinearSolver, SolveWithoutFactorizationThrows) {
  const LinearSolver solver;
  EXPECT_FALSE(solver.ready());
  EXPECT_THROW(solver.solve(Vector::Zero(1)), SolverFailure);
}

TEST(LinearSolver, RejectsWrongSizes) {
  EXPECT_THROW(LinearSolver(from_triplets(2, 3, {})), InvalidArgument);
  const LinearSolver solver(dense_to_sparse(Eigen::MatrixXd::Identity(3, 3)));
  EXPECT_THROW(solver.solve(Vector::Zero(2)), InvalidArgument);
}

TEST(Sparse, SymmetricPatternDetection) {
  const auto space = build_space(build_structured_triangular(4, TriangulationVariant::non_delaunay), ElementKind::P2);
  EXPECT_TRUE(has_symmetric_pattern(assemble_mass(*space)));
  EXPECT_TRUE(has_symmetric_pattern(assemble_convection(*space, [](Point, double) { return Point{2, 1}; }, 0.0)));
  EXPECT_FALSE(has_symmetric_pattern(from_triplets(2, 2, {{0, 1, 1.0}})));
}

TEST(Sparse, SubmatrixPicksRowsAndColumns) {
  Eigen::MatrixXd a(3, 3);
  a << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Eigen::MatrixXd s = oracle::to_dense(submatrix(dense_to_sparse(a), {0, 2}));
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 3, 7, 9;
  EXPECT_EQ((s - expected).norm(), 0.0);
}
