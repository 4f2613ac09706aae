#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "lrmg/lowrank.hpp"
#include "lrmg/tensor_operator.hpp"
#include "oracles.hpp"

using namespace lrmg;

namespace {

Matrix random_matrix(Index rows, Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

class SmallOperator : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { problem_ = new fixture::SmallProblem(fixture::make_problem(2, 3, 2, 2)); }
  static void TearDownTestSuite() {
    delete problem_;
    problem_ = nullptr;
  }
  const TensorOperator& op() const { return problem_->op; }
  static fixture::SmallProblem* problem_;
};

fixture::SmallProblem* SmallOperator::problem_ = nullptr;

}  // namespace

TEST(Matricization, RoundTripAndLayout) {
  const Matrix u = random_matrix(7, 4, 1);
  const Vector v = vec(u);
  EXPECT_EQ(v(0), u(0, 0));
  EXPECT_EQ(v(1), u(1, 0));
  EXPECT_EQ(v(7), u(0, 1));
  EXPECT_EQ(mat(v, 7, 4), u);
  EXPECT_THROW(mat(v, 5, 5), std::invalid_argument);
}

TEST_F(SmallOperator, ApplyDenseMatchesKroneckerOracle) {
  const Matrix a = fixture::dense_kronecker(op());
  const Matrix u = random_matrix(op().spatial_size(), op().stochastic_size(), 2);
  const Vector expected = a * vec(u);
  const Vector got = vec(apply_dense(op(), u));
  EXPECT_LE((got - expected).norm(), 1e-12 * expected.norm());
  const SparseMatrix assembled = assemble_kronecker(op());
  EXPECT_LE((Matrix(assembled) - a).norm(), 1e-14 * a.norm());
}

TEST_F(SmallOperator, ZeroAndLinearity) {
  const Index nx = op().spatial_size();
  const Index nxi = op().stochastic_size();
  EXPECT_EQ(apply_dense(op(), Matrix::Zero(nx, nxi)).norm(), 0.0);
  const Matrix u = random_matrix(nx, nxi, 3);
  const Matrix v = random_matrix(nx, nxi, 4);
  const Matrix lhs = apply_dense(op(), 2.5 * u - 0.75 * v);
  const Matrix rhs = 2.5 * apply_dense(op(), u) - 0.75 * apply_dense(op(), v);
  EXPECT_LE((lhs - rhs).norm(), 1e-13 * rhs.norm());
}

TEST_F(SmallOperator, ShapeMismatchThrows) {
  EXPECT_THROW(apply_dense(op(), Matrix::Zero(3, 3)), std::invalid_argument);
  EXPECT_THROW(apply_factored(op(), FactoredMatrix::zero(3, 3)), std::invalid_argument);
}

TEST_F(SmallOperator, FactoredMatchesDense) {
  const Index nx = op().spatial_size();
  const Index nxi = op().stochastic_size();
  const FactoredMatrix x(random_matrix(nx, 3, 5), random_matrix(nxi, 3, 6));
  const FactoredMatrix y = apply_factored(op(), x);
  EXPECT_EQ(y.rank(), static_cast<Index>(op().terms()) * 3);
  const Matrix dense = apply_dense(op(), x.dense());
  EXPECT_LE((y.dense() - dense).norm(), 1e-13 * dense.norm());
  EXPECT_EQ(apply_factored(op(), FactoredMatrix::zero(nx, nxi)).rank(), 0);
}

TEST_F(SmallOperator, ResidualPaths) {
  const Matrix f = problem_->rhs();
  const Index nx = op().spatial_size();
  const Index nxi = op().stochastic_size();
  EXPECT_EQ(residual_dense(op(), Matrix::Zero(nx, nxi), f), f);

  const FactoredMatrix u(random_matrix(nx, 2, 7), random_matrix(nxi, 2, 8));
  const FactoredMatrix ff(problem_->f0, problem_->stochastic.g0);
  const Matrix dense = residual_dense(op(), u.dense(), f);
  EXPECT_LE((residual_factored(op(), u, ff).dense() - dense).norm(), 1e-13 * dense.norm());

  // Exact solution from an independent dense Cholesky solve.
  const Matrix a = fixture::dense_kronecker(op());
  const Vector exact = a.llt().solve(vec(f));
  const Matrix r = residual_dense(op(), mat(exact, nx, nxi), f);
  EXPECT_LT(r.norm() / f.norm(), 1e-12);
}

TEST_F(SmallOperator, RightHandSideIsRankOne) {
  EXPECT_EQ(oracle::dense_singular_values(problem_->rhs()).tail(problem_->rhs().cols() - 1).norm(), 0.0);
}

TEST(Kronecker, SymmetricPositiveDefiniteOnBenchmarkCoefficients) {
  const fixture::SmallProblem p = fixture::make_problem(3, 3, 11, 1);
  const SparseMatrix a = assemble_kronecker(p.op);
  EXPECT_EQ((Matrix(a) - Matrix(a).transpose()).norm(), 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> eig{Matrix(a), Eigen::EigenvaluesOnly};
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Kronecker, BlockPatternFollowsChaosCoupling) {
  // Block (r, s) of A is nonzero exactly where some G_l(r, s) is.
  for (int p = 1; p <= 3; ++p) {
    const fixture::SmallProblem prob = fixture::make_problem(1, 1, 4, p);
    const Matrix a = Matrix(assemble_kronecker(prob.op));
    const Index nx = prob.op.spatial_size();
    const Index nxi = prob.op.stochastic_size();
    Matrix pattern = Matrix(prob.stochastic.G0).cwiseAbs();
    for (const SparseMatrix& g : prob.stochastic.G) pattern += Matrix(g).cwiseAbs();
    for (Index r = 0; r < nxi; ++r)
      for (Index s = 0; s < nxi; ++s) {
        const bool block_nonzero = a.block(r * nx, s * nx, nx, nx).cwiseAbs().maxCoeff() > 0.0;
        EXPECT_EQ(block_nonzero, pattern(r, s) != 0.0) << "p=" << p << " block " << r << "," << s;
      }
  }
}

TEST(Kronecker, CapIsEnforced) {
  const fixture::SmallProblem p = fixture::make_problem(3, 3, 2, 2);
  EXPECT_THROW(assemble_kronecker(p.op, 10), std::length_error);
}

TEST(CoarseDirectSolver, SolvesAssembledSystem) {
  const fixture::SmallProblem p = fixture::make_problem(2, 2, 3, 2, 0.2);
  const CoarseDirectSolver solver(p.op);
  const Matrix f = random_matrix(p.op.spatial_size(), p.op.stochastic_size(), 9);
  const Matrix u = solver.solve(f);
  EXPECT_LT(residual_dense(p.op, u, f).norm() / f.norm(), 1e-13);
  EXPECT_THROW(solver.solve(Matrix::Zero(2, 2)), std::invalid_argument);
}
