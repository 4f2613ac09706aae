#include "lrmg/tensor_operator.hpp"

#include <stdexcept>
#include <string>

#include "lrmg/lowrank.hpp"

namespace lrmg {

TensorOperator::TensorOperator(std::vector<SparseMatrix> k, std::vector<SparseMatrix> g)
    : K(std::move(k)), G(std::move(g)) {
  validate();
}

void TensorOperator::validate() const {
  if (K.size() != G.size() || K.empty()) {
    throw std::invalid_argument("TensorOperator: need matching, non-empty K and G lists");
  }
  for (std::size_t l = 0; l < K.size(); ++l) {
    if (K[l].rows() != K[0].rows() || K[l].cols() != K[0].rows()) {
      throw std::invalid_argument("TensorOperator: K_" + std::to_string(l) + " has wrong shape");
    }
    if (G[l].rows() != G[0].rows() || G[l].cols() != G[0].rows()) {
      throw std::invalid_argument("TensorOperator: G_" + std::to_string(l) + " has wrong shape");
    }
  }
}

Vector vec(const Matrix& u) { return Eigen::Map<const Vector>(u.data(), u.size()); }

Matrix mat(const Vector& u, Index rows, Index cols) {
  if (rows * cols != u.size()) throw std::invalid_argument("mat: size mismatch");
  return Eigen::Map<const Matrix>(u.data(), rows, cols);
}

namespace {

void check_shape(const TensorOperator& op, Index rows, Index cols, const char* what) {
  if (rows != op.spatial_size() || cols != op.stochastic_size()) {
    throw std::invalid_argument(std::string(what) + ": operand is " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", operator expects " +
                                std::to_string(op.spatial_size()) + "x" +
                                std::to_string(op.stochastic_size()));
  }
}

}  // namespace

Matrix apply_dense(const TensorOperator& op, const Matrix& u) {
  check_shape(op, u.rows(), u.cols(), "apply_dense");
  Matrix result = op.K[0] * (u * op.G[0].transpose());
  Matrix coupled(u.rows(), u.cols());
  for (std::size_t l = 1; l < op.terms(); ++l) {
    coupled.noalias() = u * op.G[l].transpose();
    result.noalias() += op.K[l] * coupled;
  }
  return result;
}

FactoredMatrix apply_factored(const TensorOperator& op, const FactoredMatrix& x) {
  check_shape(op, x.rows(), x.cols(), "apply_factored");
  const Index k = x.rank();
  const Index terms = static_cast<Index>(op.terms());
  Matrix v(x.rows(), terms * k);
  Matrix w(x.cols(), terms * k);
  for (Index l = 0; l < terms; ++l) {
    v.middleCols(l * k, k).noalias() = op.K[static_cast<std::size_t>(l)] * x.V();
    w.middleCols(l * k, k).noalias() = op.G[static_cast<std::size_t>(l)] * x.W();
  }
  return FactoredMatrix(std::move(v), std::move(w));
}

Matrix residual_dense(const TensorOperator& op, const Matrix& u, const Matrix& f) {
  check_shape(op, f.rows(), f.cols(), "residual_dense");
  return f - apply_dense(op, u);
}

FactoredMatrix residual_factored(const TensorOperator& op, const FactoredMatrix& u,
                                 const FactoredMatrix& f) {
  check_shape(op, f.rows(), f.cols(), "residual_factored");
  return subtract(f, apply_factored(op, u));
}

SparseMatrix assemble_kronecker(const TensorOperator& op, Index cap) {
  const Index nx = op.spatial_size();
  const Index nxi = op.stochastic_size();
  if (nx * nxi > cap) {
    throw std::length_error("assemble_kronecker: system size " + std::to_string(nx * nxi) +
                            " exceeds the cap " + std::to_string(cap) +
                            "; use a coarser coarsest level (deeper hierarchy)");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  std::size_t expected = 0;
  for (std::size_t l = 0; l < op.terms(); ++l) {
    expected += static_cast<std::size_t>(op.G[l].nonZeros() * op.K[l].nonZeros());
  }
  triplets.reserve(expected);
  for (std::size_t l = 0; l < op.terms(); ++l) {
    for (Index gs = 0; gs < op.G[l].outerSize(); ++gs) {
      for (SparseMatrix::InnerIterator g(op.G[l], gs); g; ++g) {
        for (Index ks = 0; ks < op.K[l].outerSize(); ++ks) {
          for (SparseMatrix::InnerIterator kk(op.K[l], ks); kk; ++kk) {
            triplets.emplace_back(g.row() * nx + kk.row(), g.col() * nx + kk.col(),
                                  g.value() * kk.value());
          }
        }
      }
    }
  }
  SparseMatrix a(nx * nxi, nx * nxi);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.prune(0.0);
  a.makeCompressed();
  return a;
}

CoarseDirectSolver::CoarseDirectSolver(const TensorOperator& op, Index cap)
    : rows_(op.spatial_size()),
      cols_(op.stochastic_size()),
      factorization_(std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>()) {
  factorization_->compute(assemble_kronecker(op, cap));
  if (factorization_->info() != Eigen::Success) {
    throw std::runtime_error("coarse grid factorization failed");
  }
}

Matrix CoarseDirectSolver::solve(const Matrix& f) const {
  if (f.rows() != rows_ || f.cols() != cols_) {
    throw std::invalid_argument("CoarseDirectSolver::solve: right-hand side has wrong shape");
  }
  const Vector x = factorization_->solve(vec(f));
  return mat(x, rows_, cols_);
}

}  // namespace lrmg
