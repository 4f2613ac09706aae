#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "lrmg/types.hpp"

// The stochastic Galerkin operator A = sum_l G_l (x) K_l acting on matricized
// iterates U (N_x x N_xi, column-major vec): A(U) = sum_l K_l U G_l^T.

namespace lrmg {

class FactoredMatrix;

struct TensorOperator {
  std::vector<SparseMatrix> K;  ///< K_0 .. K_m, N_x x N_x
  std::vector<SparseMatrix> G;  ///< G_0 .. G_m, N_xi x N_xi (G_0 = I)

  TensorOperator() = default;
  TensorOperator(std::vector<SparseMatrix> k, std::vector<SparseMatrix> g);

  Index spatial_size() const { return K.empty() ? 0 : K.front().rows(); }
  Index stochastic_size() const { return G.empty() ? 0 : G.front().rows(); }
  std::size_t terms() const { return K.size(); }

  void validate() const;
};

/// vec(U): stacks the columns of U.
Vector vec(const Matrix& u);
/// Inverse of vec for an rows x cols layout.
Matrix mat(const Vector& u, Index rows, Index cols);

Matrix apply_dense(const TensorOperator& op, const Matrix& u);

/// [K_0 V, ..., K_m V] [G_0 W, ..., G_m W]^T; rank bound grows to (m+1) k.
FactoredMatrix apply_factored(const TensorOperator& op, const FactoredMatrix& x);

Matrix residual_dense(const TensorOperator& op, const Matrix& u, const Matrix& f);
FactoredMatrix residual_factored(const TensorOperator& op, const FactoredMatrix& u,
                                 const FactoredMatrix& f);

inline constexpr Index kDefaultKroneckerCap = 200000;

/// Explicit sparse sum_l kron(G_l, K_l). Throws if N_x N_xi exceeds `cap`.
SparseMatrix assemble_kronecker(const TensorOperator& op, Index cap = kDefaultKroneckerCap);

/// Sparse LDL^T factorization of the assembled operator, reused for every solve.
class CoarseDirectSolver {
 public:
  explicit CoarseDirectSolver(const TensorOperator& op, Index cap = kDefaultKroneckerCap);

  /// Solves A(U) = F for dense matricized F.
  Matrix solve(const Matrix& f) const;

  Index spatial_size() const { return rows_; }
  Index stochastic_size() const { return cols_; }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> factorization_;
};

}  // namespace lrmg
