#pragma once

#include <cstddef>

#include "lrmg/types.hpp"

// Low-rank matrices X = V W^T and the SVD-based truncation operator.

namespace lrmg {

class FactoredMatrix {
 public:
  FactoredMatrix() = default;
  FactoredMatrix(Matrix v, Matrix w);

  /// Rank-0 representation of the rows x cols zero matrix.
  static FactoredMatrix zero(Index rows, Index cols);
  /// Exact factorization of a dense matrix (rank = min(rows, cols)).
  static FactoredMatrix from_dense(const Matrix& dense);

  Index rows() const { return v_.rows(); }
  Index cols() const { return w_.rows(); }
  /// Number of columns in the factors; an upper bound on the true rank.
  Index rank() const { return v_.cols(); }

  const Matrix& V() const { return v_; }
  const Matrix& W() const { return w_; }

  Matrix dense() const;

  FactoredMatrix operator-() const;
  FactoredMatrix scaled(double alpha) const;

 private:
  Matrix v_;
  Matrix w_;
};

/// Column concatenation [V_a, V_b][W_a, W_b]^T.
FactoredMatrix add(const FactoredMatrix& a, const FactoredMatrix& b);
FactoredMatrix subtract(const FactoredMatrix& a, const FactoredMatrix& b);

struct TruncationCriterion {
  enum class Kind {
    RelativeFraction,  ///< tail <= eps * ||X~||_F
    RelativeToNorm,    ///< tail <= eps * reference
    Absolute,          ///< keep sigma_k >= eps
  };

  Kind kind = Kind::Absolute;
  double eps = 1e-6;
  double reference = 0.0;

  static TruncationCriterion relative(double eps) { return {Kind::RelativeFraction, eps, 0.0}; }
  static TruncationCriterion relative_to(double eps, double reference) {
    return {Kind::RelativeToNorm, eps, reference};
  }
  static TruncationCriterion absolute(double eps) { return {Kind::Absolute, eps, 0.0}; }
};

/// Number of leading singular values (descending) retained under `criterion`.
Index select_rank(const Vector& singular_values, const TruncationCriterion& criterion);

struct TruncationResult {
  FactoredMatrix matrix;
  Vector singular_values;  ///< all singular values of the input, descending
  Index input_rank = 0;
  double discarded_norm = 0.0;  ///< sqrt of the sum of dropped sigma^2
  bool dense_fallback = false;

  /// ||X~||_F from the full spectrum.
  double input_norm() const { return singular_values.norm(); }
};

/// QR of both factors plus an SVD of the small core. When the rank bound reaches
/// min(rows, cols) the product is formed densely and decomposed directly.
/// Singular values are carried by W; V has orthonormal columns.
TruncationResult truncate_with_info(const FactoredMatrix& x, const TruncationCriterion& criterion);
FactoredMatrix truncate(const FactoredMatrix& x, const TruncationCriterion& criterion);

/// Singular values of V W^T via the QR cores (no dense N_x x N_xi product).
Vector singular_values(const FactoredMatrix& x);
double frobenius_norm(const FactoredMatrix& x);
double max_singular_value(const FactoredMatrix& x);

/// Count of truncations that took the dense path since process start.
std::size_t dense_fallback_count();

}  // namespace lrmg
