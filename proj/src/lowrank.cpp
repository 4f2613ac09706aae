#include "lrmg/lowrank.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace lrmg {

namespace {

std::atomic<std::size_t> g_dense_fallbacks{0};

struct ThinQR {
  Eigen::HouseholderQR<Matrix> qr;
  Matrix r;  // min(rows, cols) x cols

  explicit ThinQR(const Matrix& a) : qr(a) {
    const Index k = std::min(a.rows(), a.cols());
    r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  }

  // Q(:, 0:small.rows()) * small, without forming Q.
  Matrix apply_q(const Matrix& small) const {
    Matrix out = Matrix::Zero(qr.rows(), small.cols());
    out.topRows(small.rows()) = small;
    out.applyOnTheLeft(qr.householderQ());
    return out;
  }
};

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix scale_columns(Matrix m, const Vector& s) {
  for (Index j = 0; j < m.cols(); ++j) m.col(j) *= s(j);
  return m;
}

}  // namespace

FactoredMatrix::FactoredMatrix(Matrix v, Matrix w) : v_(std::move(v)), w_(std::move(w)) {
  if (v_.cols() != w_.cols()) {
    throw std::invalid_argument("FactoredMatrix: factors have " + std::to_string(v_.cols()) +
                                " and " + std::to_string(w_.cols()) + " columns");
  }
}

FactoredMatrix FactoredMatrix::zero(Index rows, Index cols) {
  return FactoredMatrix(Matrix(rows, 0), Matrix(cols, 0));
}

FactoredMatrix FactoredMatrix::from_dense(const Matrix& dense) {
  if (dense.rows() <= dense.cols()) {
    return FactoredMatrix(Matrix::Identity(dense.rows(), dense.rows()), dense.transpose());
  }
  return FactoredMatrix(dense, Matrix::Identity(dense.cols(), dense.cols()));
}

Matrix FactoredMatrix::dense() const {
  if (rank() == 0) return Matrix::Zero(rows(), cols());
  return v_ * w_.transpose();
}

FactoredMatrix FactoredMatrix::operator-() const { return FactoredMatrix(-v_, w_); }

FactoredMatrix FactoredMatrix::scaled(double alpha) const { return FactoredMatrix(alpha * v_, w_); }

FactoredMatrix add(const FactoredMatrix& a, const FactoredMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("add: factored operands have different dimensions");
  }
  Matrix v(a.rows(), a.rank() + b.rank());
  Matrix w(a.cols(), a.rank() + b.rank());
  v << a.V(), b.V();
  w << a.W(), b.W();
  return FactoredMatrix(std::move(v), std::move(w));
}

FactoredMatrix subtract(const FactoredMatrix& a, const FactoredMatrix& b) { return add(a, -b); }

Index select_rank(const Vector& sigma, const TruncationCriterion& criterion) {
  if (!(criterion.eps > 0.0)) throw std::invalid_argument("truncation tolerance must be positive");
  const Index n = sigma.size();
  if (criterion.kind == TruncationCriterion::Kind::Absolute) {
    Index k = 0;
    while (k < n && sigma(k) >= criterion.eps) ++k;
    return k;
  }
  double threshold = 0.0;
  if (criterion.kind == TruncationCriterion::Kind::RelativeFraction) {
    // Same summation order as the tail below, so eps = 1 admits rank 0 exactly.
    double total_sq = 0.0;
    for (Index j = n; j > 0; --j) total_sq += sigma(j - 1) * sigma(j - 1);
    threshold = criterion.eps * std::sqrt(total_sq);
  } else {
    if (!(criterion.reference > 0.0)) {
      throw std::invalid_argument("relative-to-norm truncation needs a positive reference norm");
    }
    threshold = criterion.eps * criterion.reference;
  }
  // tail(k) = sqrt(sum_{j >= k} sigma_j^2), accumulated from the small end.
  double tail_sq = 0.0;
  Index k = n;
  while (k > 0) {
    const double next = tail_sq + sigma(k - 1) * sigma(k - 1);
    if (std::sqrt(next) > threshold) break;
    tail_sq = next;
    --k;
  }
  return k;
}

TruncationResult truncate_with_info(const FactoredMatrix& x, const TruncationCriterion& criterion) {
  TruncationResult result;
  result.input_rank = x.rank();
  if (!all_finite(x.V()) || !all_finite(x.W())) {
    throw std::domain_error("truncate: factors contain non-finite values");
  }
  if (x.rank() == 0 || x.rows() == 0 || x.cols() == 0) {
    result.matrix = FactoredMatrix::zero(x.rows(), x.cols());
    result.singular_values = Vector(0);
    return result;
  }

  Matrix left;   // orthonormal columns spanning the leading left singular vectors
  Matrix right;  // right singular vectors
  if (x.rank() >= std::min(x.rows(), x.cols())) {
    result.dense_fallback = true;
    g_dense_fallbacks.fetch_add(1, std::memory_order_relaxed);
    const Matrix dense = x.dense();
    if (dense.rows() >= dense.cols()) {
      const ThinQR qr(dense);
      const Eigen::BDCSVD<Matrix> svd(qr.r, Eigen::ComputeThinU | Eigen::ComputeThinV);
      result.singular_values = svd.singularValues();
      const Index k = select_rank(result.singular_values, criterion);
      left = qr.apply_q(svd.matrixU().leftCols(k));
      right = svd.matrixV().leftCols(k);
    } else {
      const ThinQR qr(dense.transpose());
      const Eigen::BDCSVD<Matrix> svd(qr.r, Eigen::ComputeThinU | Eigen::ComputeThinV);
      result.singular_values = svd.singularValues();
      const Index k = select_rank(result.singular_values, criterion);
      left = svd.matrixV().leftCols(k);
      right = qr.apply_q(svd.matrixU().leftCols(k));
    }
  } else {
    const ThinQR qv(x.V());
    const ThinQR qw(x.W());
    const Matrix core = qv.r * qw.r.transpose();
    const Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    result.singular_values = svd.singularValues();
    const Index k = select_rank(result.singular_values, criterion);
    left = qv.apply_q(svd.matrixU().leftCols(k));
    right = qw.apply_q(svd.matrixV().leftCols(k));
  }

  const Index k = left.cols();
  result.discarded_norm = result.singular_values.tail(result.singular_values.size() - k).norm();
  result.matrix = FactoredMatrix(std::move(left),
                                 scale_columns(std::move(right), result.singular_values.head(k)));
  return result;
}

FactoredMatrix truncate(const FactoredMatrix& x, const TruncationCriterion& criterion) {
  return truncate_with_info(x, criterion).matrix;
}

Vector singular_values(const FactoredMatrix& x) {
  if (x.rank() == 0 || x.rows() == 0 || x.cols() == 0) return Vector(0);
  const ThinQR qv(x.V());
  const ThinQR qw(x.W());
  const Matrix core = qv.r * qw.r.transpose();
  return Eigen::BDCSVD<Matrix>(core).singularValues();
}

double frobenius_norm(const FactoredMatrix& x) {
  if (x.rank() == 0) return 0.0;
  const ThinQR qv(x.V());
  const ThinQR qw(x.W());
  return (qv.r * qw.r.transpose()).norm();
}

double max_singular_value(const FactoredMatrix& x) {
  const Vector s = singular_values(x);
  return s.size() == 0 ? 0.0 : s(0);
}

std::size_t dense_fallback_count() { return g_dense_fallbacks.load(std::memory_order_relaxed); }

}  // namespace lrmg
