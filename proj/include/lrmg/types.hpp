#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace lrmg {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

}  // namespace lrmg
