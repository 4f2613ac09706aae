#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "lrmg/grid.hpp"
#include "lrmg/kl.hpp"
#include "lrmg/types.hpp"

namespace lrmg::fem {

using Coefficient = std::function<double(Point)>;

/// 4x4 stiffness of one h x h element with corner `origin`, 2x2 Gauss rule.
/// Local node order: (0,0), (1,0), (1,1), (0,1).
Eigen::Matrix4d element_stiffness(double h, Point origin, const Coefficient& coeff);

/// Interior-node stiffness matrix of -div(coeff grad u) with homogeneous Dirichlet data.
SparseMatrix assemble_stiffness(const Grid& grid, const Coefficient& coeff);

/// K_0 from the mean and K_l from scale * sqrt(lambda_l) * c_l for each KL term.
std::vector<SparseMatrix> assemble_kl_stiffnesses(const Grid& grid, const kl::KLExpansion& kl);

/// f_0(i) = integral of f * phi_i for a constant source f.
Vector assemble_load(const Grid& grid, double f = 1.0);

/// Bilinear interpolation from `coarse` interior nodes to `fine` interior nodes.
SparseMatrix prolongation(const Grid& coarse, const Grid& fine);

struct GridLevel {
  Grid grid;
  std::vector<SparseMatrix> stiffness;  ///< K_0 .. K_m
  SparseMatrix prolongation;            ///< from the next coarser level; empty on the coarsest
};

/// Nested grids coarsest -> finest with directly re-assembled stiffness matrices.
struct GridHierarchy {
  std::vector<GridLevel> levels;

  const GridLevel& finest() const { return levels.back(); }
  const GridLevel& coarsest() const { return levels.front(); }
};

GridHierarchy build_hierarchy(int coarsest_level, int finest_level, const kl::KLExpansion& kl);

/// One "row col value" line per stored entry, 1-based indices, 17 significant digits.
void write_triplets(std::ostream& out, const SparseMatrix& matrix);

}  // namespace lrmg::fem
