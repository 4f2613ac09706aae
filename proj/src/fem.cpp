#include "lrmg/fem.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lrmg::fem {

namespace {

using Triplet = Eigen::Triplet<double>;

constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

// Gradients of the reference bilinear shapes on [0,1]^2 at (s, t).
void shape_gradients(double s, double t, double ds[4], double dt[4]) {
  ds[0] = -(1.0 - t);
  ds[1] = (1.0 - t);
  ds[2] = t;
  ds[3] = -t;
  dt[0] = -(1.0 - s);
  dt[1] = -s;
  dt[2] = s;
  dt[3] = (1.0 - s);
}

SparseMatrix finalize(Index rows, Index cols, std::vector<Triplet>& triplets) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

}  // namespace

Eigen::Matrix4d element_stiffness(double h, Point origin, const Coefficient& coeff) {
  // grad phi = (1/h) grad_ref phi, dx = h^2 ds dt: the h factors cancel.
  Eigen::Matrix4d local = Eigen::Matrix4d::Zero();
  const double points[2] = {0.5 * (1.0 - kGauss), 0.5 * (1.0 + kGauss)};
  for (double s : points) {
    for (double t : points) {
      const double c = coeff({origin.x + s * h, origin.y + t * h});
      double ds[4];
      double dt[4];
      shape_gradients(s, t, ds, dt);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) local(a, b) += 0.25 * c * (ds[a] * ds[b] + dt[a] * dt[b]);
    }
  }
  return local;
}

SparseMatrix assemble_stiffness(const Grid& grid, const Coefficient& coeff) {
  const int cells = grid.cells_per_side();
  const double h = grid.h();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(cells) * cells * 16);
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const Eigen::Matrix4d local = element_stiffness(h, {grid.coord(i), grid.coord(j)}, coeff);
      const Index dofs[4] = {grid.interior_index(i, j), grid.interior_index(i + 1, j),
                             grid.interior_index(i + 1, j + 1), grid.interior_index(i, j + 1)};
      for (int a = 0; a < 4; ++a) {
        if (dofs[a] < 0) continue;
        for (int b = 0; b < 4; ++b) {
          if (dofs[b] < 0) continue;
          triplets.emplace_back(dofs[a], dofs[b], local(a, b));
        }
      }
    }
  }
  return finalize(grid.num_interior(), grid.num_interior(), triplets);
}

std::vector<SparseMatrix> assemble_kl_stiffnesses(const Grid& grid, const kl::KLExpansion& kl) {
  std::vector<SparseMatrix> out;
  out.reserve(kl.size() + 1);
  const double c0 = kl.c0;
  out.push_back(assemble_stiffness(grid, [c0](Point) { return c0; }));
  for (const auto& term : kl.terms) {
    const double weight = kl.scale * std::sqrt(term.lambda);
    if (weight == 0.0) {
      out.emplace_back(grid.num_interior(), grid.num_interior());
      continue;
    }
    out.push_back(assemble_stiffness(grid, [&term, weight](Point p) { return weight * term(p); }));
  }
  return out;
}

Vector assemble_load(const Grid& grid, double f) {
  // Each interior node touches four elements, each integrating phi to h^2 / 4.
  const double h = grid.h();
  return Vector::Constant(grid.num_interior(), f * h * h);
}

SparseMatrix prolongation(const Grid& coarse, const Grid& fine) {
  if (fine.level() != coarse.level() + 1) {
    throw std::invalid_argument("prolongation: fine level " + std::to_string(fine.level()) +
                                " is not coarse level " + std::to_string(coarse.level()) + " + 1");
  }
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(fine.num_interior()) * 4);
  for (int J = 1; J < fine.cells_per_side(); ++J) {
    for (int I = 1; I < fine.cells_per_side(); ++I) {
      const Index row = fine.interior_index(I, J);
      const int i0 = I / 2;
      const int j0 = J / 2;
      const int i1 = (I % 2 == 0) ? i0 : i0 + 1;
      const int j1 = (J % 2 == 0) ? j0 : j0 + 1;
      const int ni = (i1 == i0) ? 1 : 2;
      const int nj = (j1 == j0) ? 1 : 2;
      const double weight = 1.0 / (ni * nj);
      for (int a = 0; a < ni; ++a) {
        for (int b = 0; b < nj; ++b) {
          const Index col = coarse.interior_index(a == 0 ? i0 : i1, b == 0 ? j0 : j1);
          if (col >= 0) triplets.emplace_back(row, col, weight);
        }
      }
    }
  }
  return finalize(fine.num_interior(), coarse.num_interior(), triplets);
}

GridHierarchy build_hierarchy(int coarsest_level, int finest_level, const kl::KLExpansion& kl) {
  if (coarsest_level < 0 || coarsest_level > finest_level) {
    throw std::invalid_argument("build_hierarchy: need 0 <= coarsest level <= finest level");
  }
  GridHierarchy hierarchy;
  for (int level = coarsest_level; level <= finest_level; ++level) {
    GridLevel entry{Grid(level), assemble_kl_stiffnesses(Grid(level), kl), SparseMatrix()};
    if (level > coarsest_level) entry.prolongation = prolongation(Grid(level - 1), Grid(level));
    hierarchy.levels.push_back(std::move(entry));
  }
  return hierarchy;
}

void write_triplets(std::ostream& out, const SparseMatrix& matrix) {
  const auto precision = out.precision();
  out << std::setprecision(17);
  for (Index k = 0; k < matrix.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it) {
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
  out.precision(precision);
}

}  // namespace lrmg::fem
