#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "lrmg/types.hpp"

namespace lrmg::fem {

/// Uniform quadrilateral mesh of (-1,1)^2 with mesh size h = 2^-level.
///
/// Level 5 is the 64x64 grid (h = 1/32, 3969 interior nodes). Unknowns are the
/// interior nodes only; they are ordered lexicographically with x running fastest.
class Grid {
 public:
  explicit Grid(int level) : level_(level) {
    if (level < 0 || level > 14) {
      throw std::invalid_argument("grid level out of range: " + std::to_string(level));
    }
  }

  int level() const { return level_; }
  double h() const { return std::ldexp(1.0, -level_); }
  int cells_per_side() const { return 2 << level_; }
  int nodes_per_side() const { return cells_per_side() + 1; }
  int interior_per_side() const { return cells_per_side() - 1; }
  Index num_interior() const {
    return static_cast<Index>(interior_per_side()) * interior_per_side();
  }
  Index num_nodes() const { return static_cast<Index>(nodes_per_side()) * nodes_per_side(); }

  /// Coordinate of lattice line i, 0 <= i <= cells_per_side().
  double coord(int i) const { return -1.0 + i * h(); }

  bool is_interior(int i, int j) const {
    return i > 0 && j > 0 && i < cells_per_side() && j < cells_per_side();
  }
  /// Unknown number of interior lattice point (i, j); -1 on the boundary.
  Index interior_index(int i, int j) const {
    if (!is_interior(i, j)) return -1;
    return static_cast<Index>(j - 1) * interior_per_side() + (i - 1);
  }
  /// Index of lattice point (i, j) among all nodes, boundary included.
  Index node_index(int i, int j) const {
    return static_cast<Index>(j) * nodes_per_side() + i;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int level_;
};

}  // namespace lrmg::fem
