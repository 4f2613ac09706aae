#pragma once

#include <cstddef>
#include <vector>

#include "lrmg/types.hpp"

// Total-degree Legendre chaos on [-1,1]^m with the uniform density, orthonormal
// so that G0 = I and g0 = e_1.

namespace lrmg::chaos {

using MultiIndex = std::vector<int>;

int total_degree(const MultiIndex& index);

struct ChaosBasis {
  int m = 0;
  int p = 0;
  /// Graded lexicographic: ascending total degree, lexicographically descending
  /// within a degree. indices.front() is all zeros.
  std::vector<MultiIndex> indices;

  Index size() const { return static_cast<Index>(indices.size()); }
};

/// (m + p)! / (m! p!); throws std::overflow_error past the sparse index range.
Index basis_size(int m, int p);

ChaosBasis build_basis(int m, int p);

/// Recurrence coefficient of the orthonormal Legendre polynomials,
/// xi q_n = beta_{n+1} q_{n+1} + beta_n q_{n-1}, beta_n = n / sqrt(4n^2 - 1).
double legendre_beta(int n);

struct StochasticMatrices {
  SparseMatrix G0;
  std::vector<SparseMatrix> G;  ///< G_1 .. G_m
  Vector g0;
};

StochasticMatrices build_matrices(const ChaosBasis& basis);

}  // namespace lrmg::chaos
