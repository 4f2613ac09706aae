#include "lrmg/chaos.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lrmg::chaos {

int total_degree(const MultiIndex& index) { return std::accumulate(index.begin(), index.end(), 0); }

Index basis_size(int m, int p) {
  if (m < 1 || p < 0) throw std::invalid_argument("chaos basis needs m >= 1 and p >= 0");
  // C(m + p, p) built incrementally; each partial product is itself a binomial.
  unsigned long long size = 1;
  for (int k = 1; k <= p; ++k) {
    unsigned long long next = 0;
    if (__builtin_mul_overflow(size, static_cast<unsigned long long>(m + k), &next)) {
      throw std::overflow_error("chaos basis size overflows");
    }
    size = next / static_cast<unsigned long long>(k);
  }
  if (size > static_cast<unsigned long long>(std::numeric_limits<int>::max())) {
    throw std::overflow_error("chaos basis size " + std::to_string(size) +
                              " exceeds the sparse index range");
  }
  return static_cast<Index>(size);
}

namespace {

// All indices of exactly `degree` over coordinates [pos, m), lexicographically descending.
void append_degree(MultiIndex& current, std::size_t pos, int remaining,
                   std::vector<MultiIndex>& out) {
  if (pos + 1 == current.size()) {
    current[pos] = remaining;
    out.push_back(current);
    return;
  }
  for (int d = remaining; d >= 0; --d) {
    current[pos] = d;
    append_degree(current, pos + 1, remaining - d, out);
  }
  current[pos] = 0;
}

}  // namespace

ChaosBasis build_basis(int m, int p) {
  ChaosBasis basis;
  basis.m = m;
  basis.p = p;
  basis.indices.reserve(static_cast<std::size_t>(basis_size(m, p)));
  MultiIndex current(static_cast<std::size_t>(m), 0);
  for (int degree = 0; degree <= p; ++degree) append_degree(current, 0, degree, basis.indices);
  return basis;
}

double legendre_beta(int n) {
  const double nn = static_cast<double>(n);
  return nn / std::sqrt(4.0 * nn * nn - 1.0);
}

StochasticMatrices build_matrices(const ChaosBasis& basis) {
  const Index n = basis.size();
  std::map<MultiIndex, Index> position;
  for (Index r = 0; r < n; ++r) position.emplace(basis.indices[static_cast<std::size_t>(r)], r);

  StochasticMatrices out;
  out.G0.resize(n, n);
  out.G0.setIdentity();
  out.g0 = Vector::Unit(n, 0);
  out.G.reserve(static_cast<std::size_t>(basis.m));

  for (int l = 0; l < basis.m; ++l) {
    std::vector<Eigen::Triplet<double>> entries;
    for (Index r = 0; r < n; ++r) {
      MultiIndex up = basis.indices[static_cast<std::size_t>(r)];
      if (total_degree(up) >= basis.p) continue;
      up[static_cast<std::size_t>(l)] += 1;
      const Index s = position.at(up);
      const double value = legendre_beta(up[static_cast<std::size_t>(l)]);
      entries.emplace_back(r, s, value);
      entries.emplace_back(s, r, value);
    }
    SparseMatrix g(n, n);
    g.setFromTriplets(entries.begin(), entries.end());
    out.G.push_back(std::move(g));
  }
  return out;
}

}  // namespace lrmg::chaos
