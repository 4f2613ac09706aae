#include "lrmg/kl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace lrmg::kl {

void CovarianceModel::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("covariance: sigma must be positive");
  }
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw std::invalid_argument("covariance: correlation length b must be positive");
  }
}

double CovarianceModel::operator()(Point x, Point y) const {
  const double dx = x.x - y.x;
  const double dy = x.y - y.y;
  switch (kind) {
    case CovarianceKind::Exponential:
      return sigma * sigma * std::exp(-(std::abs(dx) + std::abs(dy)) / b);
    case CovarianceKind::SquaredExponential:
      return sigma * sigma * std::exp(-(dx * dx + dy * dy) / (b * b));
  }
  return 0.0;
}

double Mode1d::operator()(double x) const {
  return even ? amplitude * std::cos(omega * x) : amplitude * std::sin(omega * x);
}

namespace {

// Root equation with the tangent poles multiplied out.
double pole_free(bool even, double omega, double c, double a) {
  const double t = omega * a;
  return even ? c * std::cos(t) - omega * std::sin(t) : omega * std::cos(t) + c * std::sin(t);
}

// Bisection on (lo, hi) where the tangent form has a known sign change.
double bisect_root(bool even, double c, double a, double lo, double hi, std::size_t index) {
  // even: c - w tan(wa) is positive at lo, -> -inf at hi
  // odd:  w + c tan(wa) -> -inf at lo, positive at hi
  auto g = [&](double w) {
    return even ? c - w * std::tan(w * a) : w + c * std::tan(w * a);
  };
  const double width = hi - lo;
  const double probe_lo = g(lo + 1e-9 * width);
  const double probe_hi = g(hi - 1e-9 * width);
  const bool bracketed = even ? (probe_lo > 0.0 && probe_hi < 0.0) : (probe_lo < 0.0 && probe_hi > 0.0);
  if (!bracketed) {
    throw std::runtime_error("exponential_eigenpairs_1d: bisection bracket failure at root " +
                             std::to_string(index));
  }
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double value = g(mid);
    if (value == 0.0) return mid;
    const bool left_side = even ? value > 0.0 : value < 0.0;
    (left_side ? lo : hi) = mid;
  }
  // Pick the endpoint with the smaller pole-free residual.
  return std::abs(pole_free(even, lo, c, a)) <= std::abs(pole_free(even, hi, c, a)) ? lo : hi;
}

}  // namespace

std::vector<Mode1d> exponential_eigenpairs_1d(double b, double a, std::size_t count) {
  if (!(b > 0.0) || !(a > 0.0)) {
    throw std::invalid_argument("exponential_eigenpairs_1d: b and a must be positive");
  }
  if (count == 0) throw std::invalid_argument("exponential_eigenpairs_1d: count must be >= 1");

  const double c = 1.0 / b;
  const double pi = std::numbers::pi;
  std::vector<Mode1d> modes;
  modes.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    // Roots interleave: even k in (k pi, k pi + pi/2)/a, odd k in (k pi + pi/2, (k+1) pi)/a.
    const bool even = (n % 2 == 0);
    const double k = static_cast<double>(n / 2);
    const double lo = even ? k * pi / a : (k * pi + 0.5 * pi) / a;
    const double hi = even ? (k * pi + 0.5 * pi) / a : (k + 1.0) * pi / a;
    const double omega = bisect_root(even, c, a, lo, hi, n);

    Mode1d mode;
    mode.omega = omega;
    mode.even = even;
    mode.eigenvalue = 2.0 * c / (omega * omega + c * c);
    const double s = std::sin(2.0 * omega * a) / (2.0 * omega);
    mode.amplitude = 1.0 / std::sqrt(even ? a + s : a - s);
    modes.push_back(mode);
  }
  return modes;
}

double root_residual(const Mode1d& mode, double b, double a) {
  return std::abs(pole_free(mode.even, mode.omega, 1.0 / b, a)) / std::max(1.0, mode.omega);
}

double NodalEigenfunction::operator()(Point p) const {
  const int n = grid.cells_per_side();
  const double h = grid.h();
  const double sx = (p.x + 1.0) / h;
  const double sy = (p.y + 1.0) / h;
  const int i = std::clamp(static_cast<int>(std::floor(sx)), 0, n - 1);
  const int j = std::clamp(static_cast<int>(std::floor(sy)), 0, n - 1);
  const double tx = sx - i;
  const double ty = sy - j;
  const Vector& v = *values;
  return (1.0 - tx) * (1.0 - ty) * v(grid.node_index(i, j)) +
         tx * (1.0 - ty) * v(grid.node_index(i + 1, j)) +
         tx * ty * v(grid.node_index(i + 1, j + 1)) +
         (1.0 - tx) * ty * v(grid.node_index(i, j + 1));
}

std::vector<double> KLExpansion::eigenvalues() const {
  std::vector<double> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(t.lambda);
  return out;
}

std::vector<ProductPair> largest_products(std::span<const double> values, std::size_t count) {
  const std::size_t n = values.size();
  count = std::min(count, n * n);
  std::vector<ProductPair> out;
  out.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.push_back({values[i] * values[j], i, j});
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(count), out.end(),
                    [](const ProductPair& l, const ProductPair& r) {
                      if (l.value != r.value) return l.value > r.value;
                      if (l.first != r.first) return l.first < r.first;
                      return l.second < r.second;
                    });
  out.resize(count);
  return out;
}

std::vector<KLTerm> tensorize_2d(std::span<const Mode1d> one_d, std::size_t count, double sigma) {
  std::vector<double> values(one_d.size());
  std::transform(one_d.begin(), one_d.end(), values.begin(),
                 [](const Mode1d& m) { return m.eigenvalue; });
  if (one_d.size() * one_d.size() < count) {
    throw std::invalid_argument("tensorize_2d: not enough 1D modes for the requested count");
  }
  std::vector<KLTerm> terms;
  terms.reserve(count);
  for (const auto& pair : largest_products(values, count)) {
    KLTerm term;
    term.lambda = sigma * sigma * pair.value;
    term.eigenfunction = SeparableEigenfunction{one_d[pair.first], one_d[pair.second]};
    terms.push_back(std::move(term));
  }
  return terms;
}

std::size_t choose_m(std::span<const double> eigenvalues, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("choose_m: threshold must lie in (0, 1)");
  }
  double total = 0.0;
  for (double v : eigenvalues) {
    if (v < 0.0) throw std::invalid_argument("choose_m: negative eigenvalue");
    total += v;
  }
  if (!(total > 0.0)) throw std::invalid_argument("choose_m: all eigenvalues are zero");
  double partial = 0.0;
  for (std::size_t l = 0; l < eigenvalues.size(); ++l) {
    partial += eigenvalues[l];
    if (partial >= threshold * total) return l + 1;
  }
  return eigenvalues.size();
}

namespace {

struct DenseEigenpairs {
  Vector values;   // non-increasing
  Matrix vectors;  // columns, mass-normalized
};

// Consistent bilinear mass matrix over all lattice nodes.
Matrix full_mass_matrix(const fem::Grid& grid) {
  const Index n = grid.num_nodes();
  Matrix mass = Matrix::Zero(n, n);
  const double h = grid.h();
  const double local[4][4] = {{4, 2, 1, 2}, {2, 4, 2, 1}, {1, 2, 4, 2}, {2, 1, 2, 4}};
  const int cells = grid.cells_per_side();
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const Index dofs[4] = {grid.node_index(i, j), grid.node_index(i + 1, j),
                             grid.node_index(i + 1, j + 1), grid.node_index(i, j + 1)};
      for (int a = 0; a < 4; ++a)
        for (int c = 0; c < 4; ++c) mass(dofs[a], dofs[c]) += local[a][c] * h * h / 36.0;
    }
  }
  return mass;
}

DenseEigenpairs covariance_eigenpairs(const CovarianceModel& cov, const fem::Grid& mesh) {
  const Index n = mesh.num_nodes();
  std::vector<Point> nodes(static_cast<std::size_t>(n));
  for (int j = 0; j < mesh.nodes_per_side(); ++j)
    for (int i = 0; i < mesh.nodes_per_side(); ++i)
      nodes[static_cast<std::size_t>(mesh.node_index(i, j))] = {mesh.coord(i), mesh.coord(j)};

  Matrix kernel(n, n);
  for (Index r = 0; r < n; ++r)
    for (Index s = 0; s < n; ++s)
      kernel(r, s) = cov(nodes[static_cast<std::size_t>(r)], nodes[static_cast<std::size_t>(s)]);

  // M R M v = lambda M v  <=>  (L^T R L) y = lambda y,  v = L^-T y,  M = L L^T.
  const Eigen::LLT<Matrix> chol(full_mass_matrix(mesh));
  if (chol.info() != Eigen::Success) throw std::runtime_error("mass matrix factorization failed");
  const Matrix lower = chol.matrixL();
  const Matrix reduced = lower.transpose() * kernel * lower;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(reduced);
  if (eig.info() != Eigen::Success) throw std::runtime_error("covariance eigensolve failed");

  DenseEigenpairs out;
  out.values = eig.eigenvalues().reverse();
  Matrix y = eig.eigenvectors().rowwise().reverse();
  out.vectors = chol.matrixU().solve(y);
  for (Index k = 0; k < n; ++k) {
    out.values(k) = std::max(out.values(k), 0.0);
    // Sign convention: positive mean, or positive first large entry for zero-mean modes.
    auto col = out.vectors.col(k);
    const double mean = col.sum();
    double sign = mean;
    if (std::abs(mean) < 1e-10 * col.cwiseAbs().sum()) {
      Index arg = 0;
      col.cwiseAbs().maxCoeff(&arg);
      sign = col(arg);
    }
    if (sign < 0.0) col = -col;
  }
  return out;
}

}  // namespace

std::vector<KLTerm> galerkin_eigensolve(const CovarianceModel& cov, const fem::Grid& mesh,
                                        std::size_t count) {
  cov.validate();
  if (count > static_cast<std::size_t>(mesh.num_nodes())) {
    throw std::invalid_argument("galerkin_eigensolve: requested " + std::to_string(count) +
                                " eigenpairs from a space of dimension " +
                                std::to_string(mesh.num_nodes()));
  }
  const DenseEigenpairs pairs = covariance_eigenpairs(cov, mesh);
  std::vector<KLTerm> terms;
  terms.reserve(count);
  for (std::size_t l = 0; l < count; ++l) {
    KLTerm term;
    term.lambda = pairs.values(static_cast<Index>(l));
    term.eigenfunction = NodalEigenfunction{
        mesh, std::make_shared<const Vector>(pairs.vectors.col(static_cast<Index>(l)))};
    terms.push_back(std::move(term));
  }
  return terms;
}

ExpansionResult build_expansion(const CovarianceModel& cov, const ExpansionOptions& options) {
  cov.validate();
  ExpansionResult result;
  std::vector<KLTerm> candidates;
  if (cov.kind == CovarianceKind::Exponential) {
    // Every product among the top M uses 1D indices below M.
    const auto modes = exponential_eigenpairs_1d(cov.b, 1.0, options.reference_terms);
    candidates = tensorize_2d(modes, options.reference_terms, cov.sigma);
  } else {
    const fem::Grid mesh(options.eigen_grid_level);
    const std::size_t available = static_cast<std::size_t>(mesh.num_nodes());
    candidates = galerkin_eigensolve(cov, mesh, std::min(options.reference_terms, available));
  }
  for (const auto& t : candidates) result.reference_eigenvalues.push_back(t.lambda);

  const std::size_t m =
      options.m > 0 ? options.m : choose_m(result.reference_eigenvalues, options.energy_threshold);
  if (m > candidates.size()) {
    throw std::invalid_argument("build_expansion: m exceeds the available eigenpairs");
  }
  candidates.resize(m);
  result.expansion.terms = std::move(candidates);
  return result;
}

}  // namespace lrmg::kl
