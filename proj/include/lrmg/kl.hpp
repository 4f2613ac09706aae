#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "lrmg/grid.hpp"
#include "lrmg/types.hpp"

// Truncated Karhunen-Loeve expansions of the diffusion coefficient
//
//   c(x, xi) = c0 + scale * sum_l sqrt(lambda_l) c_l(x) xi_l
//
// on D = (-1,1)^2 for the exponential (L1 distance) and squared-exponential
// covariance kernels. The variance sigma^2 is folded into the eigenvalues.

namespace lrmg::kl {

enum class CovarianceKind { Exponential, SquaredExponential };

struct CovarianceModel {
  CovarianceKind kind = CovarianceKind::Exponential;
  double sigma = 0.01;
  double b = 4.0;  ///< correlation length

  void validate() const;
  /// r(x, y), including the sigma^2 factor.
  double operator()(Point x, Point y) const;
};

/// Eigenfunction of exp(-|x - y| / b) on [-a, a]: amplitude * cos(omega x) for
/// even modes, amplitude * sin(omega x) for odd ones. Unit L2 norm on [-a, a].
struct Mode1d {
  double eigenvalue = 0.0;
  double omega = 0.0;
  bool even = true;
  double amplitude = 0.0;

  double operator()(double x) const;
};

/// Largest `count` eigenpairs of the unit-variance 1D exponential kernel, by
/// bisection on the transcendental root equations. Eigenvalues strictly decrease.
std::vector<Mode1d> exponential_eigenpairs_1d(double b, double a, std::size_t count);

/// Residual of the root equation solved for `mode`, written without tangent
/// poles and scaled by max(1, omega): (c cos(wa) - w sin(wa)) or (w cos(wa) + c sin(wa)).
double root_residual(const Mode1d& mode, double b, double a);

struct SeparableEigenfunction {
  Mode1d along_x;
  Mode1d along_y;

  double operator()(Point p) const { return along_x(p.x) * along_y(p.y); }
};

/// Nodal values on every lattice point (boundary included) of a grid, evaluated
/// anywhere in D by bilinear interpolation.
struct NodalEigenfunction {
  fem::Grid grid{0};
  std::shared_ptr<const Vector> values;

  double operator()(Point p) const;
};

struct KLTerm {
  double lambda = 0.0;
  std::variant<SeparableEigenfunction, NodalEigenfunction> eigenfunction;

  double operator()(Point p) const {
    return std::visit([p](const auto& f) { return f(p); }, eigenfunction);
  }
};

struct KLExpansion {
  double c0 = 1.0;
  std::vector<KLTerm> terms;
  /// Multiplier on xi_l; sqrt(3) gives xi_l ~ U[-1,1] unit variance.
  double scale = 1.7320508075688772;

  std::size_t size() const { return terms.size(); }
  std::vector<double> eigenvalues() const;
};

struct ProductPair {
  double value = 0.0;
  std::size_t first = 0;   ///< index into the x-direction list
  std::size_t second = 0;  ///< index into the y-direction list
};

/// The `count` largest products v[i] * v[j], sorted non-increasing with ties
/// broken by (i, j) lexicographically.
std::vector<ProductPair> largest_products(std::span<const double> values, std::size_t count);

/// 2D separable eigenpairs of exp(-|x - y|_1 / b) built from 1D factors, scaled by sigma^2.
std::vector<KLTerm> tensorize_2d(std::span<const Mode1d> one_d, std::size_t count,
                                 double sigma = 1.0);

/// Smallest m whose leading eigenvalue sum reaches `threshold` of the total.
std::size_t choose_m(std::span<const double> eigenvalues, double threshold = 0.95);

/// Galerkin (bilinear FE, all lattice nodes) approximation of the largest `count`
/// eigenpairs of the covariance operator on `mesh`. Eigenvectors are mass-normalized.
std::vector<KLTerm> galerkin_eigensolve(const CovarianceModel& cov, const fem::Grid& mesh,
                                        std::size_t count);

struct ExpansionOptions {
  std::size_t m = 0;              ///< 0 selects m with choose_m
  double energy_threshold = 0.95;
  std::size_t reference_terms = 1000;  ///< M in the energy ratio
  int eigen_grid_level = 4;       ///< mesh for the squared-exponential eigensolve
};

struct ExpansionResult {
  KLExpansion expansion;
  std::vector<double> reference_eigenvalues;  ///< leading M eigenvalues
};

ExpansionResult build_expansion(const CovarianceModel& cov, const ExpansionOptions& options = {});

}  // namespace lrmg::kl
