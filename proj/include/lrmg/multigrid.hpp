#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrmg/chaos.hpp"
#include "lrmg/fem.hpp"
#include "lrmg/lowrank.hpp"
#include "lrmg/tensor_operator.hpp"
#include "lrmg/types.hpp"

// Geometric multigrid for sum_l K_l U G_l^T = F: a full-rank variant on dense
// matricized iterates and a low-rank variant on factored iterates with
// truncation after every smoothing step, after the fine-grid residual and in
// the outer iteration.

namespace lrmg {

struct SmootherConfig {
  double omega = 2.0 / 3.0;  ///< damped Jacobi weight, Q = D / omega
  int nu_pre = 3;
  int nu_post = 3;
};

enum class OuterTruncation { Absolute, Relative };

struct MGConfig {
  double tol = 1e-6;
  int maxit = 50;
  double eps_rel = 1e-2;
  double eps_abs = 1e-6;
  OuterTruncation outer_truncation = OuterTruncation::Absolute;
  int coarsest_level = 2;
  SmootherConfig smoother;
  double divergence_factor = 10.0;

  void validate() const;
};

struct SolveReport {
  int iterations = 0;
  /// ||F - A(U_i)||_F / ||F||_F, starting with 1.
  std::vector<double> residual_history;
  /// Rank of U_i after the outer truncation (low-rank solves only).
  std::vector<Index> rank_history;
  std::optional<Index> final_rank;
  bool converged = false;
  std::string stop_reason;
  double wall_time = 0.0;
  double truncation_time = 0.0;
  /// Largest factor width handed to a truncation, and largest rank it returned.
  Index max_pre_truncation_rank = 0;
  Index max_post_truncation_rank = 0;
  std::size_t truncations = 0;

  double final_relative_residual() const {
    return residual_history.empty() ? 1.0 : residual_history.back();
  }
};

class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(const std::string& what, SolveReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

struct MultigridLevel {
  fem::Grid grid;
  TensorOperator op;
  Vector diagonal;           ///< diag(K_0)
  SparseMatrix prolongation;  ///< from the next coarser level; empty on the coarsest
  SparseMatrix restriction;   ///< prolongation^T
};

class MultigridHierarchy {
 public:
  MultigridHierarchy(const fem::GridHierarchy& grids, const chaos::StochasticMatrices& stochastic,
                     Index kronecker_cap = kDefaultKroneckerCap);

  std::size_t size() const { return levels_.size(); }
  const MultigridLevel& level(std::size_t i) const { return levels_.at(i); }
  const MultigridLevel& finest() const { return levels_.back(); }
  std::size_t finest_index() const { return levels_.size() - 1; }
  const CoarseDirectSolver& coarse_solver() const { return *coarse_; }

 private:
  std::vector<MultigridLevel> levels_;
  std::shared_ptr<const CoarseDirectSolver> coarse_;
};

/// Observer hooks; all optional.
struct SolveHooks {
  /// Correction C_i returned by the V-cycle of outer iteration i (full solves).
  std::function<void(int, const Matrix&)> on_correction;
  /// Every truncation: grid level (-1 for the outer loop), tag, and its result.
  std::function<void(int, const char*, const TruncationResult&)> on_truncation;
};

/// nu damped Jacobi steps u <- u + omega D^-1 (f - A u), D = I (x) diag(K_0).
Matrix smooth_full(const MultigridLevel& level, Matrix u, const Matrix& f, int nu, double omega);

/// Factored smoothing; each step is truncated so the dropped part is at most
/// eps_rel * ref_norm in the Frobenius norm.
FactoredMatrix smooth_lowrank(const MultigridLevel& level, FactoredMatrix x, const FactoredMatrix& f,
                              int nu, double omega, double ref_norm, double eps_rel,
                              const SolveHooks* hooks = nullptr, SolveReport* stats = nullptr);

Matrix vcycle_full(const MultigridHierarchy& hierarchy, std::size_t level, const Matrix& u0,
                   const Matrix& f, const MGConfig& cfg);

FactoredMatrix vcycle_lowrank(const MultigridHierarchy& hierarchy, std::size_t level,
                              const FactoredMatrix& x0, const FactoredMatrix& f,
                              const MGConfig& cfg, const SolveHooks* hooks = nullptr,
                              SolveReport* stats = nullptr);

struct FullSolution {
  Matrix u;
  SolveReport report;
};

struct LowRankSolution {
  FactoredMatrix u;
  SolveReport report;
};

FullSolution solve_full(const MultigridHierarchy& hierarchy, const Matrix& f, const MGConfig& cfg,
                        const SolveHooks& hooks = {});

LowRankSolution solve_lowrank(const MultigridHierarchy& hierarchy, const FactoredMatrix& f,
                              const MGConfig& cfg, const SolveHooks& hooks = {});

/// Power-iteration estimate of rho(I - omega D^-1 A) on one level.
double spectral_radius_estimate(const MultigridLevel& level, double omega, int max_iterations = 200,
                                double stagnation_tol = 1e-8);

}  // namespace lrmg
