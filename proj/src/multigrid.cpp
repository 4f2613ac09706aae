#include "lrmg/multigrid.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace lrmg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool is_identity(const SparseMatrix& g) {
  if (g.rows() != g.cols() || g.nonZeros() != g.rows()) return false;
  for (Index k = 0; k < g.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(g, k); it; ++it) {
      if (it.row() != it.col() || it.value() != 1.0) return false;
    }
  }
  return true;
}

TruncationResult timed_truncate(const FactoredMatrix& x, const TruncationCriterion& criterion,
                                int level, const char* tag, const SolveHooks* hooks,
                                SolveReport* stats) {
  const auto start = Clock::now();
  TruncationResult result = truncate_with_info(x, criterion);
  if (stats != nullptr) {
    stats->truncation_time += seconds_since(start);
    stats->truncations += 1;
    stats->max_pre_truncation_rank = std::max(stats->max_pre_truncation_rank, x.rank());
    stats->max_post_truncation_rank =
        std::max(stats->max_post_truncation_rank, result.matrix.rank());
  }
  if (hooks != nullptr && hooks->on_truncation) hooks->on_truncation(level, tag, result);
  return result;
}

FactoredMatrix restrict_factored(const MultigridLevel& fine, const FactoredMatrix& x) {
  return FactoredMatrix(fine.restriction * x.V(), x.W());
}

FactoredMatrix prolong_factored(const MultigridLevel& fine, const FactoredMatrix& x) {
  return FactoredMatrix(fine.prolongation * x.V(), x.W());
}

}  // namespace

void MGConfig::validate() const {
  if (!(tol >= 0.0)) throw std::invalid_argument("MGConfig: tol must be non-negative");
  if (maxit < 0) throw std::invalid_argument("MGConfig: maxit must be non-negative");
  if (!(eps_rel > 0.0 && eps_rel < 1.0)) throw std::invalid_argument("MGConfig: eps_rel must lie in (0,1)");
  if (!(eps_abs > 0.0)) throw std::invalid_argument("MGConfig: eps_abs must be positive");
  if (!(smoother.omega >= 0.0 && smoother.omega <= 1.0)) {
    throw std::invalid_argument("MGConfig: omega must lie in [0,1]");
  }
  if (smoother.nu_pre < 0 || smoother.nu_post < 0) {
    throw std::invalid_argument("MGConfig: smoothing step counts must be non-negative");
  }
}

MultigridHierarchy::MultigridHierarchy(const fem::GridHierarchy& grids,
                                       const chaos::StochasticMatrices& stochastic,
                                       Index kronecker_cap) {
  if (grids.levels.empty()) throw std::invalid_argument("MultigridHierarchy: no grid levels");
  if (!is_identity(stochastic.G0)) {
    throw std::invalid_argument("MultigridHierarchy: G_0 must be the identity");
  }
  std::vector<SparseMatrix> g;
  g.reserve(stochastic.G.size() + 1);
  g.push_back(stochastic.G0);
  g.insert(g.end(), stochastic.G.begin(), stochastic.G.end());

  for (const auto& grid_level : grids.levels) {
    if (grid_level.stiffness.size() != g.size()) {
      throw std::invalid_argument("MultigridHierarchy: stiffness and stochastic term counts differ");
    }
    MultigridLevel level{grid_level.grid, TensorOperator(grid_level.stiffness, g),
                         grid_level.stiffness.front().diagonal(), grid_level.prolongation,
                         grid_level.prolongation.transpose()};
    levels_.push_back(std::move(level));
  }
  coarse_ = std::make_shared<const CoarseDirectSolver>(levels_.front().op, kronecker_cap);
}

Matrix smooth_full(const MultigridLevel& level, Matrix u, const Matrix& f, int nu, double omega) {
  const Vector jacobi = omega * level.diagonal.cwiseInverse();
  for (int step = 0; step < nu; ++step) {
    u.noalias() += jacobi.asDiagonal() * residual_dense(level.op, u, f);
  }
  return u;
}

FactoredMatrix smooth_lowrank(const MultigridLevel& level, FactoredMatrix x, const FactoredMatrix& f,
                              int nu, double omega, double ref_norm, double eps_rel,
                              const SolveHooks* hooks, SolveReport* stats) {
  const Vector jacobi = omega * level.diagonal.cwiseInverse();
  const TensorOperator& op = level.op;
  const Index terms = static_cast<Index>(op.terms());
  const auto level_index = level.grid.level();
  for (int step = 0; step < nu; ++step) {
    // X + S(F - A(X)) with S = diag(jacobi) (x) I and G_0 = I:
    //   V' = [V - S K_0 V, S V_F, -S K_1 V, ..., -S K_m V]
    //   W' = [W,           W_F,   G_1 W,   ...,   G_m W]
    const Index k = x.rank();
    const Index kf = f.rank();
    Matrix v(x.rows(), k + kf + (terms - 1) * k);
    Matrix w(x.cols(), k + kf + (terms - 1) * k);
    v.leftCols(k) = x.V() - jacobi.asDiagonal() * (op.K[0] * x.V());
    w.leftCols(k) = x.W();
    v.middleCols(k, kf) = jacobi.asDiagonal() * f.V();
    w.middleCols(k, kf) = f.W();
    for (Index l = 1; l < terms; ++l) {
      const Index offset = k + kf + (l - 1) * k;
      v.middleCols(offset, k) = -(jacobi.asDiagonal() * (op.K[static_cast<std::size_t>(l)] * x.V()));
      w.middleCols(offset, k) = op.G[static_cast<std::size_t>(l)] * x.W();
    }
    x = timed_truncate(FactoredMatrix(std::move(v), std::move(w)),
                       TruncationCriterion::relative_to(eps_rel, ref_norm), level_index, "smooth",
                       hooks, stats)
            .matrix;
  }
  return x;
}

Matrix vcycle_full(const MultigridHierarchy& hierarchy, std::size_t index, const Matrix& u0,
                   const Matrix& f, const MGConfig& cfg) {
  if (index >= hierarchy.size()) throw std::out_of_range("vcycle_full: level not in hierarchy");
  if (index == 0) return hierarchy.coarse_solver().solve(f);

  const MultigridLevel& level = hierarchy.level(index);
  Matrix u = smooth_full(level, u0, f, cfg.smoother.nu_pre, cfg.smoother.omega);
  const Matrix coarse_rhs = level.restriction * residual_dense(level.op, u, f);
  const Matrix zero = Matrix::Zero(coarse_rhs.rows(), coarse_rhs.cols());
  const Matrix correction = vcycle_full(hierarchy, index - 1, zero, coarse_rhs, cfg);
  u.noalias() += level.prolongation * correction;
  return smooth_full(level, std::move(u), f, cfg.smoother.nu_post, cfg.smoother.omega);
}

FactoredMatrix vcycle_lowrank(const MultigridHierarchy& hierarchy, std::size_t index,
                              const FactoredMatrix& x0, const FactoredMatrix& f,
                              const MGConfig& cfg, const SolveHooks* hooks, SolveReport* stats) {
  if (index >= hierarchy.size()) throw std::out_of_range("vcycle_lowrank: level not in hierarchy");
  if (index == 0) return FactoredMatrix::from_dense(hierarchy.coarse_solver().solve(f.dense()));

  const MultigridLevel& level = hierarchy.level(index);
  // Residual at V-cycle entry; the reference for every relative truncation below.
  const double ref_norm = x0.rank() == 0 ? frobenius_norm(f)
                                         : frobenius_norm(residual_factored(level.op, x0, f));
  if (ref_norm == 0.0) return x0;

  FactoredMatrix u = smooth_lowrank(level, x0, f, cfg.smoother.nu_pre, cfg.smoother.omega,
                                    ref_norm, cfg.eps_rel, hooks, stats);
  const FactoredMatrix residual =
      timed_truncate(residual_factored(level.op, u, f),
                     TruncationCriterion::relative_to(cfg.eps_rel * level.grid.h(), ref_norm),
                     level.grid.level(), "residual", hooks, stats)
          .matrix;
  const FactoredMatrix coarse_rhs = restrict_factored(level, residual);
  const FactoredMatrix correction =
      vcycle_lowrank(hierarchy, index - 1, FactoredMatrix::zero(coarse_rhs.rows(), coarse_rhs.cols()),
                     coarse_rhs, cfg, hooks, stats);
  u = add(u, prolong_factored(level, correction));
  return smooth_lowrank(level, std::move(u), f, cfg.smoother.nu_post, cfg.smoother.omega, ref_norm,
                        cfg.eps_rel, hooks, stats);
}

FullSolution solve_full(const MultigridHierarchy& hierarchy, const Matrix& f, const MGConfig& cfg,
                        const SolveHooks& hooks) {
  cfg.validate();
  const auto start = Clock::now();
  const MultigridLevel& finest = hierarchy.finest();
  FullSolution out{Matrix::Zero(f.rows(), f.cols()), SolveReport{}};
  SolveReport& report = out.report;
  report.residual_history.push_back(1.0);

  const double r0 = f.norm();
  if (r0 == 0.0) {
    report.converged = true;
    report.stop_reason = "zero right-hand side";
    report.wall_time = seconds_since(start);
    return out;
  }
  Matrix residual = f;
  double r = r0;
  const Matrix zero = Matrix::Zero(f.rows(), f.cols());
  while (r > cfg.tol * r0 && report.iterations < cfg.maxit) {
    const Matrix correction = vcycle_full(hierarchy, hierarchy.finest_index(), zero, residual, cfg);
    if (hooks.on_correction) hooks.on_correction(report.iterations, correction);
    out.u += correction;
    residual = residual_dense(finest.op, out.u, f);
    r = residual.norm();
    report.iterations += 1;
    report.residual_history.push_back(r / r0);
    if (!std::isfinite(r) || r > cfg.divergence_factor * r0) {
      report.stop_reason = "diverged";
      report.wall_time = seconds_since(start);
      std::ostringstream msg;
      msg << "solve_full diverged at iteration " << report.iterations << " (relative residual "
          << r / r0 << ")";
      throw SolverDivergence(msg.str(), report);
    }
  }
  report.converged = r <= cfg.tol * r0;
  report.stop_reason = report.converged ? "tolerance reached" : "iteration limit";
  report.wall_time = seconds_since(start);
  return out;
}

LowRankSolution solve_lowrank(const MultigridHierarchy& hierarchy, const FactoredMatrix& f,
                              const MGConfig& cfg, const SolveHooks& hooks) {
  cfg.validate();
  const auto start = Clock::now();
  const MultigridLevel& finest = hierarchy.finest();
  LowRankSolution out{FactoredMatrix::zero(f.rows(), f.cols()), SolveReport{}};
  SolveReport& report = out.report;
  report.residual_history.push_back(1.0);
  report.rank_history.push_back(0);

  // The iterate is always truncated absolutely; the relative variant only
  // changes how the outer residual is compressed, as a relative perturbation.
  const bool absolute = cfg.outer_truncation == OuterTruncation::Absolute;
  const TruncationCriterion iterate_criterion = TruncationCriterion::absolute(cfg.eps_abs);
  const TruncationCriterion residual_criterion =
      absolute ? iterate_criterion : TruncationCriterion::relative(cfg.eps_rel);
  const double r0 = frobenius_norm(f);
  FactoredMatrix residual = f;
  double r = r0;
  double largest_sigma = max_singular_value(f);
  auto finish = [&](bool converged, const char* reason) {
    report.converged = converged;
    report.stop_reason = reason;
    report.final_rank = out.u.rank();
    report.wall_time = seconds_since(start);
  };
  if (r0 == 0.0) {
    finish(true, "zero right-hand side");
    return out;
  }

  while (r > cfg.tol * r0 && report.iterations < cfg.maxit) {
    if (absolute && largest_sigma < cfg.eps_abs) break;
    const FactoredMatrix correction =
        vcycle_lowrank(hierarchy, hierarchy.finest_index(),
                       FactoredMatrix::zero(f.rows(), f.cols()), residual, cfg, &hooks, &report);
    out.u = timed_truncate(add(out.u, correction), iterate_criterion, -1, "iterate", &hooks, &report).matrix;
    const TruncationResult truncated =
        timed_truncate(residual_factored(finest.op, out.u, f), residual_criterion, -1,
                       "outer-residual", &hooks, &report);
    residual = truncated.matrix;
    const double true_residual = truncated.input_norm();
    r = frobenius_norm(residual);
    largest_sigma = truncated.matrix.rank() > 0 ? truncated.singular_values(0) : 0.0;

    report.iterations += 1;
    report.residual_history.push_back(true_residual / r0);
    report.rank_history.push_back(out.u.rank());
    if (!std::isfinite(true_residual) || true_residual > cfg.divergence_factor * r0) {
      finish(false, "diverged");
      std::ostringstream msg;
      msg << "solve_lowrank diverged at iteration " << report.iterations
          << " (relative residual " << true_residual / r0 << ")";
      throw SolverDivergence(msg.str(), report);
    }
  }
  // A residual truncated to zero also passes r <= tol r0; name the real cause.
  const bool below_eps = absolute && largest_sigma < cfg.eps_abs;
  if (below_eps && report.final_relative_residual() > cfg.tol) {
    finish(true, "residual singular values below eps_abs");
  } else if (r <= cfg.tol * r0) {
    finish(true, "tolerance reached");
  } else {
    finish(false, "iteration limit");
  }
  return out;
}

double spectral_radius_estimate(const MultigridLevel& level, double omega, int max_iterations,
                                double stagnation_tol) {
  const Vector jacobi = omega * level.diagonal.cwiseInverse();
  std::mt19937_64 rng(20170131);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix e(level.op.spatial_size(), level.op.stochastic_size());
  for (Index j = 0; j < e.cols(); ++j)
    for (Index i = 0; i < e.rows(); ++i) e(i, j) = dist(rng);
  e /= e.norm();

  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Matrix next = e;
    next.noalias() -= jacobi.asDiagonal() * apply_dense(level.op, e);
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    const double previous = estimate;
    estimate = norm;
    e = next / norm;
    if (it > 0 && std::abs(estimate - previous) <= stagnation_tol * estimate) break;
  }
  return estimate;
}

}  // namespace lrmg
