#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lrmg/chaos.hpp"
#include "lrmg/kl.hpp"
#include "lrmg/lowrank.hpp"
#include "lrmg/multigrid.hpp"

// Benchmark driver: declarative configs, problem setup, and CSV/JSON output.

namespace lrmg::experiment {

enum class Mode { LowRank, Full, Both };

struct ExperimentConfig {
  kl::CovarianceKind cov = kl::CovarianceKind::Exponential;
  double sigma = 0.01;
  double b = 4.0;
  int level = 5;  ///< finest grid, h = 2^-level
  int p = 3;
  std::optional<int> m;  ///< unset: chosen by the 95% energy rule
  double eps_abs = 1e-6;
  double eps_rel = 1e-2;
  double tol = 1e-6;
  int maxit = 50;
  Mode mode = Mode::Both;
  int coarsest_level = 2;
  OuterTruncation outer = OuterTruncation::Absolute;
  double omega = 2.0 / 3.0;
  int nu = 3;

  // Outputs; not part of the hash.
  std::filesystem::path out_dir = ".";
  bool export_matrices = false;
  bool dump_spectrum = false;
  bool dump_corrections = false;
  bool dump_truncations = false;

  void validate() const;
  MGConfig solver_config() const;
  /// key=value lines for every numerical field, in a fixed order.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string hash() const;
};

/// Sets one field from its textual form. Keys use '_' or '-' interchangeably.
void apply_setting(ExperimentConfig& cfg, std::string key, const std::string& value);

/// Flat key=value text; '#' starts a comment, blank lines are ignored.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Parameter grids of the four benchmark tables; every row at both eps_abs
/// values, the first of each pair also running the untruncated solver.
std::vector<ExperimentConfig> table_preset(int table);

struct Problem {
  kl::ExpansionResult kl;
  chaos::ChaosBasis basis;
  chaos::StochasticMatrices stochastic;
  MultigridHierarchy hierarchy;
  Vector f0;

  Index spatial_size() const { return hierarchy.finest().op.spatial_size(); }
  Index stochastic_size() const { return hierarchy.finest().op.stochastic_size(); }
  Matrix rhs_dense() const { return f0 * stochastic.g0.transpose(); }
  FactoredMatrix rhs_factored() const { return FactoredMatrix(f0, stochastic.g0); }
};

Problem build_problem(const ExperimentConfig& cfg);

struct TableRow {
  std::string mode;  ///< "lowrank" or "full"
  Index nx = 0;
  Index nxi = 0;
  std::optional<Index> rank;
  int iterations = 0;
  double elapsed = 0.0;
  double rel_residual = 0.0;
  bool converged = false;
  std::string stop_reason;
  SolveReport report;
};

struct ExperimentResult {
  std::string hash;
  int m = 0;
  double setup_time = 0.0;
  std::vector<TableRow> rows;

  bool converged() const;
};

/// Runs the configured solver(s) and writes every requested output into
/// cfg.out_dir: rows appended to results.csv, report_<hash>.json, per-iteration
/// history, and the optional dumps.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Problem& problem);

/// Singular values of the full-rank multigrid solution solved to `tol`.
Vector solution_spectrum(const Problem& problem, const ExperimentConfig& cfg, double tol = 1e-10);

/// Singular values of each untruncated V-cycle correction C_i of a full solve.
std::vector<Vector> correction_spectra(const Problem& problem, const ExperimentConfig& cfg);

void dump_solution_spectrum(const ExperimentConfig& cfg, const Problem& problem,
                            const std::filesystem::path& path);
void dump_correction_spectra(const ExperimentConfig& cfg, const Problem& problem,
                             const std::filesystem::path& path);

/// 17 significant digits, '.' decimal separator.
std::string format_number(double value);

}  // namespace lrmg::experiment
