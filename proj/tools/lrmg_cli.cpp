// lrmg: runs one configured experiment or a benchmark table preset.
//
//   lrmg --table 1 --max-level 6 --out results/
//   lrmg --config run.cfg --eps-abs 1e-4 --mode lowrank

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrmg/experiment.hpp"

namespace ex = lrmg::experiment;

namespace {

void print_row(const ex::ExperimentConfig& cfg, const ex::ExperimentResult& result, const ex::TableRow& row) {
  std::printf("%s  %-7s level=%d sigma=%g b=%g m=%d eps_abs=%g  N_x=%ld N_xi=%ld  rank=%s  it=%d  "
              "time=%.2fs  rel_res=%.3e  %s\n",
              result.hash.c_str(), row.mode.c_str(), cfg.level, cfg.sigma, cfg.b, result.m, cfg.eps_abs,
              static_cast<long>(row.nx), static_cast<long>(row.nxi),
              row.rank ? std::to_string(*row.rank).c_str() : "-", row.iterations, row.elapsed,
              row.rel_residual, row.converged ? "converged" : row.stop_reason.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank multigrid for stochastic Galerkin diffusion systems"};

  std::optional<std::string> config_file;
  std::optional<int> table;
  std::optional<int> max_level;
  bool print_config = false;
  app.add_option("--config", config_file, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--table", table, "benchmark table preset")->check(CLI::Range(1, 4));
  app.add_option("--max-level", max_level, "skip preset rows finer than this level");
  app.add_flag("--print-config", print_config, "print the resolved configs and exit");

  // Overrides, applied in order after the config file and preset.
  const std::vector<std::pair<std::string, std::string>> value_flags = {
      {"--cov", "exp or sqexp"},
      {"--sigma", "standard deviation of the coefficient"},
      {"--b", "correlation length"},
      {"--level", "finest grid, h = 2^-level"},
      {"--p", "total polynomial degree"},
      {"--m", "KL terms (default: 95% energy rule)"},
      {"--eps-abs", "outer truncation tolerance"},
      {"--eps-rel", "V-cycle truncation tolerance"},
      {"--tol", "relative residual tolerance"},
      {"--maxit", "iteration limit"},
      {"--mode", "lowrank, full or both"},
      {"--out", "output directory"},
      {"--coarsest-level", "coarsest grid level"},
      {"--outer", "outer truncation: abs or rel"},
      {"--omega", "Jacobi damping"},
      {"--nu", "pre- and post-smoothing steps"},
  };
  std::map<std::string, std::string> values;
  for (const auto& [flag, help] : value_flags) app.add_option(flag, values[flag], help);

  const std::vector<std::pair<std::string, std::string>> switch_flags = {
      {"--export-matrices", "write K_l and G_l of the finest level as 1-based triplets"},
      {"--dump-spectrum", "write singular values of the full-rank solution"},
      {"--dump-corrections", "write singular values of each full-rank correction"},
      {"--dump-truncations", "write the spectrum seen by every truncation"},
  };
  for (const auto& [flag, help] : switch_flags) app.add_flag(flag, help);

  CLI11_PARSE(app, argc, argv);

  try {
    ex::ExperimentConfig base;
    if (config_file) base = ex::load_config(*config_file, base);
    std::vector<ex::ExperimentConfig> configs;
    if (table) {
      for (ex::ExperimentConfig cfg : ex::table_preset(*table)) {
        if (max_level && cfg.level > *max_level) continue;
        cfg.out_dir = base.out_dir;
        configs.push_back(cfg);
      }
    } else {
      configs.push_back(base);
    }
    for (ex::ExperimentConfig& cfg : configs) {
      for (const auto& [flag, help] : value_flags) {
        if (app.count(flag) > 0) ex::apply_setting(cfg, flag.substr(2), values[flag]);
      }
      for (const auto& [flag, help] : switch_flags) {
        if (app.count(flag) > 0) ex::apply_setting(cfg, flag.substr(2), "true");
      }
      cfg.validate();
    }

    if (print_config) {
      for (const ex::ExperimentConfig& cfg : configs) {
        std::cout << "# config_hash=" << cfg.hash() << '\n' << cfg.canonical() << '\n';
      }
      return 0;
    }

    bool all_converged = true;
    for (const ex::ExperimentConfig& cfg : configs) {
      const ex::ExperimentResult result = ex::run_experiment(cfg);
      for (const ex::TableRow& row : result.rows) print_row(cfg, result, row);
      std::fflush(stdout);
      all_converged = all_converged && result.converged();
    }
    return all_converged ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "lrmg: " << e.what() << '\n';
    return 1;
  }
}
