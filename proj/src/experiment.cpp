#include "lrmg/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lrmg/fem.hpp"

namespace lrmg::experiment {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw std::invalid_argument("setting '" + key + "': '" + text + "' is not a number");
  }
  return value;
}

int parse_int(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw std::invalid_argument("setting '" + key + "': '" + text + "' is not an integer");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = lower(text);
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw std::invalid_argument("setting '" + key + "': '" + text + "' is not a boolean");
}

const char* cov_name(kl::CovarianceKind kind) {
  return kind == kl::CovarianceKind::Exponential ? "exp" : "sqexp";
}

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::LowRank: return "lowrank";
    case Mode::Full: return "full";
    case Mode::Both: return "both";
  }
  return "both";
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void write_hash_line(std::ostream& out, const ExperimentConfig& cfg) {
  out << "# config_hash=" << cfg.hash() << '\n';
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

void append_results(const ExperimentConfig& cfg, const ExperimentResult& result, Index nx, Index nxi) {
  const auto path = cfg.out_dir / "results.csv";
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out = open_output(path, std::ios::app);
  if (fresh) {
    out << "config_hash,cov,sigma,b,level,m,p,eps_abs,eps_rel,mode,N_x,N_xi,rank,iterations,"
           "elapsed,rel_residual,converged,stop_reason\n";
  }
  for (const TableRow& row : result.rows) {
    out << result.hash << ',' << cov_name(cfg.cov) << ',' << format_number(cfg.sigma) << ','
        << format_number(cfg.b) << ',' << cfg.level << ',' << result.m << ',' << cfg.p << ','
        << format_number(cfg.eps_abs) << ',' << format_number(cfg.eps_rel) << ',' << row.mode << ','
        << nx << ',' << nxi << ',' << (row.rank ? std::to_string(*row.rank) : std::string()) << ','
        << row.iterations << ',' << format_number(row.elapsed) << ','
        << format_number(row.rel_residual) << ',' << (row.converged ? 1 : 0) << ','
        << csv_field(row.stop_reason) << '\n';
  }
}

void write_history(const ExperimentConfig& cfg, const TableRow& row) {
  std::ofstream out =
      open_output(cfg.out_dir / ("history_" + cfg.hash() + "_" + row.mode + ".csv"));
  write_hash_line(out, cfg);
  out << "iter,rel_residual,rank\n";
  const SolveReport& r = row.report;
  for (std::size_t i = 0; i < r.residual_history.size(); ++i) {
    out << i << ',' << format_number(r.residual_history[i]) << ',';
    if (i < r.rank_history.size()) out << r.rank_history[i];
    out << '\n';
  }
}

json report_json(const SolveReport& r) {
  json j;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["stop_reason"] = r.stop_reason;
  j["residual_history"] = r.residual_history;
  j["rank_history"] = r.rank_history;
  j["final_rank"] = r.final_rank ? json(*r.final_rank) : json(nullptr);
  j["wall_time"] = r.wall_time;
  j["truncation_time"] = r.truncation_time;
  j["truncations"] = r.truncations;
  j["max_pre_truncation_rank"] = r.max_pre_truncation_rank;
  j["max_post_truncation_rank"] = r.max_post_truncation_rank;
  return j;
}

void write_report(const ExperimentConfig& cfg, const ExperimentResult& result, const Problem& problem) {
  json j;
  j["config_hash"] = result.hash;
  json c;
  c["cov"] = cov_name(cfg.cov);
  c["sigma"] = cfg.sigma;
  c["b"] = cfg.b;
  c["level"] = cfg.level;
  c["h"] = std::ldexp(1.0, -cfg.level);
  c["p"] = cfg.p;
  c["m"] = result.m;
  c["m_override"] = cfg.m.has_value();
  c["eps_abs"] = cfg.eps_abs;
  c["eps_rel"] = cfg.eps_rel;
  c["tol"] = cfg.tol;
  c["maxit"] = cfg.maxit;
  c["mode"] = mode_name(cfg.mode);
  c["coarsest_level"] = cfg.coarsest_level;
  c["outer_truncation"] = cfg.outer == OuterTruncation::Absolute ? "abs" : "rel";
  c["omega"] = cfg.omega;
  c["nu"] = cfg.nu;
  j["config"] = c;
  j["N_x"] = problem.spatial_size();
  j["N_xi"] = problem.stochastic_size();
  j["kl_eigenvalues"] = problem.kl.expansion.eigenvalues();
  j["setup_time"] = result.setup_time;
  j["converged"] = result.converged();
  json rows = json::array();
  for (const TableRow& row : result.rows) {
    json r = report_json(row.report);
    r["mode"] = row.mode;
    r["rel_residual"] = row.rel_residual;
    rows.push_back(r);
  }
  j["rows"] = rows;
  std::ofstream out = open_output(cfg.out_dir / ("report_" + result.hash + ".json"));
  out << j.dump(2) << '\n';
}

void export_matrices(const ExperimentConfig& cfg, const Problem& problem) {
  const auto dir = cfg.out_dir / ("matrices_" + cfg.hash());
  const TensorOperator& op = problem.hierarchy.finest().op;
  auto dump = [&](const std::string& name, const SparseMatrix& matrix) {
    std::ofstream out = open_output(dir / name);
    write_hash_line(out, cfg);
    fem::write_triplets(out, matrix);
  };
  for (std::size_t l = 0; l < op.terms(); ++l) {
    dump("K" + std::to_string(l) + ".txt", op.K[l]);
    dump("G" + std::to_string(l) + ".txt", op.G[l]);
  }
}

TableRow make_row(const char* mode, const Problem& problem, SolveReport report) {
  TableRow row;
  row.mode = mode;
  row.nx = problem.spatial_size();
  row.nxi = problem.stochastic_size();
  row.rank = report.final_rank;
  row.iterations = report.iterations;
  row.elapsed = report.wall_time;
  row.rel_residual = report.final_relative_residual();
  row.converged = report.converged;
  row.stop_reason = report.stop_reason;
  row.report = std::move(report);
  return row;
}

}  // namespace

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void ExperimentConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("config: sigma must be positive");
  if (!(b > 0.0)) throw std::invalid_argument("config: b must be positive");
  if (coarsest_level < 0) throw std::invalid_argument("config: coarsest_level must be >= 0");
  if (level < coarsest_level || level > 14) {
    throw std::invalid_argument("config: level must lie in [coarsest_level, 14]");
  }
  if (p < 0) throw std::invalid_argument("config: p must be >= 0");
  if (m && *m < 1) throw std::invalid_argument("config: m must be >= 1");
  if (nu < 0) throw std::invalid_argument("config: nu must be >= 0");
  solver_config().validate();
}

MGConfig ExperimentConfig::solver_config() const {
  MGConfig mg;
  mg.tol = tol;
  mg.maxit = maxit;
  mg.eps_rel = eps_rel;
  mg.eps_abs = eps_abs;
  mg.outer_truncation = outer;
  mg.coarsest_level = coarsest_level;
  mg.smoother.omega = omega;
  mg.smoother.nu_pre = nu;
  mg.smoother.nu_post = nu;
  return mg;
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream s;
  s << "cov=" << cov_name(cov) << '\n'
    << "sigma=" << format_number(sigma) << '\n'
    << "b=" << format_number(b) << '\n'
    << "level=" << level << '\n'
    << "p=" << p << '\n'
    << "m=" << (m ? std::to_string(*m) : std::string("auto")) << '\n'
    << "eps_abs=" << format_number(eps_abs) << '\n'
    << "eps_rel=" << format_number(eps_rel) << '\n'
    << "tol=" << format_number(tol) << '\n'
    << "maxit=" << maxit << '\n'
    << "mode=" << mode_name(mode) << '\n'
    << "coarsest_level=" << coarsest_level << '\n'
    << "outer=" << (outer == OuterTruncation::Absolute ? "abs" : "rel") << '\n'
    << "omega=" << format_number(omega) << '\n'
    << "nu=" << nu << '\n';
  return s.str();
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_setting(ExperimentConfig& cfg, std::string key, const std::string& raw) {
  key = lower(trim(key));
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw);
  if (key == "cov") {
    const std::string v = lower(value);
    if (v == "exp" || v == "exponential") {
      cfg.cov = kl::CovarianceKind::Exponential;
    } else if (v == "sqexp" || v == "squared_exponential") {
      cfg.cov = kl::CovarianceKind::SquaredExponential;
    } else {
      throw std::invalid_argument("setting 'cov': expected exp or sqexp, got '" + value + "'");
    }
  } else if (key == "sigma") {
    cfg.sigma = parse_double(key, value);
  } else if (key == "b") {
    cfg.b = parse_double(key, value);
  } else if (key == "level") {
    cfg.level = parse_int(key, value);
  } else if (key == "p") {
    cfg.p = parse_int(key, value);
  } else if (key == "m") {
    if (lower(value) == "auto") {
      cfg.m.reset();
    } else {
      cfg.m = parse_int(key, value);
    }
  } else if (key == "eps_abs") {
    cfg.eps_abs = parse_double(key, value);
  } else if (key == "eps_rel") {
    cfg.eps_rel = parse_double(key, value);
  } else if (key == "tol") {
    cfg.tol = parse_double(key, value);
  } else if (key == "maxit") {
    cfg.maxit = parse_int(key, value);
  } else if (key == "mode") {
    const std::string v = lower(value);
    if (v == "lowrank") {
      cfg.mode = Mode::LowRank;
    } else if (v == "full") {
      cfg.mode = Mode::Full;
    } else if (v == "both") {
      cfg.mode = Mode::Both;
    } else {
      throw std::invalid_argument("setting 'mode': expected lowrank, full or both, got '" + value + "'");
    }
  } else if (key == "coarsest_level") {
    cfg.coarsest_level = parse_int(key, value);
  } else if (key == "outer") {
    const std::string v = lower(value);
    if (v == "abs") {
      cfg.outer = OuterTruncation::Absolute;
    } else if (v == "rel") {
      cfg.outer = OuterTruncation::Relative;
    } else {
      throw std::invalid_argument("setting 'outer': expected abs or rel, got '" + value + "'");
    }
  } else if (key == "omega") {
    cfg.omega = parse_double(key, value);
  } else if (key == "nu") {
    cfg.nu = parse_int(key, value);
  } else if (key == "out") {
    cfg.out_dir = value;
  } else if (key == "export_matrices") {
    cfg.export_matrices = parse_bool(key, value);
  } else if (key == "dump_spectrum") {
    cfg.dump_spectrum = parse_bool(key, value);
  } else if (key == "dump_corrections") {
    cfg.dump_corrections = parse_bool(key, value);
  } else if (key == "dump_truncations") {
    cfg.dump_truncations = parse_bool(key, value);
  } else {
    throw std::invalid_argument("unknown setting '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key=value");
    }
    apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  return parse_config(in, std::move(base));
}

std::vector<ExperimentConfig> table_preset(int table) {
  struct Row {
    kl::CovarianceKind cov;
    double sigma;
    double b;
    int level;
  };
  using kl::CovarianceKind;
  std::vector<Row> rows;
  switch (table) {
    case 1:
      for (int level = 5; level <= 8; ++level) rows.push_back({CovarianceKind::Exponential, 0.01, 4.0, level});
      break;
    case 2:
      for (double b : {5.0, 4.0, 3.0, 2.5}) rows.push_back({CovarianceKind::Exponential, 0.01, b, 6});
      break;
    case 3:
      for (double sigma : {0.001, 0.01, 0.1, 0.3}) rows.push_back({CovarianceKind::Exponential, sigma, 4.0, 6});
      break;
    case 4:
      for (int level = 6; level <= 9; ++level) rows.push_back({CovarianceKind::SquaredExponential, 0.01, 2.0, level});
      break;
    default:
      throw std::invalid_argument("table preset must be 1, 2, 3 or 4");
  }
  std::vector<ExperimentConfig> out;
  for (const Row& row : rows) {
    ExperimentConfig cfg;
    cfg.cov = row.cov;
    cfg.sigma = row.sigma;
    cfg.b = row.b;
    cfg.level = row.level;
    cfg.p = 3;
    cfg.eps_abs = 1e-6;
    cfg.mode = Mode::Both;
    out.push_back(cfg);
    cfg.eps_abs = 1e-4;
    cfg.mode = Mode::LowRank;
    out.push_back(cfg);
  }
  return out;
}

Problem build_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  kl::ExpansionOptions options;
  if (cfg.m) options.m = static_cast<std::size_t>(*cfg.m);
  kl::ExpansionResult expansion = kl::build_expansion({cfg.cov, cfg.sigma, cfg.b}, options);
  chaos::ChaosBasis basis = chaos::build_basis(static_cast<int>(expansion.expansion.size()), cfg.p);
  chaos::StochasticMatrices stochastic = chaos::build_matrices(basis);
  const fem::GridHierarchy grids =
      fem::build_hierarchy(cfg.coarsest_level, cfg.level, expansion.expansion);
  MultigridHierarchy hierarchy(grids, stochastic);
  Vector f0 = fem::assemble_load(hierarchy.finest().grid);
  return Problem{std::move(expansion), std::move(basis), std::move(stochastic), std::move(hierarchy),
                 std::move(f0)};
}

bool ExperimentResult::converged() const {
  return std::all_of(rows.begin(), rows.end(), [](const TableRow& r) { return r.converged; });
}

namespace {

ExperimentResult run_with_problem(const ExperimentConfig& cfg, const Problem& problem,
                                  double setup_time) {
  cfg.validate();
  ExperimentResult result;
  result.setup_time = setup_time;
  result.hash = cfg.hash();
  result.m = static_cast<int>(problem.kl.expansion.size());
  const MGConfig mg = cfg.solver_config();

  if (cfg.mode != Mode::Full) {
    SolveHooks hooks;
    std::ofstream trunc;
    int outer_iteration = 0;
    if (cfg.dump_truncations) {
      trunc = open_output(cfg.out_dir / ("truncations_" + result.hash + ".csv"));
      write_hash_line(trunc, cfg);
      trunc << "iteration,level,tag,input_rank,kept_rank,index,sigma\n";
      hooks.on_truncation = [&](int level, const char* tag, const TruncationResult& t) {
        for (Index k = 0; k < t.singular_values.size(); ++k) {
          trunc << outer_iteration << ',' << level << ',' << tag << ',' << t.input_rank << ','
                << t.matrix.rank() << ',' << k << ',' << format_number(t.singular_values(k)) << '\n';
        }
        if (std::string(tag) == "outer-residual") ++outer_iteration;
      };
    }
    try {
      LowRankSolution sol = solve_lowrank(problem.hierarchy, problem.rhs_factored(), mg, hooks);
      result.rows.push_back(make_row("lowrank", problem, std::move(sol.report)));
    } catch (const SolverDivergence& e) {
      result.rows.push_back(make_row("lowrank", problem, e.report()));
    }
  }
  if (cfg.mode != Mode::LowRank) {
    try {
      FullSolution sol = solve_full(problem.hierarchy, problem.rhs_dense(), mg);
      result.rows.push_back(make_row("full", problem, std::move(sol.report)));
    } catch (const SolverDivergence& e) {
      result.rows.push_back(make_row("full", problem, e.report()));
    }
  }

  append_results(cfg, result, problem.spatial_size(), problem.stochastic_size());
  for (const TableRow& row : result.rows) write_history(cfg, row);
  write_report(cfg, result, problem);
  if (cfg.export_matrices) export_matrices(cfg, problem);
  if (cfg.dump_spectrum) {
    dump_solution_spectrum(cfg, problem, cfg.out_dir / ("spectrum_" + result.hash + ".csv"));
  }
  if (cfg.dump_corrections) {
    dump_correction_spectra(cfg, problem, cfg.out_dir / ("corrections_" + result.hash + ".csv"));
  }
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const Problem problem = build_problem(cfg);
  return run_with_problem(cfg, problem,
                          std::chrono::duration<double>(Clock::now() - start).count());
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Problem& problem) {
  return run_with_problem(cfg, problem, 0.0);
}

Vector solution_spectrum(const Problem& problem, const ExperimentConfig& cfg, double tol) {
  MGConfig mg = cfg.solver_config();
  mg.tol = tol;
  mg.maxit = std::max(mg.maxit, 100);
  const FullSolution sol = solve_full(problem.hierarchy, problem.rhs_dense(), mg);
  return singular_values(FactoredMatrix::from_dense(sol.u));
}

std::vector<Vector> correction_spectra(const Problem& problem, const ExperimentConfig& cfg) {
  std::vector<Vector> spectra;
  SolveHooks hooks;
  hooks.on_correction = [&](int, const Matrix& c) {
    spectra.push_back(singular_values(FactoredMatrix::from_dense(c)));
  };
  solve_full(problem.hierarchy, problem.rhs_dense(), cfg.solver_config(), hooks);
  return spectra;
}

void dump_solution_spectrum(const ExperimentConfig& cfg, const Problem& problem,
                            const std::filesystem::path& path) {
  const Vector sigma = solution_spectrum(problem, cfg);
  std::ofstream out = open_output(path);
  write_hash_line(out, cfg);
  out << "index,sigma\n";
  for (Index k = 0; k < sigma.size(); ++k) out << k + 1 << ',' << format_number(sigma(k)) << '\n';
}

void dump_correction_spectra(const ExperimentConfig& cfg, const Problem& problem,
                             const std::filesystem::path& path) {
  const std::vector<Vector> spectra = correction_spectra(problem, cfg);
  std::ofstream out = open_output(path);
  write_hash_line(out, cfg);
  out << "iteration,index,sigma\n";
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    for (Index k = 0; k < spectra[i].size(); ++k) {
      out << i << ',' << k + 1 << ',' << format_number(spectra[i](k)) << '\n';
    }
  }
}

}  // namespace lrmg::experiment
