#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lrmg/experiment.hpp"
#include "oracles.hpp"

using namespace lrmg;
using namespace lrmg::experiment;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.level = 3;
  cfg.m = 2;
  cfg.p = 2;
  cfg.sigma = 0.1;
  cfg.out_dir = out;
  return cfg;
}

class ScratchDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lrmg_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::string> lines(const fs::path& file) const {
    std::ifstream in(dir_ / file);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  }

  fs::path dir_;
};

}  // namespace

TEST(Config, ParsesKeyValueTextWithComments) {
  std::istringstream in(
      "# benchmark row\n"
      "cov = sqexp\n"
      "sigma=0.3\n"
      "\n"
      "eps-abs = 1e-4\n"
      "level = 6   # finest\n"
      "m = auto\n"
      "mode = lowrank\n"
      "outer = rel\n");
  const ExperimentConfig cfg = parse_config(in);
  EXPECT_EQ(cfg.cov, kl::CovarianceKind::SquaredExponential);
  EXPECT_DOUBLE_EQ(cfg.sigma, 0.3);
  EXPECT_DOUBLE_EQ(cfg.eps_abs, 1e-4);
  EXPECT_EQ(cfg.level, 6);
  EXPECT_FALSE(cfg.m.has_value());
  EXPECT_EQ(cfg.mode, Mode::LowRank);
  EXPECT_EQ(cfg.outer, OuterTruncation::Relative);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig cfg;
  EXPECT_THROW(apply_setting(cfg, "sigmaa", "0.1"), std::invalid_argument);
  EXPECT_THROW(apply_setting(cfg, "sigma", "abc"), std::invalid_argument);
  EXPECT_THROW(apply_setting(cfg, "cov", "matern"), std::invalid_argument);
  EXPECT_THROW(apply_setting(cfg, "level", "5.5"), std::invalid_argument);
  std::istringstream missing_equals("sigma 0.1\n");
  EXPECT_THROW(parse_config(missing_equals), std::invalid_argument);
}

TEST(Config, OverridesLayerOnBase) {
  ExperimentConfig base;
  base.level = 7;
  std::istringstream in("p = 2\n");
  const ExperimentConfig cfg = parse_config(in, base);
  EXPECT_EQ(cfg.level, 7);
  EXPECT_EQ(cfg.p, 2);
}

TEST(Config, HashIsStableAndSensitive) {
  const ExperimentConfig a;
  ExperimentConfig b;
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  b.out_dir = "elsewhere";
  b.dump_spectrum = true;
  EXPECT_EQ(a.hash(), b.hash());
  b.eps_abs = 1e-4;
  EXPECT_NE(a.hash(), b.hash());
  ExperimentConfig c;
  c.m = 11;
  EXPECT_NE(a.hash(), c.hash());
  // Canonical text is the hash input and covers every numerical field.
  for (const char* key : {"cov", "sigma", "b", "level", "p", "m", "eps_abs", "eps_rel", "tol", "maxit",
                          "mode", "coarsest_level", "outer", "omega", "nu"}) {
    EXPECT_NE(a.canonical().find(std::string(key) + "="), std::string::npos) << key;
  }
}

TEST(Config, ValidationRejectsInconsistentLevels) {
  ExperimentConfig cfg;
  cfg.coarsest_level = 6;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ExperimentConfig{};
  cfg.sigma = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Presets, TablesCoverBenchmarkGrids) {
  for (int t = 1; t <= 4; ++t) {
    const auto rows = table_preset(t);
    ASSERT_EQ(rows.size(), 8u) << "table " << t;
    for (std::size_t i = 0; i < rows.size(); i += 2) {
      EXPECT_EQ(rows[i].mode, Mode::Both);
      EXPECT_DOUBLE_EQ(rows[i].eps_abs, 1e-6);
      EXPECT_EQ(rows[i + 1].mode, Mode::LowRank);
      EXPECT_DOUBLE_EQ(rows[i + 1].eps_abs, 1e-4);
    }
  }
  EXPECT_EQ(table_preset(1).front().level, 5);
  EXPECT_EQ(table_preset(1).back().level, 8);
  EXPECT_EQ(table_preset(4).front().cov, kl::CovarianceKind::SquaredExponential);
  EXPECT_DOUBLE_EQ(table_preset(4).front().b, 2.0);
  EXPECT_DOUBLE_EQ(table_preset(3).back().sigma, 0.3);
  EXPECT_DOUBLE_EQ(table_preset(2).back().b, 2.5);
  EXPECT_THROW(table_preset(5), std::invalid_argument);
}

TEST(Presets, BenchmarkProblemSizes) {
  ExperimentConfig exp = table_preset(1).front();
  exp.level = 3;  // same stochastic space, small mesh
  const Problem a = build_problem(exp);
  EXPECT_EQ(a.stochastic_size(), 364);
  EXPECT_EQ(a.kl.expansion.size(), 11u);
  EXPECT_EQ(fem::Grid(5).num_interior(), 3969);

  ExperimentConfig sq = table_preset(4).front();
  sq.level = 3;
  const Problem b = build_problem(sq);
  EXPECT_EQ(b.stochastic_size(), 20);
}

TEST(Problem, RightHandSideForms) {
  const Problem p = build_problem(small_config("."));
  EXPECT_EQ(p.spatial_size(), fem::Grid(3).num_interior());
  EXPECT_EQ(p.stochastic_size(), 6);
  EXPECT_EQ(p.rhs_factored().rank(), 1);
  EXPECT_LT((p.rhs_factored().dense() - p.rhs_dense()).norm(), 1e-15);
}

TEST_F(ScratchDir, BothModesShareHashAndWriteOutputs) {
  ExperimentConfig cfg = small_config(dir_);
  cfg.dump_truncations = true;
  cfg.export_matrices = true;
  const ExperimentResult result = run_experiment(cfg);
  ASSERT_EQ(result.rows.size(), 2u);
  EXPECT_EQ(result.rows[0].mode, "lowrank");
  EXPECT_EQ(result.rows[1].mode, "full");
  EXPECT_TRUE(result.converged());
  EXPECT_EQ(result.hash, cfg.hash());
  EXPECT_TRUE(result.rows[0].rank.has_value());
  EXPECT_FALSE(result.rows[1].rank.has_value());

  const auto csv = lines("results.csv");
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(csv[0],
            "config_hash,cov,sigma,b,level,m,p,eps_abs,eps_rel,mode,N_x,N_xi,rank,iterations,elapsed,"
            "rel_residual,converged,stop_reason");
  EXPECT_EQ(csv[1].substr(0, 17), result.hash + ",");
  EXPECT_EQ(csv[2].substr(0, 17), result.hash + ",");

  // A second run appends without repeating the header.
  run_experiment(cfg);
  EXPECT_EQ(lines("results.csv").size(), 5u);

  for (const std::string& name : {"history_" + result.hash + "_lowrank.csv", "history_" + result.hash + "_full.csv",
                                 "truncations_" + result.hash + ".csv"}) {
    const auto file = lines(name);
    ASSERT_GE(file.size(), 2u) << name;
    EXPECT_EQ(file[0], "# config_hash=" + result.hash) << name;
  }
  const auto history = lines("history_" + result.hash + "_lowrank.csv");
  EXPECT_EQ(history[1], "iter,rel_residual,rank");
  EXPECT_EQ(history.size(), static_cast<std::size_t>(result.rows[0].iterations) + 3);
  EXPECT_EQ(lines("truncations_" + result.hash + ".csv")[1], "iteration,level,tag,input_rank,kept_rank,index,sigma");
  EXPECT_TRUE(fs::exists(dir_ / ("matrices_" + result.hash) / "K0.txt"));
  EXPECT_TRUE(fs::exists(dir_ / ("matrices_" + result.hash) / "G2.txt"));

  std::ifstream json_in(dir_ / ("report_" + result.hash + ".json"));
  const nlohmann::json report = nlohmann::json::parse(json_in);
  EXPECT_EQ(report["config_hash"], result.hash);
  EXPECT_EQ(report["N_xi"], 6);
  EXPECT_EQ(report["rows"].size(), 2u);
  EXPECT_EQ(report["kl_eigenvalues"].size(), 2u);
  EXPECT_EQ(report["rows"][0]["iterations"], result.rows[0].iterations);
}

TEST_F(ScratchDir, RerunsAreBitIdenticalApartFromTimings) {
  const ExperimentConfig cfg = small_config(dir_);
  const Problem problem = build_problem(cfg);
  const ExperimentResult a = run_experiment(cfg, problem);
  const ExperimentResult b = run_experiment(cfg, problem);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].iterations, b.rows[i].iterations);
    EXPECT_EQ(a.rows[i].rank, b.rows[i].rank);
    EXPECT_EQ(a.rows[i].report.residual_history, b.rows[i].report.residual_history);
  }
  const auto csv = lines("results.csv");
  auto strip_elapsed = [](const std::string& row) {
    std::vector<std::string> fields;
    std::stringstream ss(row);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    fields.at(14).clear();
    std::string joined;
    for (const auto& f : fields) joined += f + ",";
    return joined;
  };
  EXPECT_EQ(strip_elapsed(csv[1]), strip_elapsed(csv[3]));
  EXPECT_EQ(strip_elapsed(csv[2]), strip_elapsed(csv[4]));
}

TEST_F(ScratchDir, SpectrumDumps) {
  ExperimentConfig cfg = small_config(dir_);
  cfg.mode = Mode::LowRank;
  cfg.dump_spectrum = true;
  cfg.dump_corrections = true;
  const ExperimentResult result = run_experiment(cfg);
  const auto spectrum = lines("spectrum_" + result.hash + ".csv");
  EXPECT_EQ(spectrum[0], "# config_hash=" + result.hash);
  EXPECT_EQ(spectrum[1], "index,sigma");
  const auto corrections = lines("corrections_" + result.hash + ".csv");
  EXPECT_EQ(corrections[1], "iteration,index,sigma");
}

TEST(Spectra, SolutionAndCorrectionProperties) {
  const ExperimentConfig cfg = small_config(".");
  const Problem p = build_problem(cfg);
  const Vector s = solution_spectrum(p, cfg);
  EXPECT_LE(s.size(), std::min(p.spatial_size(), p.stochastic_size()));
  for (Index i = 1; i < s.size(); ++i) EXPECT_LE(s(i), s(i - 1));
  EXPECT_GT(s(0), 1e3 * s(s.size() - 1));

  const auto spectra = correction_spectra(p, cfg);
  ASSERT_GE(spectra.size(), 2u);
  for (const Vector& c : spectra) {
    EXPECT_LE(c.size(), std::min(p.spatial_size(), p.stochastic_size()));
    for (Index i = 1; i < c.size(); ++i) EXPECT_LE(c(i), c(i - 1));
  }
  // The first correction is the first V-cycle output from a zero start.
  MultigridHierarchy const& h = p.hierarchy;
  const Matrix c0 = vcycle_full(h, h.finest_index(), Matrix::Zero(p.spatial_size(), p.stochastic_size()),
                                p.rhs_dense(), cfg.solver_config());
  const Vector ref = oracle::dense_singular_values(c0);
  EXPECT_LE((spectra[0] - ref.head(spectra[0].size())).cwiseAbs().maxCoeff(), 1e-12 * ref(0));
  // Later corrections are much smaller than the first.
  EXPECT_LT(spectra.back()(0), 1e-2 * spectra.front()(0));
}

TEST(FormatNumber, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(format_number(v)), v);
  EXPECT_EQ(format_number(0.5), "0.5");
}
