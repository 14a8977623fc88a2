#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mamp/harness.hpp"

using mamp::ExperimentConfig;

namespace {

std::string kv_file(const std::string& body) {
  static int counter = 0;
  std::string path = "test_cfg_" + std::to_string(counter++) + ".txt";
  std::ofstream out(path);
  out << body;
  return path;
}

ExperimentConfig small_cfg() {
  ExperimentConfig cfg;
  cfg.algo = "mamp";
  cfg.m = 256;
  cfg.n = 512;
  cfg.kappa = 10.0;
  cfg.mu = 0.1;
  cfg.snr_db = 30.0;
  cfg.t_max = 8;
  cfg.trials = 3;
  cfg.base_seed = 1;
  cfg.damping_length = 3;
  cfg.variance_mode = mamp::VarianceMode::empirical_residual;
  cfg.mode = "sim";
  return cfg;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

TEST_CASE("load_config: required keys, defaults, and override precedence") {
  // missing N names the key
  try {
    mamp::load_config({{"M", "128"}}, {});
    FAIL("expected an exception");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("'N'") != std::string::npos);
  }
  // defaults fill everything else
  ExperimentConfig cfg = mamp::load_config({{"M", "128"}, {"N", "256"}}, {});
  CHECK(cfg.algo == "mamp");
  CHECK(cfg.kappa == 10.0);
  CHECK(cfg.mu == 0.1);
  CHECK(cfg.snr_db == 30.0);
  CHECK(cfg.t_max == 50);
  CHECK(cfg.trials == 10);
  CHECK(cfg.damping_length == 3);
  CHECK(cfg.variance_mode == mamp::VarianceMode::analytic_se);
  CHECK(cfg.mode == "both");
  CHECK(cfg.sigma2() == doctest::Approx(1e-3).epsilon(1e-12));
  // CLI overrides beat the file
  cfg = mamp::load_config({{"M", "128"}, {"N", "256"}, {"kappa", "10"}},
                          {{"kappa", "100"}, {"variance-mode", "empirical_residual"}});
  CHECK(cfg.kappa == 100.0);
  CHECK(cfg.variance_mode == mamp::VarianceMode::empirical_residual);
}

TEST_CASE("load_config: errors name the offending key") {
  auto expect_key = [](const std::map<std::string, std::string>& kv, const std::string& key) {
    try {
      mamp::load_config(kv, {});
      FAIL_CHECK("expected an exception for key " << key);
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("'" + key + "'") != std::string::npos);
    }
  };
  expect_key({{"M", "128"}, {"N", "256"}, {"mu", "1.5"}}, "mu");
  expect_key({{"M", "128"}, {"N", "256"}, {"mu", "abc"}}, "mu");
  expect_key({{"M", "128"}, {"N", "256"}, {"iters", "200"}}, "iters");
  expect_key({{"M", "128"}, {"N", "256"}, {"iters", "0"}}, "iters");
  expect_key({{"M", "128"}, {"N", "256"}, {"kappa", "0.5"}}, "kappa");
  expect_key({{"M", "128"}, {"N", "256"}, {"algo", "vamp2"}}, "algo");
  expect_key({{"M", "128"}, {"N", "256"}, {"variance-mode", "magic"}}, "variance-mode");
  expect_key({{"M", "128"}, {"N", "256"}, {"mode", "all"}}, "mode");
  expect_key({{"M", "128"}, {"N", "256"}, {"trials", "0"}}, "trials");
  expect_key({{"M", "128"}, {"N", "256"}, {"damping-length", "0"}}, "damping-length");
  expect_key({{"M", "0"}, {"N", "256"}}, "M");
  expect_key({{"M", "128"}, {"N", "256"}, {"bogus", "1"}}, "bogus");
}

TEST_CASE("parse_config_file: comments, both separators, whitespace") {
  const std::string path = kv_file(
      "# benchmark configuration\n"
      "M = 128\n"
      "N 256\n"
      "  kappa =   50  # inline comment\n"
      "\n"
      "mode = se\n");
  auto kv = mamp::parse_config_file(path);
  CHECK(kv.at("M") == "128");
  CHECK(kv.at("N") == "256");
  CHECK(kv.at("kappa") == "50");
  CHECK(kv.at("mode") == "se");
  ExperimentConfig cfg = mamp::load_config(kv, {});
  CHECK(cfg.kappa == 50.0);
  CHECK(cfg.mode == "se");
  std::remove(path.c_str());
  CHECK_THROWS(mamp::parse_config_file("definitely_missing_file.cfg"));
}

TEST_CASE("csv output: exact header, row count, field gating") {
  ExperimentConfig cfg = small_cfg();
  auto coll = mamp::run_experiment(cfg);
  const std::string csv = mamp::csv_to_string(coll);
  auto lines = split(csv, '\n');
  REQUIRE(lines.size() == cfg.t_max + 1);  // header + one row per iteration
  CHECK(lines[0] ==
        "t,mse_sim_median_db,mse_sim_q1_db,mse_sim_q3_db,mse_se_db,"
        "v_gamma_tt,v_phibar_tt,theta_t,xi_t,diverged_trials");
  CHECK(csv.back() == '\n');

  // sim-only: mse_se_db (field 4) empty, diverged count present
  auto fields = split(lines[1], ',');
  REQUIRE(fields.size() == 10);
  CHECK(fields[4].empty());
  CHECK(!fields[1].empty());
  CHECK(fields[9] == "0");

  // se-only: sim medians empty, SE fields filled
  ExperimentConfig cse = small_cfg();
  cse.mode = "se";
  cse.variance_mode = mamp::VarianceMode::analytic_se;
  auto coll_se = mamp::run_experiment(cse);
  CHECK(coll_se.trials.empty());
  auto lines_se = split(mamp::csv_to_string(coll_se), '\n');
  auto f_se = split(lines_se[1], ',');
  // row for t = 1 ends with an empty diverged field -> 9 retained fields
  CHECK(f_se[1].empty());
  CHECK(f_se[2].empty());
  CHECK(f_se[3].empty());
  CHECK(!f_se[4].empty());
  CHECK(!f_se[5].empty());
  CHECK(!f_se[7].empty());
  CHECK(!f_se[8].empty());
}

TEST_CASE("csv round-trips the aggregates at 12 significant digits") {
  ExperimentConfig cfg = small_cfg();
  auto coll = mamp::run_experiment(cfg);
  auto lines = split(mamp::csv_to_string(coll), '\n');
  for (std::size_t t = 1; t <= cfg.t_max; ++t) {
    auto f = split(lines[t], ',');
    REQUIRE(f.size() == 10);
    CHECK(std::stoul(f[0]) == t);
    const double want = 10.0 * std::log10(coll.mse_median[t - 1]);
    const double got = std::stod(f[1]);
    CHECK(std::abs(got - want) <= 1e-9 * std::abs(want));
  }
}

TEST_CASE("write_csv writes exactly the string serialization") {
  ExperimentConfig cfg = small_cfg();
  cfg.t_max = 4;
  cfg.trials = 2;
  auto coll = mamp::run_experiment(cfg);
  const std::string path = "test_out_roundtrip.csv";
  mamp::write_csv(coll, path);
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == mamp::csv_to_string(coll));
  std::remove(path.c_str());
}

TEST_CASE("run_experiment is deterministic and thread-count independent") {
  ExperimentConfig cfg = small_cfg();
  cfg.t_max = 6;
  const std::string a = mamp::csv_to_string(mamp::run_experiment(cfg));
  const std::string b = mamp::csv_to_string(mamp::run_experiment(cfg));
  CHECK(a == b);

  const int save = omp_get_max_threads();
  omp_set_num_threads(1);
  const std::string c = mamp::csv_to_string(mamp::run_experiment(cfg));
  omp_set_num_threads(save);
  CHECK(a == c);
}

TEST_CASE("run_experiment aggregates per-trial medians correctly") {
  ExperimentConfig cfg = small_cfg();
  cfg.trials = 3;
  cfg.t_max = 5;
  auto coll = mamp::run_experiment(cfg);
  REQUIRE(coll.trials.size() == 3);
  for (std::size_t t = 1; t <= cfg.t_max; ++t) {
    std::vector<double> vals;
    for (const auto& tr : coll.trials) {
      REQUIRE(tr.report.iterations.size() >= t);
      vals.push_back(tr.report.iterations[t - 1].mse_posterior);
    }
    std::sort(vals.begin(), vals.end());
    CHECK(coll.mse_median[t - 1] == vals[1]);  // median of 3 = middle value
    CHECK(coll.mse_q1[t - 1] >= vals[0]);
    CHECK(coll.mse_q3[t - 1] <= vals[2]);
    CHECK(coll.mse_q1[t - 1] <= coll.mse_median[t - 1]);
    CHECK(coll.mse_q3[t - 1] >= coll.mse_median[t - 1]);
  }
  // trial seeds are base_seed + index
  for (std::size_t i = 0; i < coll.trials.size(); ++i) {
    CHECK(coll.trials[i].index == i);
    CHECK(coll.trials[i].seed == cfg.base_seed + i);
  }
}

TEST_CASE("oamp and amp run through the harness") {
  ExperimentConfig cfg = small_cfg();
  cfg.algo = "oamp";
  cfg.mode = "both";
  auto coll = mamp::run_experiment(cfg);
  CHECK(!coll.se_mse.empty());
  CHECK(coll.mse_median.back() < coll.mse_median.front());

  cfg.algo = "amp";
  cfg.mode = "sim";
  auto coll2 = mamp::run_experiment(cfg);
  CHECK(coll2.trials.size() == cfg.trials);
  auto lines = split(mamp::csv_to_string(coll2), '\n');
  auto f = split(lines[1], ',');
  CHECK(f[4].empty());  // no SE column for amp on the dft ensemble
}

TEST_CASE("diagnose_orthogonality returns bounded diagnostics on a small system") {
  ExperimentConfig cfg = small_cfg();
  cfg.m = 1024;
  cfg.n = 2048;
  cfg.t_max = 6;
  auto diag = mamp::diagnose_orthogonality(cfg, 4, 6);
  CHECK(diag.seeds == 4);
  CHECK(diag.mean_corr.rows() == 6);
  CHECK(diag.max_abs_corr > 0.0);
  CHECK(diag.max_abs_corr < 0.2);
  CHECK(std::isfinite(diag.max_excess_kurtosis));
  CHECK(diag.max_excess_kurtosis < 0.5);
  // requires mamp
  ExperimentConfig bad = cfg;
  bad.algo = "amp";
  CHECK_THROWS(mamp::diagnose_orthogonality(bad, 2, 4));
}

TEST_CASE("write_plot_svg produces an svg file") {
  ExperimentConfig cfg = small_cfg();
  cfg.mode = "both";
  cfg.variance_mode = mamp::VarianceMode::empirical_residual;
  auto coll = mamp::run_experiment(cfg);
  const std::string path = "test_plot.svg";
  mamp::write_plot_svg(coll, path);
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string svg = buf.str();
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::remove(path.c_str());
}
