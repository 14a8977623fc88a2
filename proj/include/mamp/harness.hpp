#pragma once

#include <map>
#include <string>

#include "mamp/algorithms.hpp"

namespace mamp {

struct ExperimentConfig {
  std::string algo = "mamp";  // amp | oamp | mamp
  std::size_t m = 0, n = 0;   // required
  double kappa = 10.0;
  double mu = 0.1;
  double snr_db = 30.0;
  std::size_t t_max = 50;
  std::size_t trials = 10;
  std::uint64_t base_seed = 1;
  std::size_t damping_length = 3;
  VarianceMode variance_mode = VarianceMode::analytic_se;
  std::string mode = "both";  // sim | se | both
  std::string output_path;

  double sigma2() const;  // SNR = 1/sigma^2, snr_db = 10 log10(1/sigma^2)
  void validate() const;  // throws naming the offending key
};

// Merge precedence: overrides (CLI) win over file entries. Unknown keys are
// rejected by name. Keys use the CLI spelling: algo, M, N, kappa, mu, snr-db,
// iters, trials, seed, damping-length, variance-mode, mode, out.
std::map<std::string, std::string> parse_config_file(const std::string& path);
ExperimentConfig load_config(const std::map<std::string, std::string>& file_kv,
                             const std::map<std::string, std::string>& override_kv);

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  RunReport report;
  double wall_time_s = 0.0;
};

struct RunReportCollection {
  ExperimentConfig cfg;
  std::vector<TrialRecord> trials;
  // per-iteration aggregates over non-diverged trials (empty when mode = se)
  std::vector<double> mse_median, mse_q1, mse_q3;
  std::vector<std::size_t> diverged_by_iter;  // trials diverged at or before t
  // SE trajectory (empty when mode = sim)
  std::vector<double> se_mse, se_v_gamma, se_v_phibar, se_theta, se_xi;
};

RunReportCollection run_experiment(const ExperimentConfig& cfg);

// Header contract (bit-exact):
// t,mse_sim_median_db,mse_sim_q1_db,mse_sim_q3_db,mse_se_db,v_gamma_tt,v_phibar_tt,theta_t,xi_t,diverged_trials
void write_csv(const RunReportCollection& coll, const std::string& path);

struct OrthogonalityDiagnostics {
  Eigen::MatrixXd mean_corr;           // (T x T) lower triangle, t' <= t, seed-averaged
  std::vector<double> excess_kurtosis; // per iteration, seed-averaged
  double max_abs_corr = 0.0;
  double max_excess_kurtosis = 0.0;
  std::size_t seeds = 0;
};

// Genie diagnostics for Theorem 1: normalized correlations
// (1/N) g_t^H f_t' / sqrt(v^gamma_tt v^phibar_t't') and excess kurtosis of
// the g_t entries. Requires algo = mamp and a synthetic run.
OrthogonalityDiagnostics diagnose_orthogonality(const ExperimentConfig& cfg,
                                                std::size_t seeds = 10,
                                                std::size_t t_limit = 20);

void write_plot_svg(const RunReportCollection& coll, const std::string& path);

std::string csv_to_string(const RunReportCollection& coll);

}  // namespace mamp
