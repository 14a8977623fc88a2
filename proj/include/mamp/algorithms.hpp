#pragma once

#include <limits>
#include <optional>

#include "mamp/state_evolution.hpp"

namespace mamp {

enum class VarianceMode { analytic_se, empirical_residual };
enum class RunStatus { converged, diverged, max_iters };
enum class OampMode { simulate, track_se_only };

struct IterationRecord {
  std::size_t t = 0;
  double mse_posterior = std::numeric_limits<double>::quiet_NaN();  // (1/N)||phihat(r_t)-x||^2
  double mse_se_predicted = std::numeric_limits<double>::quiet_NaN();
  double v_gamma_tt = std::numeric_limits<double>::quiet_NaN();
  double v_phibar_tt = std::numeric_limits<double>::quiet_NaN();
  double theta_t = std::numeric_limits<double>::quiet_NaN();
  double xi_t = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
};

struct RunReport {
  std::vector<IterationRecord> iterations;
  RunStatus status = RunStatus::max_iters;
  double final_mse = std::numeric_limits<double>::quiet_NaN();
};

// Optional capture of per-iteration vectors for diagnostics (orthogonality /
// Gaussianity checks need g_t = r_t - x and f_t = x_t - x).
struct MampTrace {
  std::vector<cvec> r;        // r_t, t = 1..T
  std::vector<cvec> x_iter;   // x_t, t = 1..T (pre-NLE memory iterates)
  std::vector<double> v_gamma_tt;
  std::vector<double> v_phibar_tt;
};

// Precomputed analytic schedule + covariance SE; data-independent, so one
// plan is shared by all trials of a configuration.
struct MampPlan {
  MampSchedule schedule;
  CovarianceState cov;
  std::vector<double> mmse_pred;  // SE-predicted posterior MSE, index 1..t_max
  std::size_t L = 1;

  MampPlan(std::size_t t_max, std::size_t L_) : schedule(t_max), cov(t_max), mmse_pred(t_max + 1, 0.0), L(L_) {}
};

// theta_t, xi_t, vartheta/p rows and eps_t for iteration t, from whichever
// V_phibar source (analytic SE or empirical residual estimates) is supplied.
void mamp_step_schedule(const SpectralTable& table, const Eigen::MatrixXd& V_phibar,
                        MampSchedule& schedule, std::size_t t, double sigma2);

// zeta = V^{-1} 1 / (1^T V^{-1} 1) with relative ridge 1e-9.
Eigen::VectorXd optimal_damping(const Eigen::MatrixXd& V, std::size_t l);

// Window error covariance. empirical_residual: entry (i,j) =
// delta * [ (1/M)(y - A u_i)^H (y - A u_j) - sigma2 ] / lambda_1, symmetrized,
// negative diagonal clipped to 1e-15. analytic_se requires `cov` and
// `window_rows`: entry j > 0 names the memory iterate x_j (error f_j, D row j);
// entry -t names the undamped NLE output z_t (error s_t).
Eigen::MatrixXd estimate_error_covariance(const LinearOperator& op, const cvec& y,
                                          double sigma2, const SpectralTable& table,
                                          const std::vector<const cvec*>& window,
                                          VarianceMode mode,
                                          const CovarianceState* cov = nullptr,
                                          const std::vector<long>* window_rows = nullptr);

// Same estimator when the residuals y - A u_i are already available.
Eigen::MatrixXd residual_covariance(const std::vector<const cvec*>& residuals,
                                    double sigma2, double delta, double lambda1);

MampPlan build_mamp_plan(const SpectralTable& table, const BernoulliGaussianPrior& prior,
                         double sigma2, std::size_t t_max, std::size_t L,
                         const Quality& q = {Quality::Method::quadrature, 200'000, 7777});

RunReport run_mamp(const LinearOperator& op, const SpectralTable& table,
                   const BernoulliGaussianPrior& prior, const cvec& y, double sigma2,
                   std::size_t t_max, std::size_t L, VarianceMode variance_mode,
                   const cvec* x_true = nullptr, const MampPlan* plan = nullptr,
                   MampTrace* trace = nullptr);

RunReport run_oamp_vamp(const LinearOperator& op, const SpectralTable& table,
                        const BernoulliGaussianPrior& prior, const cvec& y, double sigma2,
                        std::size_t t_max, OampMode mode = OampMode::simulate,
                        const cvec* x_true = nullptr);

RunReport run_amp(const LinearOperator& op, const BernoulliGaussianPrior& prior,
                  const cvec& y, double sigma2, std::size_t t_max,
                  double damping_factor = 1.0, const cvec* x_true = nullptr);

}  // namespace mamp
