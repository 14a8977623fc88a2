#pragma once

#include <Eigen/Dense>

#include "mamp/operators.hpp"
#include "mamp/prior.hpp"

namespace mamp {

// MAMP parameter schedule. All tables are 1-based in the iteration index t
// (row/entry 0 unused) to match the paper's indexing.
//   vartheta(t, i) = xi_i * prod_{tau=i+1..t} theta_tau
//   p(t, i)        = vartheta(t, i) * w_{t-i}
//   eps[t]         = sum_i p(t, i)
struct MampSchedule {
  std::size_t t_max = 0;
  std::vector<double> theta, xi, eps;  // index 1..t_max
  Eigen::MatrixXd vartheta, p;         // (t_max+1) x (t_max+1)
  std::vector<Eigen::VectorXd> zeta;   // zeta[t], length l_t = min(L, t+1)

  explicit MampSchedule(std::size_t tmax)
      : t_max(tmax),
        theta(tmax + 1, 0.0),
        xi(tmax + 1, 0.0),
        eps(tmax + 1, 0.0),
        vartheta(Eigen::MatrixXd::Zero(tmax + 1, tmax + 1)),
        p(Eigen::MatrixXd::Zero(tmax + 1, tmax + 1)),
        zeta(tmax + 1) {}
};

// Covariance-matrix state evolution bookkeeping.
//   V_gamma(t, t')   = (1/N) E{g_t^H g_t'}            (LE output errors)
//   V_phibar(t, t')  = (1/N) E{f_t^H f_t'}            (NLE-input errors, f_t = x_t - x)
//   M_nle(k, k')     = (1/N) E{s_k^H s_k'}            (orthogonal-NLE errors; s_0 = -x)
//   D                = expansion table, f_j = sum_k D(j, k) s_k
struct CovarianceState {
  Eigen::MatrixXd V_gamma;   // (t_max+1)^2, rows 1..t_max
  Eigen::MatrixXd V_phibar;  // (t_max+2)^2, rows 1..t_max+1
  Eigen::MatrixXd M_nle;     // (t_max+1)^2, rows 0..t_max
  Eigen::MatrixXd D;         // (t_max+2) x (t_max+1)
  std::vector<double> mmse;     // mmse at V_gamma(t,t), index 1..t_max
  std::vector<double> eps_phi;  // 1 - mmse/v, index 1..t_max
  std::vector<char> m_row_done;  // whether M_nle row t is filled

  explicit CovarianceState(std::size_t t_max)
      : V_gamma(Eigen::MatrixXd::Zero(t_max + 1, t_max + 1)),
        V_phibar(Eigen::MatrixXd::Zero(t_max + 2, t_max + 2)),
        M_nle(Eigen::MatrixXd::Zero(t_max + 1, t_max + 1)),
        D(Eigen::MatrixXd::Zero(t_max + 2, t_max + 1)),
        mmse(t_max + 1, 0.0),
        eps_phi(t_max + 1, 0.0),
        m_row_done(t_max + 1, 0) {
    V_phibar(1, 1) = 1.0;  // x_1 = 0, error -x, variance 1
    M_nle(0, 0) = 1.0;     // s_0 = -x
    D(1, 0) = 1.0;         // f_1 = s_0
  }
};

// One scalar OAMP/VAMP SE step: returns (v_gamma, v_phi_next).
std::pair<double, double> oamp_se_step(const SpectralTable& table,
                                       const BernoulliGaussianPrior& prior, double sigma2,
                                       double v_phi, const Quality& q = {});

struct FixedPointResult {
  double mse = 0.0;      // mmse at the fixed point
  double v_gamma = 0.0;
  double v_phi = 0.0;
  bool converged = false;
};

FixedPointResult se_fixed_point(const SpectralTable& table,
                                const BernoulliGaussianPrior& prior, double sigma2,
                                double tol = 1e-10, std::size_t max_iter = 1000,
                                const Quality& q = {});

// Closed-form v^gamma_{t t'} from the error expansion of the memory LE.
double mamp_se_gamma(const SpectralTable& table, const MampSchedule& schedule,
                     const Eigen::MatrixXd& V_phibar, std::size_t t, std::size_t t_prime,
                     double sigma2);

// Fills M_nle row/column t (raw orthogonal-NLE error cross-MSEs against all
// earlier iterations and the pseudo error s_0 = -x) from the V_gamma entries;
// also caches mmse[t] and eps_phi[t]. Idempotent.
void mamp_se_nle_row(CovarianceState& cov, const BernoulliGaussianPrior& prior,
                     std::size_t t, const Quality& q = {});

// NLE side of the covariance SE: fills M_nle row/column t (from V_gamma),
// extends D with row t+1 using the damping weights, and fills V_phibar
// row/column t+1. zeta has length l_t; the window is {x_{t-l_t+2},...,x_t, z_t}.
void mamp_se_phi(CovarianceState& cov, const BernoulliGaussianPrior& prior, std::size_t t,
                 const Eigen::VectorXd& zeta, std::size_t l_t, const Quality& q = {});

}  // namespace mamp
