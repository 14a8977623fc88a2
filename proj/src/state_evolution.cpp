#include "mamp/state_evolution.hpp"

#include <cmath>
#include <stdexcept>

namespace mamp {

namespace {

// (1/N) sum_i d_i^2 / (rho + d_i^2) over the A A^H spectrum
double resolvent_eps_gamma(const SpectralTable& table, double rho, double n_over) {
  double s = 0.0;
  for (double e : table.eigenvalues) s += e / (rho + e);
  return s / n_over;
}

}  // namespace

std::pair<double, double> oamp_se_step(const SpectralTable& table,
                                       const BernoulliGaussianPrior& prior, double sigma2,
                                       double v_phi, const Quality& q) {
  if (!(v_phi > 0.0)) throw std::invalid_argument("oamp_se_step: v_phi must be > 0");
  // N recovered from the normalization lambda_0 = M/N with M = eigenvalue count
  const double N = static_cast<double>(table.eigenvalues.size()) / table.lambda[0];
  const double rho = sigma2 / v_phi;
  const double eps_g = resolvent_eps_gamma(table, rho, N);
  const double v_gamma = v_phi * (1.0 / eps_g - 1.0);
  const double mmse = mmse_eval(prior, v_gamma, q);
  const double eps_phi = 1.0 - mmse / v_gamma;
  if (!(eps_phi > 0.0)) {
    throw std::runtime_error("oamp_se_step: eps_phi <= 0 (denoiser/variance inconsistency)");
  }
  const double v_phi_next = v_gamma * (1.0 / eps_phi - 1.0);
  return {v_gamma, v_phi_next};
}

FixedPointResult se_fixed_point(const SpectralTable& table,
                                const BernoulliGaussianPrior& prior, double sigma2,
                                double tol, std::size_t max_iter, const Quality& q) {
  if (!(tol > 0.0)) throw std::invalid_argument("se_fixed_point: tol must be > 0");
  FixedPointResult res;
  double v_phi = 1.0;
  double prev_mmse = 1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    auto [v_gamma, v_phi_next] = oamp_se_step(table, prior, sigma2, v_phi, q);
    const double m = mmse_eval(prior, v_gamma, q);
    res.v_gamma = v_gamma;
    res.v_phi = v_phi_next;
    res.mse = m;
    if (std::abs(m - prev_mmse) < tol) {
      res.converged = true;
      return res;
    }
    prev_mmse = m;
    v_phi = v_phi_next;
  }
  res.converged = false;
  return res;
}

double mamp_se_gamma(const SpectralTable& table, const MampSchedule& schedule,
                     const Eigen::MatrixXd& V_phibar, std::size_t t, std::size_t t_prime,
                     double sigma2) {
  if (t < 1 || t_prime < 1 || t > schedule.t_max || t_prime > schedule.t_max) {
    throw std::invalid_argument("mamp_se_gamma: iteration index out of range");
  }
  if ((t - 1) + (t_prime - 1) + 1 >= table.w.size()) {
    throw std::invalid_argument("mamp_se_gamma: spectral table order too small");
  }
  double s = 0.0;
  for (std::size_t i = 1; i <= t; ++i) {
    const double vt_i = schedule.vartheta(t, i);
    if (vt_i == 0.0) continue;
    for (std::size_t j = 1; j <= t_prime; ++j) {
      const double vt_j = schedule.vartheta(t_prime, j);
      if (vt_j == 0.0) continue;
      s += vt_i * vt_j * (sigma2 * table.w[(t - i) + (t_prime - j)] +
                          V_phibar(i, j) * table.wbar(t - i, t_prime - j));
    }
  }
  return s / (schedule.eps[t] * schedule.eps[t_prime]);
}

void mamp_se_nle_row(CovarianceState& cov, const BernoulliGaussianPrior& prior,
                     std::size_t t, const Quality& q) {
  if (cov.m_row_done[t]) return;
  const double v_tt = cov.V_gamma(t, t);
  cov.mmse[t] = mmse_eval(prior, v_tt, q);
  cov.eps_phi[t] = 1.0 - cov.mmse[t] / v_tt;
  if (!(cov.eps_phi[t] > 0.0)) {
    throw std::runtime_error("mamp_se_nle_row: eps_phi <= 0");
  }
  // raw orthogonal-NLE error cross-MSEs: m_tt = m_0t = mmse_t / eps_t; for
  // 1 <= k < t convert the joint-channel denoiser cross-MSE C_kt via
  // m_kt = (C_kt - m_k m_t v_kt / (v_kk v_tt)) / (eps_k eps_t)
  cov.M_nle(t, t) = cov.mmse[t] / cov.eps_phi[t];
  cov.M_nle(0, t) = cov.M_nle(t, 0) = cov.M_nle(t, t);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ks = 1; ks < static_cast<std::ptrdiff_t>(t); ++ks) {
    const std::size_t k = static_cast<std::size_t>(ks);
    Quality cq = q;
    cq.seed = q.seed + 131 * k + t;  // fixed per-pair seed: deterministic
    const double v_kk = cov.V_gamma(k, k);
    const double v_kt = cov.V_gamma(k, t);
    const double C = nle_cross_mse(prior, v_kk, v_tt, v_kt, NleMode::denoiser,
                                   NleMode::denoiser, cq);
    const double m = (C - cov.mmse[k] * cov.mmse[t] * v_kt / (v_kk * v_tt)) /
                     (cov.eps_phi[k] * cov.eps_phi[t]);
    cov.M_nle(k, t) = m;
    cov.M_nle(t, k) = m;
  }
  cov.m_row_done[t] = 1;
}

void mamp_se_phi(CovarianceState& cov, const BernoulliGaussianPrior& prior, std::size_t t,
                 const Eigen::VectorXd& zeta, std::size_t l_t, const Quality& q) {
  if (static_cast<std::size_t>(zeta.size()) != l_t) {
    throw std::invalid_argument("mamp_se_phi: zeta length != l_t");
  }
  mamp_se_nle_row(cov, prior, t, q);

  // D row t+1: window is {x_{t-l_t+2}, ..., x_t, z_t}; z_t's error is s_t
  const std::size_t first = t - l_t + 2;
  cov.D.row(t + 1).setZero();
  cov.D(t + 1, t) = zeta(static_cast<Eigen::Index>(l_t) - 1);
  for (std::size_t a = 0; a + 1 < l_t; ++a) {
    cov.D.row(t + 1) += zeta(static_cast<Eigen::Index>(a)) * cov.D.row(first + a);
  }

  for (std::size_t j = 1; j <= t + 1; ++j) {
    const double v = cov.D.row(t + 1).head(t + 1) *
                     cov.M_nle.topLeftCorner(t + 1, t + 1) *
                     cov.D.row(j).head(t + 1).transpose();
    cov.V_phibar(t + 1, j) = v;
    cov.V_phibar(j, t + 1) = v;
  }
}

}  // namespace mamp
