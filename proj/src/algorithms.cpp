#include "mamp/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "mamp/parallel.hpp"

namespace mamp {

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

bool finite_vec(const cvec& v) {
  for (const auto& z : v) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

// expansion row over {s_0..s_t} for a window slot (see estimate_error_covariance)
Eigen::RowVectorXd slot_row(const CovarianceState& cov, long slot, std::size_t dim) {
  Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(dim));
  if (slot > 0) {
    r = cov.D.row(slot).head(static_cast<Eigen::Index>(dim));
  } else if (slot < 0) {
    r(static_cast<Eigen::Index>(-slot)) = 1.0;
  } else {
    throw std::invalid_argument("estimate_error_covariance: slot 0 is invalid");
  }
  return r;
}

// damping safeguard: never accept a window combination predicted to be worse
// (up to a relative margin) than keeping x_t; degenerate plateau windows would
// otherwise yield huge cancelling weights
Eigen::VectorXd safeguarded_damping(const Eigen::MatrixXd& V, std::size_t l) {
  Eigen::VectorXd zeta = optimal_damping(V, l);
  if (l >= 2) {
    const double obj = zeta.transpose() * V * zeta;
    const double keep = V(static_cast<Eigen::Index>(l) - 2, static_cast<Eigen::Index>(l) - 2);
    if (!(obj <= keep * (1.0 - 1e-10))) {
      zeta.setZero();
      zeta(static_cast<Eigen::Index>(l) - 2) = 1.0;
    }
  }
  return zeta;
}

RunStatus final_status(const std::vector<IterationRecord>& iters, bool diverged) {
  if (diverged) return RunStatus::diverged;
  if (iters.size() >= 2) {
    const double a = iters[iters.size() - 2].mse_posterior;
    const double b = iters.back().mse_posterior;
    const double metric_a = std::isnan(a) ? iters[iters.size() - 2].v_gamma_tt : a;
    const double metric_b = std::isnan(b) ? iters.back().v_gamma_tt : b;
    if (std::isfinite(metric_a) && std::isfinite(metric_b) && metric_a > 0.0 &&
        std::abs(metric_b - metric_a) < 1e-2 * metric_a) {
      return RunStatus::converged;
    }
  }
  return RunStatus::max_iters;
}

}  // namespace

void mamp_step_schedule(const SpectralTable& table, const Eigen::MatrixXd& V_phibar,
                        MampSchedule& schedule, std::size_t t, double sigma2) {
  if (t < 1 || t > schedule.t_max) throw std::invalid_argument("mamp_step_schedule: bad t");
  const auto& w = table.w;
  const double w0 = w[0];
  const double v_tt = std::max(V_phibar(t, t), 1e-15);

  schedule.theta[t] = 1.0 / (table.lambda_dagger + sigma2 / v_tt);
  for (std::size_t i = 1; i < t; ++i) {
    schedule.vartheta(t, i) = schedule.theta[t] * schedule.vartheta(t - 1, i);
  }
  if (t == 1) {
    schedule.xi[1] = 1.0;
  } else {
    double c0 = 0.0, c2 = 0.0, c3 = 0.0;
    const double c1 = sigma2 * w0 + v_tt * table.wbar(0, 0);
    for (std::size_t i = 1; i < t; ++i) {
      const double vt_i = schedule.vartheta(t, i);
      c0 += vt_i * w[t - i] / w0;
      c2 -= vt_i * (sigma2 * w[t - i] + V_phibar(t, i) * table.wbar(0, t - i));
      for (std::size_t j = 1; j < t; ++j) {
        c3 += vt_i * schedule.vartheta(t, j) *
              (sigma2 * w[2 * t - i - j] + V_phibar(i, j) * table.wbar(t - i, t - j));
      }
    }
    const double den = c1 * c0 + c2;
    schedule.xi[t] = (std::abs(den) > 1e-300) ? (c2 * c0 + c3) / den : 1.0;
    if (!std::isfinite(schedule.xi[t])) schedule.xi[t] = 1.0;
  }
  schedule.vartheta(t, t) = schedule.xi[t];
  double eps = 0.0;
  for (std::size_t i = 1; i <= t; ++i) {
    schedule.p(t, i) = schedule.vartheta(t, i) * w[t - i];
    eps += schedule.p(t, i);
  }
  if (!(std::abs(eps) > 1e-300) || !std::isfinite(eps)) {
    throw std::runtime_error("mamp_step_schedule: degenerate normalization eps_t = 0");
  }
  schedule.eps[t] = eps;
}

Eigen::VectorXd optimal_damping(const Eigen::MatrixXd& V, std::size_t l) {
  if (l < 1) throw std::invalid_argument("optimal_damping: l must be >= 1");
  if (V.rows() != static_cast<Eigen::Index>(l) || V.cols() != static_cast<Eigen::Index>(l)) {
    throw std::invalid_argument("optimal_damping: V must be l x l");
  }
  if (l == 1) return Eigen::VectorXd::Ones(1);
  const double ridge = 1e-9 * V.diagonal().mean();
  Eigen::MatrixXd Vr = V + ridge * Eigen::MatrixXd::Identity(V.rows(), V.cols());
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(V.rows());
  Eigen::VectorXd zi = Vr.ldlt().solve(ones);
  const double denom = zi.sum();
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw std::runtime_error("optimal_damping: 1^T V^{-1} 1 <= 0 after regularization");
  }
  return zi / denom;
}

Eigen::MatrixXd residual_covariance(const std::vector<const cvec*>& residuals,
                                    double sigma2, double delta, double lambda1) {
  const std::size_t l = residuals.size();
  if (l == 0) throw std::invalid_argument("residual_covariance: empty window");
  const double M = static_cast<double>(residuals[0]->size());
  Eigen::MatrixXd V(l, l);
  for (std::size_t a = 0; a < l; ++a) {
    for (std::size_t b = a; b < l; ++b) {
      const double ip = par::dot_real(*residuals[a], *residuals[b]) / M;
      const double v = delta * (ip - sigma2) / lambda1;
      V(a, b) = v;
      V(b, a) = v;
    }
  }
  for (std::size_t a = 0; a < l; ++a) {
    if (V(a, a) < 1e-15) V(a, a) = 1e-15;  // clip negative diagonal
  }
  return V;
}

Eigen::MatrixXd estimate_error_covariance(const LinearOperator& op, const cvec& y,
                                          double sigma2, const SpectralTable& table,
                                          const std::vector<const cvec*>& window,
                                          VarianceMode mode, const CovarianceState* cov,
                                          const std::vector<long>* window_rows) {
  if (window.empty() && mode == VarianceMode::empirical_residual) {
    throw std::invalid_argument("estimate_error_covariance: empty window");
  }
  if (mode == VarianceMode::analytic_se) {
    if (cov == nullptr || window_rows == nullptr || window_rows->empty()) {
      throw std::invalid_argument(
          "estimate_error_covariance: analytic_se requires covariance state and window rows");
    }
    long tmax_slot = 0;
    for (long s : *window_rows) tmax_slot = std::max(tmax_slot, std::abs(s));
    const std::size_t dim = static_cast<std::size_t>(tmax_slot) + 1;
    const std::size_t l = window_rows->size();
    Eigen::MatrixXd V(l, l);
    const auto& M = cov->M_nle;
    for (std::size_t a = 0; a < l; ++a) {
      Eigen::RowVectorXd ra = slot_row(*cov, (*window_rows)[a], dim);
      for (std::size_t b = a; b < l; ++b) {
        Eigen::RowVectorXd rb = slot_row(*cov, (*window_rows)[b], dim);
        const double v = ra * M.topLeftCorner(dim, dim) * rb.transpose();
        V(a, b) = v;
        V(b, a) = v;
      }
    }
    return V;
  }
  // empirical_residual
  std::vector<cvec> resids;
  resids.reserve(window.size());
  std::vector<const cvec*> ptrs;
  for (const cvec* u : window) {
    cvec r = op.forward(*u);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - r[i];
    resids.push_back(std::move(r));
  }
  for (const auto& r : resids) ptrs.push_back(&r);
  const double delta = static_cast<double>(op.m()) / static_cast<double>(op.n());
  return residual_covariance(ptrs, sigma2, delta, table.lambda[1]);
}

MampPlan build_mamp_plan(const SpectralTable& table, const BernoulliGaussianPrior& prior,
                         double sigma2, std::size_t t_max, std::size_t L, const Quality& q) {
  if (L < 1) throw std::invalid_argument("build_mamp_plan: L must be >= 1");
  MampPlan plan(t_max, L);
  auto& sched = plan.schedule;
  auto& cov = plan.cov;
  for (std::size_t t = 1; t <= t_max; ++t) {
    mamp_step_schedule(table, cov.V_phibar, sched, t, sigma2);
    for (std::size_t tp = 1; tp <= t; ++tp) {
      const double v = mamp_se_gamma(table, sched, cov.V_phibar, t, tp, sigma2);
      cov.V_gamma(t, tp) = v;
      cov.V_gamma(tp, t) = v;
    }
    mamp_se_nle_row(cov, prior, t, q);
    plan.mmse_pred[t] = cov.mmse[t];

    const std::size_t l_t = std::min(L, t + 1);
    const std::size_t first = t - l_t + 2;
    // window error covariance {f_{first}, ..., f_t, s_t} from the SE tables
    Eigen::MatrixXd Vwin(l_t, l_t);
    for (std::size_t a = 0; a < l_t; ++a) {
      const bool a_is_z = (a + 1 == l_t);
      Eigen::RowVectorXd ra;
      if (a_is_z) {
        ra = Eigen::RowVectorXd::Zero(t + 1);
        ra(static_cast<Eigen::Index>(t)) = 1.0;
      } else {
        ra = cov.D.row(static_cast<Eigen::Index>(first + a)).head(t + 1);
      }
      for (std::size_t b = a; b < l_t; ++b) {
        Eigen::RowVectorXd rb;
        if (b + 1 == l_t) {
          rb = Eigen::RowVectorXd::Zero(t + 1);
          rb(static_cast<Eigen::Index>(t)) = 1.0;
        } else {
          rb = cov.D.row(static_cast<Eigen::Index>(first + b)).head(t + 1);
        }
        const double v = ra * cov.M_nle.topLeftCorner(t + 1, t + 1) * rb.transpose();
        Vwin(a, b) = v;
        Vwin(b, a) = v;
      }
    }
    Eigen::VectorXd zeta = safeguarded_damping(Vwin, l_t);
    sched.zeta[t] = zeta;
    mamp_se_phi(cov, prior, t, zeta, l_t, q);
  }
  return plan;
}

RunReport run_mamp(const LinearOperator& op, const SpectralTable& table,
                   const BernoulliGaussianPrior& prior, const cvec& y, double sigma2,
                   std::size_t t_max, std::size_t L, VarianceMode variance_mode,
                   const cvec* x_true, const MampPlan* plan, MampTrace* trace) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("run_mamp: sigma2 must be > 0");
  if (L < 1) throw std::invalid_argument("run_mamp: L must be >= 1");
  if (t_max > kMaxIterations) throw std::invalid_argument("run_mamp: t_max exceeds cap");
  const std::size_t n = op.n();
  const std::size_t m = op.m();
  const double N = static_cast<double>(n);
  const double delta = static_cast<double>(m) / N;
  const double lambda1 = table.lambda[1];

  const bool analytic = (variance_mode == VarianceMode::analytic_se);
  std::optional<MampPlan> local_plan;
  if (analytic && plan == nullptr) {
    local_plan.emplace(build_mamp_plan(table, prior, sigma2, t_max, L));
    plan = &*local_plan;
  }
  if (analytic && plan->schedule.t_max < t_max) {
    throw std::invalid_argument("run_mamp: supplied plan shorter than t_max");
  }

  // empirical mode: per-trial schedule driven by residual-estimated V_phibar
  MampSchedule online_sched(analytic ? 0 : t_max);
  Eigen::MatrixXd Vphi_emp;
  if (!analytic) Vphi_emp = Eigen::MatrixXd::Zero(t_max + 2, t_max + 2);

  std::vector<cvec> xs(t_max + 2);
  std::vector<cvec> resid(t_max + 2);
  xs[1].assign(n, {0.0, 0.0});
  resid[1] = y;  // y - A x_1 with x_1 = 0

  const Quality quad{Quality::Method::quadrature, 0, 0};
  auto est_entry = [&](const cvec& ra, const cvec& rb) {
    return delta * (par::dot_real(ra, rb) / static_cast<double>(m) - sigma2) / lambda1;
  };
  if (!analytic) Vphi_emp(1, 1) = std::max(est_entry(resid[1], resid[1]), 1e-15);

  RunReport report;
  cvec rhat(m, {0.0, 0.0});
  bool diverged = false;

  for (std::size_t t = 1; t <= t_max; ++t) {
    const auto t0 = clock_type::now();
    IterationRecord rec;
    rec.t = t;

    const MampSchedule& sched = analytic ? plan->schedule : online_sched;
    if (!analytic) mamp_step_schedule(table, Vphi_emp, online_sched, t, sigma2);
    const double theta_t = sched.theta[t];
    const double xi_t = sched.xi[t];

    // r_hat_t = theta_t B r_hat_{t-1} + xi_t (y - A x_t)
    rhat = op.apply_B(table.lambda_dagger, rhat);
    for (std::size_t i = 0; i < m; ++i) rhat[i] = theta_t * rhat[i] + xi_t * resid[t][i];

    // r_t = (A^H r_hat_t + sum_i p_{ti} x_i) / eps_t
    cvec r = op.adjoint(rhat);
    for (std::size_t i = 1; i <= t; ++i) {
      par::axpy(sched.p(t, i), xs[i], r);
    }
    const double inv_eps = 1.0 / sched.eps[t];
    for (auto& z : r) z *= inv_eps;

    double vg = analytic ? plan->cov.V_gamma(t, t)
                         : mamp_se_gamma(table, online_sched, Vphi_emp, t, t, sigma2);
    vg = std::max(vg, 1e-15);

    cvec post = denoise(prior, r, vg);
    if (x_true != nullptr) {
      cvec err = post;
      for (std::size_t i = 0; i < n; ++i) err[i] -= (*x_true)[i];
      rec.mse_posterior = par::norm2(err) / N;
    }
    rec.v_gamma_tt = vg;
    rec.v_phibar_tt = analytic ? plan->cov.V_phibar(t, t) : Vphi_emp(t, t);
    rec.theta_t = theta_t;
    rec.xi_t = xi_t;
    if (analytic) rec.mse_se_predicted = plan->mmse_pred[t];

    // orthogonalized NLE output
    double eps_phi;
    if (analytic) {
      eps_phi = plan->cov.eps_phi[t];
    } else {
      const double mm = mmse_eval(prior, vg, quad);
      eps_phi = std::max(1.0 - mm / vg, 1e-12);
    }
    cvec z = post;
    const double inv_ep = 1.0 / eps_phi;
    const double shift = (eps_phi - 1.0) * inv_ep;
    for (std::size_t i = 0; i < n; ++i) z[i] = z[i] * inv_ep + shift * r[i];

    // residual of the candidate
    cvec rz = op.forward(z);
    for (std::size_t i = 0; i < m; ++i) rz[i] = y[i] - rz[i];

    // damping over the window {x_{t-l+2}, ..., x_t, z_t}
    const std::size_t l_t = std::min(L, t + 1);
    const std::size_t first = t - l_t + 2;
    Eigen::VectorXd zeta;
    if (analytic) {
      zeta = plan->schedule.zeta[t];
    } else {
      std::vector<const cvec*> rwin;
      for (std::size_t i = first; i <= t; ++i) rwin.push_back(&resid[i]);
      rwin.push_back(&rz);
      Eigen::MatrixXd V = residual_covariance(rwin, sigma2, delta, lambda1);
      zeta = safeguarded_damping(V, l_t);
    }

    // x_{t+1} and its residual (linear in the combination)
    cvec xn(n, {0.0, 0.0});
    cvec rn(m, {0.0, 0.0});
    par::axpy(zeta(static_cast<Eigen::Index>(l_t) - 1), z, xn);
    par::axpy(zeta(static_cast<Eigen::Index>(l_t) - 1), rz, rn);
    for (std::size_t a = 0; a + 1 < l_t; ++a) {
      par::axpy(zeta(static_cast<Eigen::Index>(a)), xs[first + a], xn);
      par::axpy(zeta(static_cast<Eigen::Index>(a)), resid[first + a], rn);
    }
    xs[t + 1] = std::move(xn);
    resid[t + 1] = std::move(rn);

    if (!analytic) {
      for (std::size_t j = 1; j <= t + 1; ++j) {
        const double v = est_entry(resid[t + 1], resid[j]);
        Vphi_emp(t + 1, j) = v;
        Vphi_emp(j, t + 1) = v;
      }
      Vphi_emp(t + 1, t + 1) = std::max(Vphi_emp(t + 1, t + 1), 1e-15);
    }

    if (trace != nullptr) {
      trace->r.push_back(r);
      trace->x_iter.push_back(xs[t]);
      trace->v_gamma_tt.push_back(vg);
      trace->v_phibar_tt.push_back(rec.v_phibar_tt);
    }

    rec.wall_time_s = seconds_since(t0);
    report.iterations.push_back(rec);

    const bool bad = !finite_vec(xs[t + 1]) || !std::isfinite(vg) || vg > 1e9 ||
                     (x_true != nullptr &&
                      (!std::isfinite(rec.mse_posterior) || rec.mse_posterior > 1e9));
    if (bad) {
      diverged = true;
      break;
    }
  }

  if (!report.iterations.empty()) report.final_mse = report.iterations.back().mse_posterior;
  report.status = final_status(report.iterations, diverged);
  return report;
}

RunReport run_oamp_vamp(const LinearOperator& op, const SpectralTable& table,
                        const BernoulliGaussianPrior& prior, const cvec& y, double sigma2,
                        std::size_t t_max, OampMode mode, const cvec* x_true) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("run_oamp_vamp: sigma2 must be > 0");
  if (op.kind() != EnsembleKind::svd_dft && mode == OampMode::simulate) {
    throw std::invalid_argument("run_oamp_vamp: needs the analytic spectrum");
  }
  const std::size_t n = op.n();
  const std::size_t m = op.m();
  const double N = static_cast<double>(n);
  const Quality quad{Quality::Method::quadrature, 0, 0};
  const auto& e = table.eigenvalues;

  RunReport report;
  cvec xt(mode == OampMode::simulate ? n : 0, {0.0, 0.0});
  double v_phi = 1.0;
  bool diverged = false;

  for (std::size_t t = 1; t <= t_max; ++t) {
    const auto t0 = clock_type::now();
    IterationRecord rec;
    rec.t = t;
    const double rho = sigma2 / v_phi;
    double eps_g = 0.0;
    for (double ei : e) eps_g += ei / (rho + ei);
    eps_g /= N;
    const double v_gamma = v_phi * (1.0 / eps_g - 1.0);
    rec.v_gamma_tt = v_gamma;
    rec.v_phibar_tt = v_phi;
    const double mm = mmse_eval(prior, v_gamma, quad);
    rec.mse_se_predicted = mm;
    const double eps_phi = 1.0 - mm / v_gamma;

    if (mode == OampMode::simulate) {
      // gamma_hat = A^H (rho I + A A^H)^{-1} (y - A x_t), diagonal resolvent
      cvec resid = op.forward(xt);
      for (std::size_t i = 0; i < m; ++i) resid[i] = (y[i] - resid[i]) / (rho + e[i]);
      cvec r = op.adjoint(resid);
      const double inv_eps = 1.0 / eps_g;
      for (std::size_t i = 0; i < n; ++i) r[i] = r[i] * inv_eps + xt[i];

      cvec post = denoise(prior, r, v_gamma);
      if (x_true != nullptr) {
        cvec err = post;
        for (std::size_t i = 0; i < n; ++i) err[i] -= (*x_true)[i];
        rec.mse_posterior = par::norm2(err) / N;
      }
      const double inv_ep = 1.0 / eps_phi;
      const double shift = (eps_phi - 1.0) * inv_ep;
      for (std::size_t i = 0; i < n; ++i) xt[i] = post[i] * inv_ep + shift * r[i];
      if (!finite_vec(xt)) diverged = true;
    }

    v_phi = v_gamma * (1.0 / eps_phi - 1.0);
    rec.wall_time_s = seconds_since(t0);
    report.iterations.push_back(rec);
    if (diverged || !std::isfinite(v_phi)) {
      diverged = true;
      break;
    }
  }
  if (!report.iterations.empty()) {
    report.final_mse = (mode == OampMode::simulate)
                           ? report.iterations.back().mse_posterior
                           : report.iterations.back().mse_se_predicted;
  }
  report.status = final_status(report.iterations, diverged);
  return report;
}

RunReport run_amp(const LinearOperator& op, const BernoulliGaussianPrior& prior,
                  const cvec& y, double sigma2, std::size_t t_max, double damping_factor,
                  const cvec* x_true) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("run_amp: sigma2 must be > 0");
  const std::size_t n = op.n();
  const std::size_t m = op.m();
  const double N = static_cast<double>(n);
  const double delta = static_cast<double>(m) / N;
  const double beta = damping_factor;

  RunReport report;
  cvec xt(n, {0.0, 0.0});
  cvec z(m, {0.0, 0.0});
  double dz_avg = 0.0;
  bool diverged = false;

  for (std::size_t t = 1; t <= t_max; ++t) {
    const auto t0 = clock_type::now();
    IterationRecord rec;
    rec.t = t;
    // z_t = y - A x_t + (1/delta) <phi'> z_{t-1}
    cvec ax = op.forward(xt);
    const double ons = dz_avg / delta;
    for (std::size_t i = 0; i < m; ++i) z[i] = y[i] - ax[i] + ons * z[i];
    const double tau = par::norm2(z) / static_cast<double>(m);
    rec.v_gamma_tt = tau;
    if (!std::isfinite(tau) || tau > 1e9) {
      diverged = true;
      rec.wall_time_s = seconds_since(t0);
      report.iterations.push_back(rec);
      break;
    }
    cvec r = op.adjoint(z);
    for (std::size_t i = 0; i < n; ++i) r[i] += xt[i];
    cvec post = denoise(prior, r, tau);
    if (x_true != nullptr) {
      cvec err = post;
      for (std::size_t i = 0; i < n; ++i) err[i] -= (*x_true)[i];
      rec.mse_posterior = par::norm2(err) / N;
    }
    dz_avg = denoise_derivative_avg(prior, r, tau);
    for (std::size_t i = 0; i < n; ++i) xt[i] = (1.0 - beta) * xt[i] + beta * post[i];
    rec.wall_time_s = seconds_since(t0);
    report.iterations.push_back(rec);
    if (!finite_vec(xt)) {
      diverged = true;
      break;
    }
  }
  if (!report.iterations.empty()) report.final_mse = report.iterations.back().mse_posterior;
  report.status = final_status(report.iterations, diverged);
  return report;
}

}  // namespace mamp
