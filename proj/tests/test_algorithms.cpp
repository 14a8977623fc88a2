#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mamp/algorithms.hpp"
#include "mamp/parallel.hpp"
#include "mamp/rng.hpp"

using mamp::BernoulliGaussianPrior;
using mamp::cvec;
using mamp::Quality;
using mamp::VarianceMode;

namespace {

struct Trial {
  cvec x, y;
};

Trial make_trial(const mamp::LinearOperator& op, const BernoulliGaussianPrior& prior,
                 double sigma2, std::uint64_t seed) {
  Trial tr;
  tr.x = mamp::sample_signal(prior, op.n(), 1000 + seed);
  tr.y = op.forward(tr.x);
  mamp::Rng rng(2000 + seed);
  const double sd = std::sqrt(sigma2);
  for (auto& yi : tr.y) yi += sd * rng.cgauss();
  return tr;
}

}  // namespace

TEST_CASE("optimal_damping closed cases") {
  // identity: uniform split
  Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd z = mamp::optimal_damping(I2, 2);
  CHECK(z(0) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(z(1) == doctest::Approx(0.5).epsilon(1e-8));
  // diag(1, 3): inverse-variance weights (0.75, 0.25)
  Eigen::MatrixXd D(2, 2);
  D << 1.0, 0.0, 0.0, 3.0;
  z = mamp::optimal_damping(D, 2);
  CHECK(z(0) == doctest::Approx(0.75).epsilon(1e-7));
  CHECK(z(1) == doctest::Approx(0.25).epsilon(1e-7));
  // l = 1: trivially [1]
  Eigen::MatrixXd one = Eigen::MatrixXd::Constant(1, 1, 5.0);
  z = mamp::optimal_damping(one, 1);
  CHECK(z.size() == 1);
  CHECK(z(0) == 1.0);
  // duplicated entries (rank-1 all-ones scaled): ridge keeps it finite/uniform
  Eigen::MatrixXd J = 0.3 * Eigen::MatrixXd::Ones(2, 2);
  z = mamp::optimal_damping(J, 2);
  CHECK(z(0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(z.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("optimal_damping satisfies the KKT conditions on random PSD matrices") {
  mamp::Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::MatrixXd G(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) G(i, j) = rng.gauss();
    Eigen::MatrixXd V = G * G.transpose() + 0.1 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::VectorXd zeta = mamp::optimal_damping(V, 3);
    CHECK(zeta.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // stationarity: V zeta = c * 1 for some scalar c (up to the 1e-9 ridge)
    Eigen::VectorXd g = V * zeta;
    const double c = g.mean();
    CHECK((g.array() - c).abs().maxCoeff() < 1e-9 * (std::abs(c) + V.norm()) + 1e-12);
    // optimality against grid perturbations on the simplex direction
    const double obj = zeta.transpose() * V * zeta;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        Eigen::VectorXd pert = zeta;
        pert(i) += 1e-4;
        pert(j) -= 1e-4;
        CHECK(obj <= double(pert.transpose() * V * pert) + 1e-9);
      }
    }
  }
  CHECK_THROWS(mamp::optimal_damping(Eigen::MatrixXd::Identity(2, 2), 3));
}

TEST_CASE("empirical error covariance: genie inputs recover the error Gram matrix") {
  const std::size_t m = 4096, n = 8192;
  const double sigma2 = 1e-3;
  auto op = mamp::build_operator(m, n, 10.0, 5);
  auto tab = mamp::compute_spectral_table(*op, 4);
  const BernoulliGaussianPrior prior{0.1};
  Trial tr = make_trial(*op, prior, sigma2, 1);

  // window entry 1: the true x (zero error); entry 2: x plus a known error
  mamp::Rng rng(77);
  const double ve = 0.04;
  cvec u2 = tr.x;
  const double sd = std::sqrt(ve);
  for (auto& z : u2) z += sd * rng.cgauss();

  std::vector<const cvec*> window{&tr.x, &u2};
  Eigen::MatrixXd V = mamp::estimate_error_covariance(*op, tr.y, sigma2, tab, window,
                                                      VarianceMode::empirical_residual);
  const double tol = 3.0 / std::sqrt(static_cast<double>(m));
  CHECK(std::abs(V(0, 0)) < 1e-15 + tol * sigma2 * 10.0);  // genie: ~0 (clipped >= 1e-15)
  CHECK(V(1, 1) == doctest::Approx(ve).epsilon(0.05 + tol));
  CHECK(V(0, 1) == V(1, 0));
  CHECK(std::abs(V(0, 1)) < 0.05 * ve + tol * ve);
}

TEST_CASE("analytic error covariance reproduces the SE window Gram matrix") {
  auto op = mamp::build_operator(256, 512, 10.0, 3);
  auto tab = mamp::compute_spectral_table(*op, 3);
  const BernoulliGaussianPrior prior{0.1};
  auto plan = mamp::build_mamp_plan(tab, prior, 1e-3, 3, 2,
                                    {Quality::Method::monte_carlo, 100'000, 7777});
  // window {x_2, x_3, z_3}: rows 2, 3 of D and slot s_3
  std::vector<long> rows{2, 3, -3};
  std::vector<const cvec*> dummy;  // unused in analytic mode
  Eigen::MatrixXd V = mamp::estimate_error_covariance(
      *op, cvec(op->m()), 1e-3, tab, dummy, VarianceMode::analytic_se, &plan.cov, &rows);
  CHECK(V(0, 0) == doctest::Approx(plan.cov.V_phibar(2, 2)).epsilon(1e-12));
  CHECK(V(1, 1) == doctest::Approx(plan.cov.V_phibar(3, 3)).epsilon(1e-12));
  CHECK(V(2, 2) == doctest::Approx(plan.cov.M_nle(3, 3)).epsilon(1e-12));
  CHECK(V(0, 1) == doctest::Approx(plan.cov.V_phibar(2, 3)).epsilon(1e-12));
  // missing covariance state is an error
  CHECK_THROWS(mamp::estimate_error_covariance(*op, cvec(op->m()), 1e-3, tab, dummy,
                                               VarianceMode::analytic_se));
}

TEST_CASE("schedule at t = 1: theta_1 = 1/(lambda_dagger + sigma2), xi_1 = 1, eps_1 = w_0") {
  auto op = mamp::build_operator(128, 256, 10.0, 2);
  auto tab = mamp::compute_spectral_table(*op, 2);
  const double sigma2 = 0.01;
  mamp::MampSchedule sched(2);
  Eigen::MatrixXd Vphi = Eigen::MatrixXd::Zero(4, 4);
  Vphi(1, 1) = 1.0;
  mamp::mamp_step_schedule(tab, Vphi, sched, 1, sigma2);
  CHECK(sched.theta[1] == doctest::Approx(1.0 / (tab.lambda_dagger + sigma2)).epsilon(1e-14));
  CHECK(sched.xi[1] == 1.0);
  CHECK(sched.vartheta(1, 1) == 1.0);
  CHECK(sched.eps[1] == doctest::Approx(tab.w[0]).epsilon(1e-14));
  CHECK_THROWS(mamp::mamp_step_schedule(tab, Vphi, sched, 0, sigma2));
  CHECK_THROWS(mamp::mamp_step_schedule(tab, Vphi, sched, 3, sigma2));
}

TEST_CASE("run_mamp r_1 equals A^H y / w_0 and the first iterate is recorded") {
  const std::size_t m = 512, n = 1024;
  const double sigma2 = 1e-3;
  auto op = mamp::build_operator(m, n, 10.0, 4);
  auto tab = mamp::compute_spectral_table(*op, 1);
  const BernoulliGaussianPrior prior{0.1};
  Trial tr = make_trial(*op, prior, sigma2, 9);
  mamp::MampTrace trace;
  auto rep = mamp::run_mamp(*op, tab, prior, tr.y, sigma2, 1, 3,
                            VarianceMode::empirical_residual, &tr.x, nullptr, &trace);
  REQUIRE(rep.iterations.size() == 1);
  REQUIRE(trace.r.size() == 1);
  cvec want = op->adjoint(tr.y);
  for (auto& z : want) z /= tab.w[0];
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(std::abs(trace.r[0][i] - want[i]) < 1e-10);
  }
  // x_1 = 0
  for (std::size_t i = 0; i < 16; ++i) CHECK(trace.x_iter[0][i] == std::complex<double>{0.0, 0.0});
  CHECK(rep.iterations[0].xi_t == 1.0);
}

TEST_CASE("MAMP converges near the OAMP fixed point in both variance modes") {
  const std::size_t m = 2048, n = 4096;
  const double sigma2 = 1e-3;
  auto op = mamp::build_operator(m, n, 10.0, 6);
  const std::size_t T = 30;
  auto tab = mamp::compute_spectral_table(*op, T);
  const BernoulliGaussianPrior prior{0.1};
  Trial tr = make_trial(*op, prior, sigma2, 3);
  auto fp = mamp::se_fixed_point(tab, prior, sigma2, 1e-10, 1000,
                                 {Quality::Method::quadrature, 0, 0});

  auto rep_emp = mamp::run_mamp(*op, tab, prior, tr.y, sigma2, T, 3,
                                VarianceMode::empirical_residual, &tr.x);
  CHECK(rep_emp.status != mamp::RunStatus::diverged);
  const double db_emp = 10.0 * std::log10(rep_emp.final_mse);
  const double db_fp = 10.0 * std::log10(fp.mse);
  CHECK(db_emp < db_fp + 1.5);  // within 1.5 dB of the replica fixed point

  auto plan = mamp::build_mamp_plan(tab, prior, sigma2, T, 3);
  auto rep_an = mamp::run_mamp(*op, tab, prior, tr.y, sigma2, T, 3,
                               VarianceMode::analytic_se, &tr.x, &plan);
  // the analytic schedule is data-independent; its SE prediction must
  // converge to the fixed point even when the finite-N trajectory wanders
  CHECK(10.0 * std::log10(plan.mmse_pred[T]) < db_fp + 0.5);
  CHECK(rep_an.iterations.size() >= 1);
  CHECK(rep_an.iterations[0].mse_se_predicted ==
        doctest::Approx(plan.mmse_pred[1]).epsilon(1e-12));
}

TEST_CASE("run_oamp_vamp converges to its SE fixed point (simulate and se-only)") {
  const std::size_t m = 2048, n = 4096;
  const double sigma2 = 1e-3;
  auto op = mamp::build_operator(m, n, 10.0, 8);
  auto tab = mamp::compute_spectral_table(*op, 2);
  const BernoulliGaussianPrior prior{0.1};
  Trial tr = make_trial(*op, prior, sigma2, 4);
  auto fp = mamp::se_fixed_point(tab, prior, sigma2, 1e-10, 1000,
                                 {Quality::Method::quadrature, 0, 0});

  auto rep = mamp::run_oamp_vamp(*op, tab, prior, tr.y, sigma2, 30, mamp::OampMode::simulate,
                                 &tr.x);
  CHECK(rep.status == mamp::RunStatus::converged);
  CHECK(10.0 * std::log10(rep.final_mse) ==
        doctest::Approx(10.0 * std::log10(fp.mse)).epsilon(0.15));

  auto se_only = mamp::run_oamp_vamp(*op, tab, prior, cvec(m), sigma2, 30,
                                     mamp::OampMode::track_se_only);
  CHECK(se_only.final_mse == doctest::Approx(fp.mse).epsilon(1e-6));
  // se-only and simulate share the same SE trajectory
  for (std::size_t t = 0; t < 30; ++t) {
    CHECK(se_only.iterations[t].v_gamma_tt ==
          doctest::Approx(rep.iterations[t].v_gamma_tt).epsilon(1e-12));
  }
}

TEST_CASE("run_amp: scalar SE tracking on an iid Gaussian matrix") {
  const std::size_t m = 1024, n = 2048;
  const double sigma2 = 1e-3;
  auto op = mamp::build_operator(m, n, 1.0, 12, mamp::EnsembleKind::iid_gaussian_dense);
  const BernoulliGaussianPrior prior{0.1};
  Trial tr = make_trial(*op, prior, sigma2, 5);

  auto rep = mamp::run_amp(*op, prior, tr.y, sigma2, 25, 1.0, &tr.x);
  CHECK(rep.status != mamp::RunStatus::diverged);

  // tau_1 = ||y||^2 / M ~ sigma2 + ||x||^2 / M (E||Ax||^2 = ||x||^2); the
  // realized signal power is used because ||x||^2 itself fluctuates at this N
  const double delta = static_cast<double>(m) / static_cast<double>(n);
  const double px = mamp::par::norm2(tr.x) / static_cast<double>(m);
  CHECK(rep.iterations[0].v_gamma_tt == doctest::Approx(sigma2 + px).epsilon(0.15));

  // scalar state evolution oracle: tau' = sigma2 + mmse(tau)/delta
  double tau = sigma2 + 1.0 / delta;
  const Quality quad{Quality::Method::quadrature, 0, 0};
  for (std::size_t t = 1; t < rep.iterations.size(); ++t) {
    tau = sigma2 + mamp::mmse_eval(prior, tau, quad) / delta;
    CHECK(rep.iterations[t].v_gamma_tt == doctest::Approx(tau).epsilon(0.15));
  }
  // converges to a good solution on the iid ensemble
  CHECK(10.0 * std::log10(rep.final_mse) < -25.0);
}

TEST_CASE("run_amp diverges on a strongly ill-conditioned matrix") {
  const std::size_t m = 1024, n = 2048;
  const double sigma2 = 1e-3;
  auto op = mamp::build_operator(m, n, 100.0, 2);
  const BernoulliGaussianPrior prior{0.1};
  Trial tr = make_trial(*op, prior, sigma2, 6);
  auto rep = mamp::run_amp(*op, prior, tr.y, sigma2, 30, 1.0, &tr.x);
  // either explicit divergence or a final error far above the OAMP floor
  const bool bad = (rep.status == mamp::RunStatus::diverged) ||
                   (10.0 * std::log10(rep.final_mse) > -20.0);
  CHECK(bad);
}

TEST_CASE("argument validation in the runners") {
  auto op = mamp::build_operator(64, 128, 10.0, 1);
  auto tab = mamp::compute_spectral_table(*op, 2);
  const BernoulliGaussianPrior prior{0.1};
  cvec y(64);
  CHECK_THROWS(mamp::run_mamp(*op, tab, prior, y, 0.0, 2, 3, VarianceMode::empirical_residual));
  CHECK_THROWS(mamp::run_mamp(*op, tab, prior, y, 1e-3, 2, 0, VarianceMode::empirical_residual));
  CHECK_THROWS(
      mamp::run_mamp(*op, tab, prior, y, 1e-3, mamp::kMaxIterations + 1, 3,
                     VarianceMode::empirical_residual));
  CHECK_THROWS(mamp::run_oamp_vamp(*op, tab, prior, y, -1.0, 2));
  CHECK_THROWS(mamp::run_amp(*op, prior, y, 0.0, 2));
  CHECK_THROWS(mamp::build_mamp_plan(tab, prior, 1e-3, 2, 0));
}
