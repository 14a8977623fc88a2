#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "mamp/operators.hpp"

namespace mamp {

// Bernoulli-Gaussian spike-and-slab prior: x_i = 0 with prob 1-mu, else
// circular complex Gaussian with variance 1/mu, so E|x_i|^2 = 1.
struct BernoulliGaussianPrior {
  double mu = 0.1;
  double slab_variance() const { return 1.0 / mu; }
};

struct DenoiserStats {
  double v_in = 0.0;
  double mmse = 0.0;
  double eps_phi = 0.0;
  double v_out = 0.0;
};

// Precision/quality knobs for the statistical evaluators. monte_carlo is the
// default contract; quadrature is the deterministic high-precision mode used
// by the state evolution internally.
struct Quality {
  enum class Method { monte_carlo, quadrature };
  Method method = Method::monte_carlo;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 12345;
};

enum class NleMode { denoiser, pseudo_zero };

cvec sample_signal(const BernoulliGaussianPrior& prior, std::size_t n, std::uint64_t seed);

// Posterior mean under r = x + eta, eta ~ CN(0, v). Separable; log-domain
// posterior weights.
std::complex<double> denoise_scalar(const BernoulliGaussianPrior& prior,
                                    std::complex<double> r, double v);
cvec denoise(const BernoulliGaussianPrior& prior, const cvec& r, double v);

// Average derivative <phi'(r)> over the given samples (AMP Onsager term).
double denoise_derivative_avg(const BernoulliGaussianPrior& prior, const cvec& r, double v);

// mmse(v) = E|phihat(x + eta) - x|^2 over the scalar channel.
double mmse_eval(const BernoulliGaussianPrior& prior, double v, const Quality& q = {});

// Orthogonalized NLE: x_out = [phihat(r) + (eps_phi - 1) r] / eps_phi.
std::pair<cvec, DenoiserStats> orthogonal_nle(const BernoulliGaussianPrior& prior,
                                              const cvec& r, double v,
                                              const Quality& q = {});

// (1/N) E{ [phi_a(x+eta_a) - x]^H [phi_b(x+eta_b) - x] } with (eta_a, eta_b)
// jointly circular Gaussian with covariance [[v_aa, v_ab],[v_ab, v_bb]].
// pseudo_zero on a side replaces that estimator by the constant 0 (error -x).
double nle_cross_mse(const BernoulliGaussianPrior& prior, double v_aa, double v_bb,
                     double v_ab, NleMode mode_a, NleMode mode_b,
                     const Quality& q = {});

}  // namespace mamp
