#include "mamp/prior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mamp/rng.hpp"

namespace mamp {

namespace {

constexpr double kGL16[16][2] = {
    {-9.89400934991649939e-01, 2.71524594117540374e-02},
    {-9.44575023073232600e-01, 6.22535239386477063e-02},
    {-8.65631202387831755e-01, 9.51585116824925914e-02},
    {-7.55404408355002999e-01, 1.24628971255534030e-01},
    {-6.17876244402643771e-01, 1.49595988816576764e-01},
    {-4.58016777657227370e-01, 1.69156519395002619e-01},
    {-2.81603550779258915e-01, 1.82603415044923612e-01},
    {-9.50125098376374544e-02, 1.89450610455068585e-01},
    {9.50125098376374544e-02, 1.89450610455068585e-01},
    {2.81603550779258915e-01, 1.82603415044923612e-01},
    {4.58016777657227370e-01, 1.69156519395002619e-01},
    {6.17876244402643771e-01, 1.49595988816576764e-01},
    {7.55404408355002999e-01, 1.24628971255534030e-01},
    {8.65631202387831755e-01, 9.51585116824925914e-02},
    {9.44575023073232600e-01, 6.22535239386477063e-02},
    {9.89400934991649939e-01, 2.71524594117540374e-02},
};

void check_v(double v) {
  if (!(v > 0.0)) throw std::invalid_argument("noise variance must be > 0");
}

void check_mu(double mu) {
  if (!(mu > 0.0) || mu > 1.0) throw std::invalid_argument("mu must be in (0, 1]");
}

// posterior nonzero-probability as a function of u = |r|^2
double pi_post(double mu, double S, double u, double v) {
  if (mu >= 1.0) return 1.0;
  const double h = std::log((1.0 - mu) / mu) + std::log((S + v) / v) -
                   u * S / (v * (S + v));
  if (h > 700.0) return 0.0;
  if (h < -700.0) return 1.0;
  return 1.0 / (1.0 + std::exp(h));
}

// composite Gauss-Legendre over the panel edges
template <typename F>
double panel_integrate(std::vector<double> edges, F&& f) {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1];
    if (b <= a) continue;
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (const auto& nw : kGL16) acc += h * nw[1] * f(c + h * nw[0]);
  }
  return acc;
}

// panel edges for integrands exp(-u/scale) * sigmoid-transition at u = ustar
// of width `width`, truncated at umax
std::vector<double> sigmoid_edges(double scale, double ustar, double width, double umax) {
  static constexpr double kGeo[] = {0.01, 0.03, 0.07, 0.13, 0.22, 0.35, 0.55, 0.8,
                                    1.1, 1.5, 2.0, 2.7, 3.6, 4.8, 6.4, 8.5,
                                    11.0, 15.0, 20.0, 27.0, 36.0, 45.0};
  static constexpr double kRef[] = {-10, -7, -5, -3.5, -2.5, -1.7, -1, -0.5,
                                    0, 0.5, 1, 1.7, 2.5, 3.5, 5, 7, 10};
  std::vector<double> edges{0.0, umax};
  for (double f : kGeo) {
    const double e = f * scale;
    if (e < umax) edges.push_back(e);
  }
  for (double k : kRef) {
    const double e = ustar + k * width;
    if (e > 0.0 && e < umax) edges.push_back(e);
  }
  return edges;
}

// mmse(v) by adaptive-panel quadrature: mmse = 1 - c^2 * E{pi(u)^2 u} with
// u = |r|^2 distributed as a mixture of exponentials (scales S+v and v)
double mmse_quadrature(double mu, double v) {
  const double S = 1.0 / mu;
  if (mu >= 1.0) return v / (1.0 + v);
  const double c = S / (S + v);
  const double ustar = (std::log((1.0 - mu) / mu) + std::log((S + v) / v)) * v * (S + v) / S;
  const double width = v * (S + v) / S;
  double acc = 0.0;
  const double probs[2] = {mu, 1.0 - mu};
  const double scales[2] = {S + v, v};
  for (int k = 0; k < 2; ++k) {
    const double scale = scales[k];
    const double umax = 50.0 * scale;
    acc += probs[k] * panel_integrate(sigmoid_edges(scale, ustar, width, umax),
                                      [&](double u) {
                                        const double p = pi_post(mu, S, u, v);
                                        return p * p * u * std::exp(-u / scale) / scale;
                                      });
  }
  return 1.0 - c * c * acc;
}

double mmse_monte_carlo(double mu, double v, std::size_t samples, std::uint64_t seed) {
  const double S = 1.0 / mu;
  Rng rng(seed);
  const double sx = std::sqrt(S);
  const double sv = std::sqrt(v);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const bool on = rng.uniform() < mu;
    const std::complex<double> x = on ? sx * rng.cgauss() : std::complex<double>{0.0, 0.0};
    const std::complex<double> r = x + sv * rng.cgauss();
    const double p = pi_post(mu, S, std::norm(r), v);
    const std::complex<double> e = p * (S / (S + v)) * r - x;
    acc += std::norm(e);
  }
  return acc / static_cast<double>(samples);
}

// ----- two-observation posterior machinery for the cross-MSE -----
// Given (r_a, r_b) = x + (eta_a, eta_b), the sufficient statistic is
// z = a r_a + b r_b with a = (v_bb - v_ab)/det, b = (v_aa - v_ab)/det,
// q = a + b; posterior slab mean is S z / (1 + S q).

double pi2(double mu, double S, double u, double q) {
  if (mu >= 1.0) return 1.0;
  const double h = std::log((1.0 - mu) / mu) + std::log1p(S * q) - u * S / (1.0 + S * q);
  if (h > 700.0) return 0.0;
  if (h < -700.0) return 1.0;
  return 1.0 / (1.0 + std::exp(h));
}

// E|x - xhat_2|^2 of the two-observation posterior mean, 1-D quadrature over
// u = |z|^2 ~ mixture Exp(q) w.p. (1-mu), Exp(q + q^2 S) w.p. mu
double mmse2_quadrature(double mu, double S, double q) {
  const double vs = S / (1.0 + S * q);
  const double ustar = (std::log((1.0 - mu) / mu) + std::log1p(S * q)) * (1.0 + S * q) / S;
  const double width = (1.0 + S * q) / S;
  double acc = 0.0;
  const double probs[2] = {1.0 - mu, mu};
  const double scales[2] = {q, q + q * q * S};
  for (int k = 0; k < 2; ++k) {
    const double scale = scales[k];
    if (scale <= 0.0) continue;
    const double umax = 50.0 * scale;
    acc += probs[k] * panel_integrate(sigmoid_edges(scale, ustar, width, umax),
                                      [&](double u) {
                                        const double p = pi2(mu, S, u, q);
                                        const double xs2 = vs * vs * u;
                                        return (vs * p + p * (1.0 - p) * xs2) *
                                               std::exp(-u / scale) / scale;
                                      });
  }
  return acc;
}

}  // namespace

cvec sample_signal(const BernoulliGaussianPrior& prior, std::size_t n, std::uint64_t seed) {
  check_mu(prior.mu);
  if (n == 0) throw std::invalid_argument("sample_signal: n must be >= 1");
  Rng rng(seed);
  const double sx = std::sqrt(prior.slab_variance());
  cvec x(n, {0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i) {
    // draw the gate and the slab unconditionally to keep the stream layout
    // independent of the gate outcomes
    const bool on = rng.uniform() < prior.mu;
    const std::complex<double> g = rng.cgauss();
    if (on) x[i] = sx * g;
  }
  return x;
}

std::complex<double> denoise_scalar(const BernoulliGaussianPrior& prior,
                                    std::complex<double> r, double v) {
  check_v(v);
  check_mu(prior.mu);
  const double S = prior.slab_variance();
  const double p = pi_post(prior.mu, S, std::norm(r), v);
  return p * (S / (S + v)) * r;
}

cvec denoise(const BernoulliGaussianPrior& prior, const cvec& r, double v) {
  check_v(v);
  check_mu(prior.mu);
  const double S = prior.slab_variance();
  const double c = S / (S + v);
  cvec out(r.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(r.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = pi_post(prior.mu, S, std::norm(r[i]), v) * c * r[i];
  }
  return out;
}

double denoise_derivative_avg(const BernoulliGaussianPrior& prior, const cvec& r, double v) {
  check_v(v);
  const double S = prior.slab_variance();
  const double c = S / (S + v);
  double acc = 0.0;
  for (const auto& ri : r) {
    const double u = std::norm(ri);
    const double p = pi_post(prior.mu, S, u, v);
    acc += c * (p + u * p * (1.0 - p) * S / (v * (S + v)));
  }
  return acc / static_cast<double>(r.size());
}

double mmse_eval(const BernoulliGaussianPrior& prior, double v, const Quality& q) {
  check_v(v);
  check_mu(prior.mu);
  if (prior.mu >= 1.0) return v / (1.0 + v);  // Gaussian prior closed form
  if (q.method == Quality::Method::quadrature) return mmse_quadrature(prior.mu, v);
  return mmse_monte_carlo(prior.mu, v, q.samples, q.seed);
}

std::pair<cvec, DenoiserStats> orthogonal_nle(const BernoulliGaussianPrior& prior,
                                              const cvec& r, double v, const Quality& q) {
  check_v(v);
  DenoiserStats st;
  st.v_in = v;
  st.mmse = mmse_eval(prior, v, q);
  if (st.mmse >= v) {
    throw std::runtime_error("orthogonal_nle: mmse >= v (denoiser/variance inconsistency)");
  }
  st.eps_phi = 1.0 - st.mmse / v;
  st.v_out = 1.0 / (1.0 / st.mmse - 1.0 / v);
  cvec post = denoise(prior, r, v);
  const double inv_eps = 1.0 / st.eps_phi;
  const double shift = (st.eps_phi - 1.0) * inv_eps;
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(r.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    post[i] = post[i] * inv_eps + shift * r[i];
  }
  return {std::move(post), st};
}

double nle_cross_mse(const BernoulliGaussianPrior& prior, double v_aa, double v_bb,
                     double v_ab, NleMode mode_a, NleMode mode_b, const Quality& q) {
  check_mu(prior.mu);
  // reject grossly inconsistent inputs; small excesses from accumulated
  // quadrature error at the SE plateau are clamped below instead
  if (v_aa * v_bb < v_ab * v_ab * (1.0 - 1e-4)) {
    throw std::invalid_argument("nle_cross_mse: channel covariance not PSD");
  }
  // degenerate-at-plateau clamp: keep the 2x2 covariance strictly PD
  const double cap = std::sqrt(std::max(v_aa * v_bb, 0.0)) * (1.0 - 1e-8);
  v_ab = std::clamp(v_ab, -cap, cap);

  if (mode_a == NleMode::pseudo_zero && mode_b == NleMode::pseudo_zero) {
    return 1.0;  // E|x|^2
  }
  if (mode_a == NleMode::pseudo_zero || mode_b == NleMode::pseudo_zero) {
    // E{(phihat - x)^H (-x)} = mmse by MMSE orthogonality, independent of v_ab
    const double v = (mode_a == NleMode::pseudo_zero) ? v_bb : v_aa;
    check_v(v);
    return mmse_eval(prior, v, q);
  }
  check_v(v_aa);
  check_v(v_bb);

  const double mu = prior.mu;
  const double S = prior.slab_variance();
  if (mu >= 1.0) {
    // both denoisers linear r/(1+v): closed form E{(r_a/(1+v_a)-x)^H (r_b/(1+v_b)-x)}
    const double ca = 1.0 / (1.0 + v_aa), cb = 1.0 / (1.0 + v_bb);
    return (1.0 - ca) * (1.0 - cb) + ca * cb * v_ab;
  }

  // Rao-Blackwellized fixed-seed MC:
  //   C = E{(phi_a - xhat2)^H (phi_b - xhat2)} + E|x - xhat2|^2
  // where xhat2 is the posterior mean given both observations (cross terms
  // vanish). The MC part has vanishing variance as the channels decorrelate
  // from x, avoiding the cancellation of the naive estimator.
  const double det = std::max(v_aa * v_bb - v_ab * v_ab, 1e-300);
  const double a = (v_bb - v_ab) / det;
  const double b = (v_aa - v_ab) / det;
  const double qsum = std::max(a + b, 1e-300);
  const double vs = S / (1.0 + S * qsum);

  const std::size_t ns = q.samples;
  Rng rng(q.seed);
  const double sx = std::sqrt(S);
  const double sa = std::sqrt(v_aa);
  const double corr = std::clamp(v_ab / std::sqrt(v_aa * v_bb), -1.0, 1.0);
  const double sb1 = std::sqrt(v_bb) * corr;
  const double sb2 = std::sqrt(v_bb) * std::sqrt(std::max(0.0, 1.0 - corr * corr));
  const double ca = S / (S + v_aa), cb = S / (S + v_bb);

  double acc = 0.0;
  for (std::size_t i = 0; i < ns; ++i) {
    const bool on = rng.uniform() < mu;
    const std::complex<double> g = rng.cgauss();
    const std::complex<double> x = on ? sx * g : std::complex<double>{0.0, 0.0};
    const std::complex<double> e1 = rng.cgauss();
    const std::complex<double> e2 = rng.cgauss();
    const std::complex<double> ra = x + sa * e1;
    const std::complex<double> rb = x + sb1 * e1 + sb2 * e2;
    const std::complex<double> pa = pi_post(mu, S, std::norm(ra), v_aa) * ca * ra;
    const std::complex<double> pb = pi_post(mu, S, std::norm(rb), v_bb) * cb * rb;
    const std::complex<double> z = a * ra + b * rb;
    const std::complex<double> x2 = pi2(mu, S, std::norm(z), qsum) * vs * z;
    acc += std::real(std::conj(pa - x2) * (pb - x2));
  }
  return acc / static_cast<double>(ns) + mmse2_quadrature(mu, S, qsum);
}

}  // namespace mamp
