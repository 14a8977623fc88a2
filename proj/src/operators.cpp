#include "mamp/operators.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "mamp/rng.hpp"

namespace mamp {

namespace {
// FFTW planning is not thread-safe; execution via fftw_execute_dft is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

LinearOperator::LinearOperator(std::size_t m, std::size_t n, double kappa,
                               std::uint64_t seed, EnsembleKind kind)
    : m_(m), n_(n), kind_(kind) {
  if (m == 0 || n == 0) throw std::invalid_argument("build_operator: zero dimension");
  if (kappa < 1.0) throw std::invalid_argument("build_operator: kappa must be >= 1");

  Rng rng(seed);
  const std::size_t J = std::min(m, n);

  if (kind == EnsembleKind::svd_dft) {
    // geometric singular values d_i / d_{i+1} = kappa^{1/J}, normalized so
    // that sum d_i^2 = n (hence lambda_1 = 1)
    d_.resize(J);
    const double ratio = std::pow(kappa, -1.0 / static_cast<double>(J));
    double sum2 = 0.0;
    for (std::size_t i = 0; i < J; ++i) {
      d_[i] = std::pow(ratio, static_cast<double>(i));
      sum2 += d_[i] * d_[i];
    }
    const double scale = std::sqrt(static_cast<double>(n) / sum2);
    for (auto& di : d_) di *= scale;

    // uniform random permutation (Fisher-Yates)
    perm_.resize(n);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.raw() % (i + 1));
      std::swap(perm_[i], perm_[j]);
    }

    std::lock_guard<std::mutex> lock(planner_mutex());
    cvec dummy(n);
    auto* buf = reinterpret_cast<fftw_complex*>(dummy.data());
    plan_fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_bwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan_fwd_ == nullptr || plan_bwd_ == nullptr) {
      throw std::runtime_error("fftw plan creation failed");
    }
  } else {
    // dense IID CN(0, 1/m) entries; singular values not analytic, leave d_
    // empty except for oracle use via dense()
    dense_.resize(m * n);
    const double s = std::sqrt(0.5 / static_cast<double>(m));
    for (auto& a : dense_) a = rng.cgauss() * std::complex<double>(s * std::sqrt(2.0), 0.0);
  }
}

LinearOperator::~LinearOperator() {
  if (plan_fwd_ != nullptr || plan_bwd_ != nullptr) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plan_fwd_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
  }
}

void LinearOperator::fft_forward(cvec& buf) const {
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_), p, p);
}

void LinearOperator::fft_backward(cvec& buf) const {
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_), p, p);
}

cvec LinearOperator::forward(const cvec& x) const {
  if (x.size() != n_) throw std::invalid_argument("forward: length mismatch");
  if (kind_ == EnsembleKind::iid_gaussian_dense) {
    cvec y(m_, {0.0, 0.0});
    for (std::size_t i = 0; i < m_; ++i) {
      std::complex<double> s{0.0, 0.0};
      const auto* row = &dense_[i * n_];
      for (std::size_t j = 0; j < n_; ++j) s += row[j] * x[j];
      y[i] = s;
    }
    return y;
  }
  cvec buf = x;
  fft_forward(buf);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_));
  const std::size_t J = d_.size();
  cvec y(m_, {0.0, 0.0});
  for (std::size_t i = 0; i < J; ++i) {
    y[i] = d_[i] * inv_sqrt_n * buf[perm_[i]];
  }
  return y;
}

cvec LinearOperator::adjoint(const cvec& y) const {
  if (y.size() != m_) throw std::invalid_argument("adjoint: length mismatch");
  if (kind_ == EnsembleKind::iid_gaussian_dense) {
    cvec x(n_, {0.0, 0.0});
    for (std::size_t i = 0; i < m_; ++i) {
      const auto* row = &dense_[i * n_];
      const std::complex<double> yi = y[i];
      for (std::size_t j = 0; j < n_; ++j) x[j] += std::conj(row[j]) * yi;
    }
    return x;
  }
  cvec buf(n_, {0.0, 0.0});
  const std::size_t J = d_.size();
  for (std::size_t i = 0; i < J; ++i) {
    buf[perm_[i]] = d_[i] * y[i];
  }
  fft_backward(buf);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n_));
  for (auto& z : buf) z *= inv_sqrt_n;
  return buf;
}

cvec LinearOperator::apply_B(double lambda_dagger, const cvec& v) const {
  if (v.size() != m_) throw std::invalid_argument("apply_B: length mismatch");
  if (kind_ == EnsembleKind::svd_dft) {
    // A A^H is diagonal with entries d_i^2 (zero for i >= J)
    cvec out(m_);
    const std::size_t J = d_.size();
    for (std::size_t i = 0; i < m_; ++i) {
      const double e = (i < J) ? d_[i] * d_[i] : 0.0;
      out[i] = (lambda_dagger - e) * v[i];
    }
    return out;
  }
  cvec aa = forward(adjoint(v));
  for (std::size_t i = 0; i < m_; ++i) aa[i] = lambda_dagger * v[i] - aa[i];
  return aa;
}

std::vector<std::complex<double>> LinearOperator::dense() const {
  if (kind_ == EnsembleKind::iid_gaussian_dense) return dense_;
  std::vector<std::complex<double>> out(m_ * n_);
  cvec e(n_, {0.0, 0.0});
  for (std::size_t j = 0; j < n_; ++j) {
    e[j] = {1.0, 0.0};
    cvec col = forward(e);
    for (std::size_t i = 0; i < m_; ++i) out[i * n_ + j] = col[i];
    e[j] = {0.0, 0.0};
  }
  return out;
}

std::shared_ptr<const LinearOperator> build_operator(std::size_t m, std::size_t n,
                                                     double kappa, std::uint64_t seed,
                                                     EnsembleKind kind) {
  return std::make_shared<const LinearOperator>(m, n, kappa, seed, kind);
}

SpectralTable compute_spectral_table(const LinearOperator& op, std::size_t t_max) {
  if (t_max < 1) throw std::invalid_argument("compute_spectral_table: t_max must be >= 1");
  if (t_max > kMaxIterations) {
    throw std::invalid_argument("compute_spectral_table: t_max exceeds iteration cap");
  }
  const auto& d = op.singular_values();
  if (d.empty()) {
    throw std::invalid_argument("compute_spectral_table: operator has no analytic spectrum");
  }
  const std::size_t m = op.m();
  const double N = static_cast<double>(op.n());
  const std::size_t J = d.size();

  SpectralTable tab;
  tab.t_max = t_max;
  // eigenvalues of A A^H: d_i^2 for i < J, zero-padded to m when m > J
  std::vector<double> e(m, 0.0);
  for (std::size_t i = 0; i < J; ++i) e[i] = d[i] * d[i];
  tab.eigenvalues = e;
  tab.lambda_max = *std::max_element(e.begin(), e.end());
  tab.lambda_min = *std::min_element(e.begin(), e.end());
  tab.lambda_dagger = 0.5 * (tab.lambda_max + tab.lambda_min);

  const std::size_t order_lambda = 2 * t_max + 2;
  const std::size_t order_b = 2 * t_max + 3;
  tab.lambda.assign(order_lambda + 1, 0.0);
  tab.b.assign(order_b + 1, 0.0);

  // powers accumulated iteratively; overflow guard per spec
  std::vector<double> epow(m, 1.0), bpow(m, 1.0);
  for (std::size_t t = 0; t <= order_b; ++t) {
    double lsum = 0.0, bsum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (t <= order_lambda) lsum += epow[i];
      bsum += bpow[i];
    }
    if (t <= order_lambda) tab.lambda[t] = lsum / N;
    tab.b[t] = bsum / N;
    if (std::abs(tab.b[t]) > 1e280) {
      throw std::runtime_error("compute_spectral_table: b_t overflow guard tripped");
    }
    for (std::size_t i = 0; i < m; ++i) {
      epow[i] *= e[i];
      bpow[i] *= (tab.lambda_dagger - e[i]);
    }
  }

  tab.w.assign(order_b, 0.0);
  for (std::size_t t = 0; t < order_b; ++t) {
    tab.w[t] = tab.lambda_dagger * tab.b[t] - tab.b[t + 1];
  }
  return tab;
}

}  // namespace mamp
