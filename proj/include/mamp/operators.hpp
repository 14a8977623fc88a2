#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace mamp {

using cvec = std::vector<std::complex<double>>;

enum class EnsembleKind { svd_dft, iid_gaussian_dense };

// Matrix-free sensing operator A = Sigma * Pi * F (svd_dft) or an explicit
// dense IID Gaussian matrix (iid_gaussian_dense, AMP baseline only).
// F is the unitary-normalized DFT, Pi a random row permutation, Sigma the
// m x n diagonal of singular values d_1 >= ... >= d_J, J = min(m, n).
// Immutable after construction; safe to share across threads.
class LinearOperator {
 public:
  LinearOperator(std::size_t m, std::size_t n, double kappa, std::uint64_t seed,
                 EnsembleKind kind);
  ~LinearOperator();
  LinearOperator(const LinearOperator&) = delete;
  LinearOperator& operator=(const LinearOperator&) = delete;

  std::size_t m() const { return m_; }
  std::size_t n() const { return n_; }
  EnsembleKind kind() const { return kind_; }
  const std::vector<double>& singular_values() const { return d_; }
  const std::vector<std::size_t>& permutation() const { return perm_; }

  cvec forward(const cvec& x) const;   // length n -> length m
  cvec adjoint(const cvec& y) const;   // length m -> length n
  // B v = lambda_dagger * v - A A^H v; diagonal in the U-basis for svd_dft.
  cvec apply_B(double lambda_dagger, const cvec& v) const;

  // Dense representation (row-major, m x n); built on demand for oracles and
  // only valid for modest sizes.
  std::vector<std::complex<double>> dense() const;

 private:
  void fft_forward(cvec& buf) const;   // unnormalized FFTW forward, in place
  void fft_backward(cvec& buf) const;  // unnormalized FFTW backward, in place

  std::size_t m_, n_;
  EnsembleKind kind_;
  std::vector<double> d_;             // length J
  std::vector<std::size_t> perm_;     // length n (svd_dft only)
  std::vector<std::complex<double>> dense_;  // m*n row-major (dense kind only)
  void* plan_fwd_ = nullptr;          // fftw_plan
  void* plan_bwd_ = nullptr;
};

std::shared_ptr<const LinearOperator> build_operator(std::size_t m, std::size_t n,
                                                     double kappa, std::uint64_t seed,
                                                     EnsembleKind kind = EnsembleKind::svd_dft);

// Spectral moment tables consumed by the MAMP schedule and state evolution.
//   lambda[t] = (1/N) sum_i e_i^t        (e_i eigenvalues of A A^H, zero-padded)
//   b[t]      = (1/N) sum_i (lambda_dagger - e_i)^t
//   w[t]      = lambda_dagger * b[t] - b[t+1]
//   wbar(i,j) = lambda_dagger * w[i+j] - w[i+j+1] - w[i] * w[j]
struct SpectralTable {
  std::vector<double> eigenvalues;  // of A A^H, length m (zero-padded)
  std::vector<double> lambda;  // 0 .. 2*t_max+2
  std::vector<double> b;       // 0 .. 2*t_max+3
  std::vector<double> w;       // 0 .. 2*t_max+2
  double lambda_dagger = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::size_t t_max = 0;

  double wbar(std::size_t i, std::size_t j) const {
    return lambda_dagger * w[i + j] - w[i + j + 1] - w[i] * w[j];
  }
};

SpectralTable compute_spectral_table(const LinearOperator& op, std::size_t t_max);

inline constexpr std::size_t kMaxIterations = 128;

}  // namespace mamp
