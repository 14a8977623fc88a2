#include "mamp/parallel.hpp"

#include <stdexcept>

namespace mamp::par {

// The serial references accumulate per kBlock-sized block exactly like the
// parallel versions, so both return bitwise-identical sums.
double dot_real_serial(const cvec& a, const cvec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot_real: length mismatch");
  double total = 0.0;
  for (std::size_t lo = 0; lo < a.size(); lo += kBlock) {
    const std::size_t hi = std::min(lo + kBlock, a.size());
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    }
    total += s;
  }
  return total;
}

double norm2_serial(const cvec& a) {
  double total = 0.0;
  for (std::size_t lo = 0; lo < a.size(); lo += kBlock) {
    const std::size_t hi = std::min(lo + kBlock, a.size());
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      s += a[i].real() * a[i].real() + a[i].imag() * a[i].imag();
    }
    total += s;
  }
  return total;
}

void axpy_serial(std::complex<double> alpha, const cvec& x, cvec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale_add_serial(cvec& out, const cvec& a, double ca, const cvec& b, double cb) {
  if (a.size() != b.size()) throw std::invalid_argument("scale_add: length mismatch");
  out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = ca * a[i] + cb * b[i];
}

double dot_real(const cvec& a, const cvec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot_real: length mismatch");
  const std::size_t n = a.size();
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(nblocks); ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t hi = std::min(lo + kBlock, n);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    }
    partial[blk] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;  // serial, index order
  return total;
}

double norm2(const cvec& a) {
  const std::size_t n = a.size();
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(nblocks); ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kBlock;
    const std::size_t hi = std::min(lo + kBlock, n);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      s += a[i].real() * a[i].real() + a[i].imag() * a[i].imag();
    }
    partial[blk] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

void axpy(std::complex<double> alpha, const cvec& x, cvec& y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_add(cvec& out, const cvec& a, double ca, const cvec& b, double cb) {
  if (a.size() != b.size()) throw std::invalid_argument("scale_add: length mismatch");
  out.resize(a.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = ca * a[i] + cb * b[i];
}

}  // namespace mamp::par
