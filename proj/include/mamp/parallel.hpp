#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace mamp::par {

// Deterministic parallel kernels. Reductions are computed over fixed-size
// blocks whose partial sums are combined serially in index order, so results
// are byte-identical for any thread count (and identical to the serial
// reference below). Block size is fixed; do not make it depend on omp
// thread counts.
inline constexpr std::size_t kBlock = 4096;

using cvec = std::vector<std::complex<double>>;

// --- serial reference implementations (kept for testing/benchmarks) ---
double dot_real_serial(const cvec& a, const cvec& b);
double norm2_serial(const cvec& a);
void axpy_serial(std::complex<double> alpha, const cvec& x, cvec& y);
void scale_add_serial(cvec& out, const cvec& a, double ca, const cvec& b, double cb);

// --- OpenMP-parallel versions (deterministic, see note above) ---
// Re(<a, b>) with conjugation on a.
double dot_real(const cvec& a, const cvec& b);
double norm2(const cvec& a);
// y += alpha * x
void axpy(std::complex<double> alpha, const cvec& x, cvec& y);
// out = ca * a + cb * b (out may alias a or b)
void scale_add(cvec& out, const cvec& a, double ca, const cvec& b, double cb);

}  // namespace mamp::par
