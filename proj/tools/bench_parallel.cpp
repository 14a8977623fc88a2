// Benchmark of the deterministic OpenMP kernels against the serial reference,
// plus an end-to-end operator timing. Also verifies bitwise agreement between
// the serial and parallel reductions on the benchmark data.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>

#include "mamp/operators.hpp"
#include "mamp/parallel.hpp"
#include "mamp/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double time_of(int reps, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = clock_type::now();
  for (int r = 0; r < reps; ++r) fn();
  return std::chrono::duration<double>(clock_type::now() - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 1 << 22;
  int reps = 20;
  if (argc > 1) n = std::strtoull(argv[1], nullptr, 10);
  if (argc > 2) reps = std::atoi(argv[2]);

  mamp::Rng rng(7);
  mamp::cvec a(n), b(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.cgauss();
    b[i] = rng.cgauss();
    y[i] = rng.cgauss();
  }

  std::printf("vector length n = %zu, reps = %d\n\n", n, reps);
  std::printf("%-12s %12s %12s %8s  %s\n", "kernel", "serial (ms)", "parallel(ms)", "speedup",
              "bitwise");

  volatile double sink = 0.0;
  const double ts_dot = time_of(reps, [&] { sink = mamp::par::dot_real_serial(a, b); });
  const double tp_dot = time_of(reps, [&] { sink = mamp::par::dot_real(a, b); });
  const bool ok_dot = mamp::par::dot_real_serial(a, b) == mamp::par::dot_real(a, b);
  std::printf("%-12s %12.3f %12.3f %8.2f  %s\n", "dot_real", ts_dot * 1e3, tp_dot * 1e3,
              ts_dot / tp_dot, ok_dot ? "yes" : "NO");

  const double ts_n2 = time_of(reps, [&] { sink = mamp::par::norm2_serial(a); });
  const double tp_n2 = time_of(reps, [&] { sink = mamp::par::norm2(a); });
  const bool ok_n2 = mamp::par::norm2_serial(a) == mamp::par::norm2(a);
  std::printf("%-12s %12.3f %12.3f %8.2f  %s\n", "norm2", ts_n2 * 1e3, tp_n2 * 1e3,
              ts_n2 / tp_n2, ok_n2 ? "yes" : "NO");

  mamp::cvec y1 = y, y2 = y;
  const std::complex<double> alpha{0.37, -0.21};
  const double ts_ax = time_of(reps, [&] { mamp::par::axpy_serial(alpha, a, y1); });
  const double tp_ax = time_of(reps, [&] { mamp::par::axpy(alpha, a, y2); });
  const bool ok_ax = std::memcmp(y1.data(), y2.data(), n * sizeof(y1[0])) == 0;
  std::printf("%-12s %12.3f %12.3f %8.2f  %s\n", "axpy", ts_ax * 1e3, tp_ax * 1e3,
              ts_ax / tp_ax, ok_ax ? "yes" : "NO");

  mamp::cvec o1(n), o2(n);
  const double ts_sa = time_of(reps, [&] { mamp::par::scale_add_serial(o1, a, 0.4, b, 0.6); });
  const double tp_sa = time_of(reps, [&] { mamp::par::scale_add(o2, a, 0.4, b, 0.6); });
  const bool ok_sa = std::memcmp(o1.data(), o2.data(), n * sizeof(o1[0])) == 0;
  std::printf("%-12s %12.3f %12.3f %8.2f  %s\n", "scale_add", ts_sa * 1e3, tp_sa * 1e3,
              ts_sa / tp_sa, ok_sa ? "yes" : "NO");

  const std::size_t nop = std::min<std::size_t>(n, 1 << 16);
  auto op = mamp::build_operator(nop / 2, nop, 10.0, 1, mamp::EnsembleKind::svd_dft);
  mamp::cvec x(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(nop));
  const double t_fwd = time_of(reps, [&] { auto v = op->forward(x); sink = v[0].real(); });
  std::printf("\noperator forward (m=%zu, n=%zu): %.3f ms\n", nop / 2, nop, t_fwd * 1e3);

  return (ok_dot && ok_n2 && ok_ax && ok_sa) ? 0 : 1;
}
