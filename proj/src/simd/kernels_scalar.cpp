#include "strateval/simd/kernels.hpp"

#include <cmath>

namespace strateval::simd {
namespace {

// Four partial sums, the same association the 4-lane vector path uses, so
// scalar and vector dot products agree to the last few ulps on short rows.
double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) acc[l] = std::fma(x[i + l], y[i + l], acc[l]);
  }
  double s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void axpby_scalar(double a, const double* x, double b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], b * y[i]);
}

void gemv_scalar(const double* m, std::size_t rows, std::size_t cols, const double* v, double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot_scalar(m + r * cols, v, cols);
}

void syr_scalar(double alpha, const double* x, double* a, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) axpy_scalar(alpha * x[r], x, a + r * n, n);
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{Isa::scalar, dot_scalar, axpy_scalar, axpby_scalar, gemv_scalar, syr_scalar};
  return table;
}

}  // namespace strateval::simd
