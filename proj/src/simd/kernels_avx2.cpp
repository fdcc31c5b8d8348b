#include "strateval/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace strateval::simd {
namespace {

// Lane l of the accumulator sums the products at indices congruent to l mod 4,
// matching the scalar reference's partial sums exactly.
inline double reduce_lanes(__m256d acc) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  return (lanes[0] + lanes[2]) + (lanes[1] + lanes[3]);
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  }
  double s = reduce_lanes(acc);
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void axpby_avx2(double a, const double* x, double b, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d by = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), by));
  }
  for (; i < n; ++i) y[i] = std::fma(a, x[i], b * y[i]);
}

void gemv_avx2(const double* m, std::size_t rows, std::size_t cols, const double* v, double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot_avx2(m + r * cols, v, cols);
}

void syr_avx2(double alpha, const double* x, double* a, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) axpy_avx2(alpha * x[r], x, a + r * n, n);
}

}  // namespace

const KernelTable& avx2_kernels() noexcept {
  static const KernelTable table{Isa::avx2, dot_avx2, axpy_avx2, axpby_avx2, gemv_avx2, syr_avx2};
  return table;
}

}  // namespace strateval::simd
