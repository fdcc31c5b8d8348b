#pragma once

// Dense double-precision kernels used by the factor models.
//
// Every kernel has a scalar reference implementation and, where the build
// target allows it, vectorised variants. The active variant is picked once
// at first use from the CPU's capabilities and can be pinned with the
// STRATEVAL_SIMD environment variable ("scalar", "avx2").
//
// Element-wise kernels (axpy, axpby, syr) are bit-identical across variants:
// the scalar path uses std::fma wherever the vector path uses a fused
// multiply-add. Reductions (dot, gemv) differ only in summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace strateval::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // y[i] = a * x[i] + b * y[i]
  void (*axpby)(double a, const double* x, double b, double* y, std::size_t n);
  // out[r] = dot(m[r, :], v) for a row-major rows x cols matrix
  void (*gemv)(const double* m, std::size_t rows, std::size_t cols, const double* v, double* out);
  // a[r, c] += alpha * x[r] * x[c] over the full n x n row-major matrix
  void (*syr)(double alpha, const double* x, double* a, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
#if defined(STRATEVAL_HAVE_AVX2)
const KernelTable& avx2_kernels() noexcept;
#endif

// True when the running CPU can execute the given variant.
bool isa_supported(Isa isa) noexcept;

// The table selected for this process (honours STRATEVAL_SIMD).
const KernelTable& active() noexcept;

std::string_view isa_name(Isa isa) noexcept;

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}

inline void axpby(double a, std::span<const double> x, double b, std::span<double> y) {
  active().axpby(a, x.data(), b, y.data(), x.size());
}

}  // namespace strateval::simd
