#include <cstdlib>
#include <string_view>

#include "strateval/simd/kernels.hpp"

namespace strateval::simd {

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(STRATEVAL_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

namespace {

const KernelTable& table_for(Isa isa) noexcept {
#if defined(STRATEVAL_HAVE_AVX2)
  if (isa == Isa::avx2) return avx2_kernels();
#endif
  (void)isa;
  return scalar_kernels();
}

const KernelTable& select() noexcept {
  if (const char* forced = std::getenv("STRATEVAL_SIMD")) {
    const std::string_view want(forced);
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2" && isa_supported(Isa::avx2)) return table_for(Isa::avx2);
  }
  if (isa_supported(Isa::avx2)) return table_for(Isa::avx2);
  return scalar_kernels();
}

}  // namespace

const KernelTable& active() noexcept {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace strateval::simd
