#include <doctest.h>

#include <cmath>
#include <vector>

#include "strateval/random.hpp"
#include "strateval/simd/kernels.hpp"

using namespace strateval;
using namespace strateval::simd;

namespace {
std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

double abs_dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] * y[i]);
  return s;
}

void check_equivalent(const KernelTable& ref, const KernelTable& alt) {
  Rng rng(77);
  for (std::size_t n = 0; n <= 67; ++n) {
    const auto x = random_vector(rng, n), y0 = random_vector(rng, n);
    const double tol = 8.0 * 2.2e-16 * (abs_dot(x, y0) + 1e-300) * std::max<double>(1.0, n);
    CHECK(std::abs(ref.dot(x.data(), y0.data(), n) - alt.dot(x.data(), y0.data(), n)) <= tol);

    auto ya = y0, yb = y0;
    ref.axpy(0.37, x.data(), ya.data(), n);
    alt.axpy(0.37, x.data(), yb.data(), n);
    CHECK(ya == yb);

    ya = y0;
    yb = y0;
    ref.axpby(-1.3, x.data(), 0.8, ya.data(), n);
    alt.axpby(-1.3, x.data(), 0.8, yb.data(), n);
    CHECK(ya == yb);

    std::vector<double> a(n * n), b;
    for (auto& v : a) v = rng.normal();
    b = a;
    ref.syr(0.5, x.data(), a.data(), n);
    alt.syr(0.5, x.data(), b.data(), n);
    CHECK(a == b);

    const std::size_t rows = 1 + n % 9;
    const auto m = random_vector(rng, rows * n);
    std::vector<double> oa(rows), ob(rows);
    ref.gemv(m.data(), rows, n, x.data(), oa.data());
    alt.gemv(m.data(), rows, n, x.data(), ob.data());
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> row(m.begin() + r * n, m.begin() + (r + 1) * n);
      CHECK(std::abs(oa[r] - ob[r]) <= 8.0 * 2.2e-16 * (abs_dot(row, x) + 1e-300) * std::max<double>(1.0, n));
    }
  }
}
}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  const auto& k = scalar_kernels();
  CHECK(k.isa == Isa::scalar);
  const std::vector<double> x{1, 2, 3, 4, 5}, y{5, 4, 3, 2, 1};
  CHECK(k.dot(x.data(), y.data(), 5) == 35.0);
  std::vector<double> z = y;
  k.axpy(2.0, x.data(), z.data(), 5);
  CHECK(z == std::vector<double>{7, 8, 9, 10, 11});
  std::vector<double> a(4, 0.0);
  k.syr(1.0, x.data(), a.data(), 2);
  CHECK(a == std::vector<double>{1, 2, 2, 4});
  std::vector<double> out(2);
  const std::vector<double> m{1, 0, 0, 1, 1, 1};
  k.gemv(m.data(), 2, 3, x.data(), out.data());
  CHECK(out == std::vector<double>{1, 6});
}

TEST_CASE("vector kernels agree with the scalar reference") {
#if defined(STRATEVAL_HAVE_AVX2)
  if (!isa_supported(Isa::avx2)) {
    MESSAGE("AVX2 not supported on this CPU; equivalence not exercised");
    return;
  }
  check_equivalent(scalar_kernels(), avx2_kernels());
#else
  MESSAGE("built without AVX2 kernels");
#endif
  check_equivalent(scalar_kernels(), active());
}
