#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "strateval/errors.hpp"
#include "strateval/random.hpp"
#include "strateval/stats.hpp"

using namespace strateval;

TEST_CASE("Kendall tau-b reference cases") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> rev(x.rbegin(), x.rend());
  CHECK(*kendall_tau_b(x, x) == 1.0);
  CHECK(*kendall_tau_b(x, rev) == -1.0);
  CHECK(*kendall_tau_b(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
        doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK_FALSE(kendall_tau_b(x, std::vector<double>(5, 2.0)).has_value());
}

TEST_CASE("Kendall tau-b with ties matches the tie-corrected formula") {
  const std::vector<double> x{1, 1, 2, 3, 3, 3};
  const std::vector<double> y{2, 1, 1, 3, 2, 3};
  // Pairs: n0 = 15, ties in x: 1 + 3 = 4, ties in y: 3 (values 1,2,3 each twice).
  const auto c = count_pairs(x, y);
  const double n0 = 15, n1 = 4, n2 = 3;
  const double expected = (double(c.concordant) - double(c.discordant)) / std::sqrt((n0 - n1) * (n0 - n2));
  CHECK(*kendall_tau_b(x, y) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("Fisher transform") {
  CHECK(fisher_z(0.0) == 0.0);
  CHECK(fisher_z(0.5) == doctest::Approx(0.5493).epsilon(1e-4));
  CHECK(fisher_z(0.5) == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-15));
  CHECK(fisher_z(-0.3) == -fisher_z(0.3));
  CHECK_THROWS_AS(fisher_z(1.0), NumericalError);
}

TEST_CASE("Steiger test properties") {
  const auto same = steiger_test(0.6, 0.6, 0.3, 20);
  CHECK(same.z == 0.0);
  CHECK(same.p == 1.0);
  CHECK(std::abs(steiger_test(0.7, 0.5, 0.6, 200).z) > std::abs(steiger_test(0.7, 0.5, 0.6, 50).z));
  CHECK(steiger_test(0.7, 0.5, 0.6, 50).z > 0.0);
  CHECK_THROWS_AS(steiger_test(0.7, 0.5, 0.6, 3), DataError);
  CHECK_THROWS_AS(steiger_test(1.0, 0.5, 0.6, 30), NumericalError);
}

TEST_CASE("correlate reports equal taus as no difference") {
  const std::vector<double> x{1, 2, 3, 4, 5, 6}, y{1, 2, 3, 4, 6, 5};
  const auto r = correlate(x, y, y);
  REQUIRE(r.steiger.has_value());
  CHECK(r.steiger->z == 0.0);
  CHECK(r.steiger->p == 1.0);
  CHECK(r.n == 6);
}

TEST_CASE("normal and Student t tails") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(student_t_two_sided_p(2.228138851986, 10) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_upper_p(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("linear fit") {
  const std::vector<double> x{0, 1, 2, 3};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  const auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(linear_fit(x, std::vector<double>(4, 3.0)).slope == 0.0);
  CHECK_THROWS_AS(linear_fit(std::vector<double>(4, 1.0), y), NumericalError);
}

TEST_CASE("linear fit residuals are orthogonal to x") {
  Rng rng(5);
  std::vector<double> x(100), y(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x[i] = rng.normal();
    y[i] = 0.3 * x[i] + rng.normal();
  }
  const auto f = linear_fit(x, y);
  double dot = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    dot += e * x[i];
    sum += e;
  }
  CHECK(std::abs(dot) < 1e-9);
  CHECK(std::abs(sum) < 1e-9);
}

TEST_CASE("Gini, Spearman and moments") {
  CHECK(gini(std::vector<double>{}) == 0.0);
  CHECK(gini(std::vector<double>{0, 0}) == 0.0);
  CHECK(gini(std::vector<double>{3, 3, 3}) == doctest::Approx(0.0));
  // One holder of everything among n: (n - 1) / n.
  CHECK(gini(std::vector<double>{0, 0, 0, 8}) == doctest::Approx(0.75));
  const std::vector<double> x{1, 2, 3, 4}, y{10, 20, 30, 1000};
  CHECK(spearman(x, y) == doctest::Approx(1.0));
  CHECK(pearson(x, y) < 1.0);
  CHECK(mean(x) == 2.5);
  CHECK(stddev(x) == doctest::Approx(std::sqrt(5.0 / 3.0)));
}
