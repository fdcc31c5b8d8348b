#include "strateval/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <vector>

#include "strateval/errors.hpp"

namespace strateval {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_two_sided_p(double z) { return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0))); }

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw NumericalError("t distribution needs positive degrees of freedom");
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double chi_square_upper_p(double x, double df) {
  if (!(df > 0.0)) throw NumericalError("chi-square distribution needs positive degrees of freedom");
  if (x <= 0.0) return 1.0;
  const boost::math::chi_squared dist(df);
  return boost::math::cdf(boost::math::complement(dist, x));
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation inputs differ in length");
  if (x.size() < 2) throw DataError("correlation needs at least 2 values");
}

// Number of tied pairs inside runs of equal values of a sorted sequence.
template <typename Eq>
std::uint64_t tied_pairs(std::size_t n, Eq equal) {
  std::uint64_t ties = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      ties += run * (run - 1) / 2;
      run = 1;
    }
  }
  return ties;
}

// Sorts v and returns the number of inversions.
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]]; });
  const std::uint64_t n3 = tied_pairs(
      n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]]; });
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const std::uint64_t swaps = merge_count(ys, buf, 0, n);
  const std::uint64_t n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  if (n1 == n0 || n2 == n0) return std::nullopt;
  // C - D = n0 - n1 - n2 + n3 - 2 * swaps
  const double numerator = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                           static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double denominator = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(numerator / denominator, -1.0, 1.0);
}

PairCounts count_pairs(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  PairCounts c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) ++c.tied_both;
      else if (dx == 0) ++c.tied_x;
      else if (dy == 0) ++c.tied_y;
      else if ((dx > 0) == (dy > 0)) ++c.concordant;
      else ++c.discordant;
    }
  }
  return c;
}

double fisher_z(double r) {
  if (!(std::abs(r) < 1.0)) throw NumericalError("Fisher transform undefined for |r| >= 1 (r = " + std::to_string(r) + ")");
  return std::atanh(r);
}

SteigerResult steiger_test(double tau_xy, double tau_xz, double tau_yz, std::size_t n) {
  if (n < 4) throw DataError("Steiger's test needs at least 4 ranked systems");
  if (!(std::abs(tau_yz) < 1.0)) throw NumericalError("Steiger's test undefined for |tau_yz| >= 1");
  const double z1 = fisher_z(tau_xy);
  const double z2 = fisher_z(tau_xz);
  const double r = 0.5 * (tau_xy + tau_xz);
  const double r2 = r * r;
  const double psi = tau_yz * (1.0 - 2.0 * r2) - 0.5 * r2 * (1.0 - 2.0 * r2 - tau_yz * tau_yz);
  const double c = psi / ((1.0 - r2) * (1.0 - r2));
  if (!(c < 1.0)) throw NumericalError("Steiger's test has degenerate covariance (c >= 1)");
  SteigerResult out;
  out.z = (z1 - z2) * std::sqrt((static_cast<double>(n) - 3.0) / (2.0 - 2.0 * c));
  out.p = normal_two_sided_p(out.z);
  return out;
}

CorrelationReport correlate(std::span<const double> x, std::span<const double> y, std::span<const double> z) {
  CorrelationReport report;
  report.n = x.size();
  const auto xy = kendall_tau_b(x, y), xz = kendall_tau_b(x, z), yz = kendall_tau_b(y, z);
  if (!xy || !xz || !yz) {
    report.note = "tau undefined: an input is all tied";
    return report;
  }
  report.tau_xy = *xy;
  report.tau_xz = *xz;
  report.tau_yz = *yz;
  if (*xy == *xz) {
    report.steiger = SteigerResult{};
    return report;
  }
  try {
    report.steiger = steiger_test(*xy, *xz, *yz, report.n);
  } catch (const Error& e) {
    report.note = e.what();
  }
  return report;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of an empty sequence");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) throw DataError("standard deviation needs at least 2 values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericalError("linear fit needs non-constant x");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {
std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

double gini(std::span<const double> values) {
  if (values.empty()) return 0.0;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double total = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) throw DataError("Gini coefficient needs non-negative values");
    total += v[i];
    weighted += static_cast<double>(i + 1) * v[i];
  }
  if (total == 0.0) return 0.0;
  const double n = static_cast<double>(v.size());
  return (2.0 * weighted) / (n * total) - (n + 1.0) / n;
}

}  // namespace strateval
