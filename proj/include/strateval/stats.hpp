#pragma once

// Rank correlation, dependent-correlation tests and small descriptive
// statistics used by the comparison protocol.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace strateval {

// Standard normal CDF.
double normal_cdf(double z);
// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);
// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);
// Upper tail P(X > x) of a chi-square variable with `df` degrees of freedom.
double chi_square_upper_p(double x, double df);

// Kendall tau-b in O(n log n); nullopt when either input is all tied.
std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y);

struct PairCounts {
  std::uint64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0, tied_both = 0;
};
// O(n^2) pair classification. tied_x and tied_y exclude pairs tied in both.
PairCounts count_pairs(std::span<const double> x, std::span<const double> y);

// atanh(r); |r| >= 1 is a NumericalError.
double fisher_z(double r);

struct SteigerResult {
  double z = 0.0;
  double p = 1.0;
};

// Tests tau_xy = tau_xz for correlations sharing x, over n ranked systems.
SteigerResult steiger_test(double tau_xy, double tau_xz, double tau_yz, std::size_t n);

struct CorrelationReport {
  double tau_xy = 0.0, tau_xz = 0.0, tau_yz = 0.0;
  std::size_t n = 0;
  std::optional<SteigerResult> steiger;  // nullopt when a transform is undefined
  std::string note;                      // why steiger is missing
};

// x is the reference (open-loop) series; y and z are the two estimators.
CorrelationReport correlate(std::span<const double> x, std::span<const double> y, std::span<const double> z);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

double pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);
// Gini coefficient of non-negative values; 0 for empty or all-zero input.
double gini(std::span<const double> values);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1).
double stddev(std::span<const double> values);

}  // namespace strateval
