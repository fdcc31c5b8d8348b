#pragma once

// User-independent item propensities from a power-law fit of item popularity.
//
// The deployed system's exposure tendency for item i is estimated as
//   p_i  proportional to  n_i ^ ((gamma + 1) / 2)
// where n_i is the number of interactions with i and gamma is the exponent of
// a discrete power law fitted to the item counts by maximum likelihood.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "strateval/corpus.hpp"

namespace strateval {

enum class GammaMethod {
  // Maximises the exact discrete likelihood, normaliser zeta(gamma, x_min).
  discrete_mle,
  // gamma = 1 + n / sum ln(n_i / (x_min - 0.5)).
  continuous_approx,
};

std::string_view to_string(GammaMethod method) noexcept;
GammaMethod parse_gamma_method(std::string_view text);

struct GammaFitOptions {
  GammaMethod method = GammaMethod::discrete_mle;
  std::uint64_t x_min = 1;
  // Choose x_min by minimising the Kolmogorov-Smirnov distance between the
  // tail and its fit; x_min above is then ignored.
  bool select_x_min = false;
  // Smallest tail considered during x_min selection.
  std::size_t min_tail = 10;
};

struct GammaEstimate {
  double gamma = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t x_min = 1;
  GammaMethod method = GammaMethod::discrete_mle;
  // KS distance of the fitted tail; 0 when not computed.
  double ks_distance = 0.0;
};

// Hurwitz zeta: sum_{k>=0} (q + k)^(-s) for s > 1, q > 0.
double log_hurwitz_zeta(double s, double q);
double hurwitz_zeta(double s, double q);

// Log-likelihood of a discrete power law with exponent alpha over the values
// >= x_min.
double power_law_log_likelihood(std::span<const std::uint64_t> values, double alpha, std::uint64_t x_min);

// Fits the power-law exponent of positive integer counts. Degenerate samples
// (every value equal to x_min) have no finite discrete maximiser and fall
// back to the continuous approximation.
GammaEstimate fit_gamma(std::span<const std::uint64_t> counts, const GammaFitOptions& options = {});
GammaEstimate fit_gamma(std::span<const std::uint32_t> counts, const GammaFitOptions& options = {});

enum class Normalization { max_one };

struct PropensityTable {
  std::vector<std::string> items;  // sorted, matches the source dataset
  std::vector<std::uint32_t> counts;
  std::vector<double> scores;  // in (0, 1]
  GammaEstimate gamma;
  Normalization normalization = Normalization::max_one;

  std::size_t size() const noexcept { return items.size(); }
  // Score for an item id; throws DataError when absent.
  double score_of(std::string_view item) const;
};

// Raw propensity n_i^((gamma+1)/2) scaled so the largest is 1.
PropensityTable estimate_propensities(const Dataset& dataset, const GammaEstimate& gamma);

// Returns a copy whose scores are multiplied by factor (> 0); used to probe
// scale invariance of downstream estimators.
PropensityTable rescale(const PropensityTable& table, double factor);

// "item,count,score" rows under a '#' header carrying the fit.
void write_propensity_table(std::ostream& out, const PropensityTable& table);
PropensityTable read_propensity_table(std::istream& in);
void write_propensity_file(const std::string& path, const PropensityTable& table);
PropensityTable read_propensity_file(const std::string& path);

}  // namespace strateval
