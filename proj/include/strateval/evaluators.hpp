#pragma once

// Effectiveness estimators over a closed- or open-loop test set:
//
//   holdout     mean of per-user nDCG over users with relevant test items
//   ips         per-item credits reweighted by inverse item propensity
//   stratified  per-stratum means marginalised over the stratum weights,
//               E(Y) = sum_x E(Y | X = x) P(X = x)

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strateval/metrics.hpp"
#include "strateval/models.hpp"
#include "strateval/propensity.hpp"
#include "strateval/strata.hpp"

namespace strateval {

enum class EvalMethod { holdout, ips, stratified };

std::string_view to_string(EvalMethod method) noexcept;
EvalMethod parse_eval_method(std::string_view text);

// Rankings of every test user of a context, aligned with ctx.test_users().
struct RankingSet {
  std::vector<RankedList> lists;
};

RankingSet rank_test_users(const TrainedModel& model, const EvalContext& ctx);

struct StratumResult {
  std::optional<double> value;     // undefined when no user has relevant items here
  double weight = 0.0;             // P(X = x); 0 until weights are attached
  std::size_t users = 0;           // users contributing to the value
  std::uint64_t interactions = 0;  // test interactions whose item lies here
  bool low_support = false;        // exactly one contributing user
};

struct EvalReport {
  EvalMethod method = EvalMethod::holdout;
  std::string model;
  MetricSpec spec;
  double overall = 0.0;
  // Universe user ids and their values (nullopt = skipped).
  std::vector<std::uint32_t> users;
  std::vector<std::optional<double>> per_user;
  std::vector<StratumResult> per_stratum;
  std::optional<std::size_t> strata_K;

  std::size_t defined_users() const;
};

// Mean of the defined values, summed in the given order. Throws DataError
// when none is defined.
double mean_defined(std::span<const std::optional<double>> values);

EvalReport holdout_eval(const RankingSet& rankings, const EvalContext& ctx, const MetricSpec& spec);

struct IpsOptions {
  // Propensities below this floor are raised to it; 0 disables clipping.
  double clip = 0.0;
  // Divide each user's value by the mean inverse propensity of their items.
  bool self_normalized = false;
};

// Per user: sum_i (credit_i / p_i) / normaliser, where the normaliser is the
// user's ideal gain (nDCG) or relevant-item count (mean credit). Unit
// propensities therefore reproduce holdout_eval exactly.
EvalReport ips_eval(const RankingSet& rankings, const EvalContext& ctx, const PropensityTable& propensities,
                    const MetricSpec& spec, const IpsOptions& options = {});

struct StratumBreakdown {
  std::vector<StratumResult> strata;
  // per_user[s][j]: value of ctx.test_users()[j] restricted to stratum s.
  std::vector<std::vector<std::optional<double>>> per_user;
};

// Each stratum's value averages, over users with relevant test items in the
// stratum, the metric credited on those items only. Rankings still span all
// candidates.
StratumBreakdown per_stratum_eval(const RankingSet& rankings, const EvalContext& ctx,
                                  const StrataAssignment& assignment, const MetricSpec& spec);

// Attaches weights and marginalises. A stratum with positive weight and no
// value is an error.
EvalReport stratified_eval(std::span<const StratumResult> per_stratum, const StratumWeights& weights);

// Marginalisation on bare numbers: sum_s values[s] * weights[s].
double stratified_value(std::span<const std::optional<double>> values, std::span<const double> weights);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  double mean_difference = 0.0;
};

// Two-sided paired t-test on a - b. Zero-variance differences give t = 0,
// p = 1 when the mean difference is zero and t = +-inf with p at the
// smallest normal double otherwise.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// Pairs the users defined in both vectors (aligned by position) and tests them.
std::optional<TTestResult> paired_ttest(std::span<const std::optional<double>> a,
                                        std::span<const std::optional<double>> b);

}  // namespace strateval
