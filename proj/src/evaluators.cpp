#include "strateval/evaluators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "strateval/errors.hpp"
#include "strateval/stats.hpp"

namespace strateval {

std::string_view to_string(EvalMethod method) noexcept {
  switch (method) {
    case EvalMethod::holdout: return "holdout";
    case EvalMethod::ips: return "ips";
    case EvalMethod::stratified: return "stratified";
  }
  return "?";
}

EvalMethod parse_eval_method(std::string_view text) {
  if (text == "holdout") return EvalMethod::holdout;
  if (text == "ips") return EvalMethod::ips;
  if (text == "stratified") return EvalMethod::stratified;
  throw ConfigError("unknown evaluation method '" + std::string(text) + "' (expected holdout, ips or stratified)");
}

std::size_t EvalReport::defined_users() const {
  return static_cast<std::size_t>(std::count_if(per_user.begin(), per_user.end(), [](const auto& v) { return v.has_value(); }));
}

RankingSet rank_test_users(const TrainedModel& model, const EvalContext& ctx) {
  const ModelRanker ranker(model, ctx);
  RankingSet out;
  out.lists.reserve(ctx.test_users().size());
  for (auto u : ctx.test_users()) out.lists.push_back(ranker.rank(u));
  return out;
}

double mean_defined(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  if (n == 0) throw DataError("no user has relevant test items; the estimate is undefined");
  return sum / static_cast<double>(n);
}

namespace {

void check_alignment(const RankingSet& rankings, const EvalContext& ctx) {
  if (rankings.lists.size() != ctx.test_users().size()) {
    throw DataError("rankings do not cover every test user of the context");
  }
}

// Shared by every estimator so that degenerate settings (unit propensities,
// one stratum) reproduce holdout bit for bit.
std::optional<double> user_value(const RankedList& ranked, std::span<const std::uint32_t> items,
                                 std::span<const double> propensities, const MetricSpec& spec) {
  if (items.empty()) return std::nullopt;
  const double credit = credit_sum(ranked, items, spec.cutoff, propensities);
  const double normaliser = spec.aggregation == Aggregation::mean_credit ? static_cast<double>(items.size())
                                                                         : ideal_gain(items.size(), spec.cutoff);
  return credit / normaliser;
}

}  // namespace

EvalReport holdout_eval(const RankingSet& rankings, const EvalContext& ctx, const MetricSpec& spec) {
  check_alignment(rankings, ctx);
  EvalReport report;
  report.method = EvalMethod::holdout;
  report.spec = spec;
  const auto users = ctx.test_users();
  report.users.assign(users.begin(), users.end());
  report.per_user.reserve(users.size());
  for (std::size_t j = 0; j < users.size(); ++j) {
    report.per_user.push_back(user_value(rankings.lists[j], ctx.relevant_test_items(users[j]), {}, spec));
  }
  report.overall = mean_defined(report.per_user);
  return report;
}

EvalReport ips_eval(const RankingSet& rankings, const EvalContext& ctx, const PropensityTable& propensities,
                    const MetricSpec& spec, const IpsOptions& options) {
  check_alignment(rankings, ctx);
  if (options.clip < 0.0 || !std::isfinite(options.clip)) throw ConfigError("IPS clip must be finite and >= 0");

  // Propensity per universe item, resolved lazily for items that appear in test.
  const auto items = ctx.items();
  std::vector<double> prop(items.size(), std::numeric_limits<double>::quiet_NaN());
  auto resolve = [&](std::uint32_t item) {
    if (std::isnan(prop[item])) {
      double p = propensities.score_of(items[item]);
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw DataError("propensity for item '" + items[item] + "' must be positive and finite");
      }
      prop[item] = std::max(p, options.clip);
    }
    return prop[item];
  };

  EvalReport report;
  report.method = EvalMethod::ips;
  report.spec = spec;
  const auto users = ctx.test_users();
  report.users.assign(users.begin(), users.end());
  report.per_user.reserve(users.size());
  std::vector<double> weights;
  for (std::size_t j = 0; j < users.size(); ++j) {
    const auto relevant = ctx.relevant_test_items(users[j]);
    weights.clear();
    for (auto i : relevant) weights.push_back(resolve(i));
    auto value = user_value(rankings.lists[j], relevant, weights, spec);
    if (value && options.self_normalized) {
      double inverse_mean = 0.0;
      for (double w : weights) inverse_mean += 1.0 / w;
      inverse_mean /= static_cast<double>(weights.size());
      *value /= inverse_mean;
    }
    report.per_user.push_back(value);
  }
  report.overall = mean_defined(report.per_user);
  return report;
}

StratumBreakdown per_stratum_eval(const RankingSet& rankings, const EvalContext& ctx,
                                  const StrataAssignment& assignment, const MetricSpec& spec) {
  check_alignment(rankings, ctx);
  const auto items = ctx.items();
  const std::size_t K = assignment.K;

  // Stratum of every universe item that occurs in test; items seen only in
  // training are never credited, so they need no assignment.
  std::vector<std::int64_t> stratum(items.size(), -1);
  auto stratum_of = [&](std::uint32_t item) {
    if (stratum[item] < 0) {
      const auto s = assignment.stratum_of_item(items[item]);
      if (!s) throw DataError("test item '" + items[item] + "' has no stratum assignment");
      stratum[item] = *s;
    }
    return static_cast<std::size_t>(stratum[item]);
  };

  StratumBreakdown out;
  out.strata.assign(K, {});
  out.per_user.assign(K, std::vector<std::optional<double>>(ctx.test_users().size()));
  std::vector<std::vector<std::uint32_t>> restricted(K);
  const auto users = ctx.test_users();
  for (std::size_t j = 0; j < users.size(); ++j) {
    for (const auto& fb : ctx.test_feedback_of(users[j])) ++out.strata[stratum_of(fb.item)].interactions;
    for (auto& r : restricted) r.clear();
    for (auto i : ctx.relevant_test_items(users[j])) restricted[stratum_of(i)].push_back(i);
    for (std::size_t s = 0; s < K; ++s) {
      out.per_user[s][j] = user_value(rankings.lists[j], restricted[s], {}, spec);
    }
  }
  for (std::size_t s = 0; s < K; ++s) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : out.per_user[s]) {
      if (!v) continue;
      sum += *v;
      ++n;
    }
    out.strata[s].users = n;
    out.strata[s].low_support = n == 1;
    if (n > 0) out.strata[s].value = sum / static_cast<double>(n);
  }
  return out;
}

double stratified_value(std::span<const std::optional<double>> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw DataError("stratum values and weights differ in length");
  double total = 0.0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    if (weights[s] == 0.0) continue;
    if (!values[s]) {
      throw DataError("stratum Q" + std::to_string(s + 1) + " has weight " + std::to_string(weights[s]) +
                      " but no users with relevant feedback");
    }
    total += *values[s] * weights[s];
  }
  return total;
}

EvalReport stratified_eval(std::span<const StratumResult> per_stratum, const StratumWeights& weights) {
  if (per_stratum.size() != weights.weights.size()) throw DataError("stratum count differs from weight count");
  double weight_sum = 0.0;
  for (double w : weights.weights) weight_sum += w;
  if (std::abs(weight_sum - 1.0) > 1e-12) throw DataError("stratum weights must sum to 1");

  EvalReport report;
  report.method = EvalMethod::stratified;
  report.strata_K = per_stratum.size();
  report.per_stratum.assign(per_stratum.begin(), per_stratum.end());
  std::vector<std::optional<double>> values;
  for (std::size_t s = 0; s < per_stratum.size(); ++s) {
    report.per_stratum[s].weight = weights.weights[s];
    values.push_back(per_stratum[s].value);
  }
  report.overall = stratified_value(values, weights.weights);
  return report;
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired t-test needs equally long samples");
  const std::size_t n = a.size();
  if (n < 2) throw DataError("paired t-test needs at least 2 pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTestResult out;
  out.n = n;
  out.mean_difference = mean;
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    if (mean == 0.0) return out;
    out.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    out.p = std::numeric_limits<double>::min();
    return out;
  }
  out.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  out.p = student_t_two_sided_p(out.t, static_cast<double>(n - 1));
  return out;
}

std::optional<TTestResult> paired_ttest(std::span<const std::optional<double>> a,
                                        std::span<const std::optional<double>> b) {
  if (a.size() != b.size()) throw DataError("paired t-test needs aligned samples");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && b[i]) {
      xs.push_back(*a[i]);
      ys.push_back(*b[i]);
    }
  }
  if (xs.size() < 2) return std::nullopt;
  return paired_ttest(std::span<const double>(xs), std::span<const double>(ys));
}

}  // namespace strateval
