#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "../common/fixtures.hpp"
#include "strateval/errors.hpp"
#include "strateval/evaluators.hpp"
#include "strateval/random.hpp"

using namespace strateval;

namespace {

// Ranks every test user of ctx by fixed per-item scores.
RankingSet rank_all(const EvalContext& ctx, const std::vector<std::pair<std::string, double>>& scores) {
  std::vector<double> s(ctx.items().size(), 0.0);
  for (const auto& [item, v] : scores) s[*ctx.item_index(item)] = v;
  RankingSet out;
  for (auto u : ctx.test_users()) out.lists.push_back(rank_by_scores(u, s, ctx));
  return out;
}

PropensityTable table_for(const EvalContext& ctx, double value) {
  PropensityTable t;
  t.items.assign(ctx.items().begin(), ctx.items().end());
  t.counts.assign(t.items.size(), 1);
  t.scores.assign(t.items.size(), value);
  return t;
}

// Student t density integrated by composite Simpson's rule on [0, |t|].
double t_two_sided_oracle(double t, double df) {
  const double c = std::tgamma((df + 1) / 2) / (std::sqrt(df * std::numbers::pi) * std::tgamma(df / 2));
  const int n = 20000;
  const double h = std::abs(t) / n;
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = k * h;
    const double f = c * std::pow(1 + x * x / df, -(df + 1) / 2);
    sum += f * (k == 0 || k == n ? 1 : (k % 2 ? 4 : 2));
  }
  return 1.0 - 2.0 * sum * h / 3.0;
}

const MetricSpec kAt5{5, Aggregation::ndcg};

}  // namespace

TEST_CASE("holdout averages users with relevant items") {
  const auto train = fixtures::dataset("u9,z,5\n");
  // u1: relevant a at rank 1 -> 1.0; u2: relevant b at rank 2 -> 1/log2(3); u3 nothing relevant.
  const auto test = fixtures::dataset("u1,a,5\nu2,b,5\nu2,a,1\nu3,c,1\n");
  const EvalContext ctx(train, test);
  const auto r = rank_all(ctx, {{"a", 0.9}, {"b", 0.5}, {"c", 0.1}});
  const auto report = holdout_eval(r, ctx, kAt5);
  CHECK(report.per_user.size() == 3);
  CHECK_FALSE(report.per_user[2].has_value());
  CHECK(report.defined_users() == 2);
  CHECK(report.overall == doctest::Approx((1.0 + 1.0 / std::log2(3.0)) / 2.0).epsilon(1e-15));
}

TEST_CASE("mean of defined values") {
  const std::vector<std::optional<double>> v{0.5, 1.0};
  CHECK(mean_defined(v) == 0.75);
  const std::vector<std::optional<double>> w{std::nullopt, 0.4};
  CHECK(mean_defined(w) == 0.4);
  const std::vector<std::optional<double>> none{std::nullopt};
  CHECK_THROWS_AS(mean_defined(none), DataError);
}

TEST_CASE("IPS identities") {
  const auto train = fixtures::dataset("u9,z,5\nu1,c,5\n");
  const auto test = fixtures::dataset("u1,a,5\nu1,b,5\nu2,b,5\nu2,a,1\nu3,a,4\n");
  const EvalContext ctx(train, test);
  const auto r = rank_all(ctx, {{"a", 0.9}, {"b", 0.5}, {"c", 0.1}});
  const auto holdout = holdout_eval(r, ctx, kAt5);
  const auto unit = ips_eval(r, ctx, table_for(ctx, 1.0), kAt5);
  CHECK(unit.overall == holdout.overall);
  CHECK(unit.per_user == holdout.per_user);
  const auto half = ips_eval(r, ctx, table_for(ctx, 0.5), kAt5);
  CHECK(half.overall == doctest::Approx(2.0 * holdout.overall).epsilon(1e-15));
  IpsOptions sn;
  sn.self_normalized = true;
  CHECK(ips_eval(r, ctx, table_for(ctx, 0.5), kAt5, sn).overall == doctest::Approx(holdout.overall).epsilon(1e-15));
  IpsOptions clip;
  clip.clip = 1.0;
  CHECK(ips_eval(r, ctx, table_for(ctx, 0.5), kAt5, clip).overall == holdout.overall);
}

TEST_CASE("IPS credit divided by propensity") {
  const auto train = fixtures::dataset("u9,z,5\n");
  const auto test = fixtures::dataset("u1,b,5\nu1,a,1\n");
  const EvalContext ctx(train, test);
  const auto r = rank_all(ctx, {{"a", 0.9}, {"b", 0.5}});
  auto t = table_for(ctx, 1.0);
  for (std::size_t i = 0; i < t.items.size(); ++i) {
    if (t.items[i] == "b") t.scores[i] = 0.5;
  }
  const auto report = ips_eval(r, ctx, t, kAt5);
  CHECK(*report.per_user[0] == doctest::Approx((1.0 / std::log2(3.0)) / 0.5).epsilon(1e-15));
}

TEST_CASE("IPS rejects missing or non-positive propensities") {
  const auto train = fixtures::dataset("u9,z,5\n");
  const auto test = fixtures::dataset("u1,b,5\n");
  const EvalContext ctx(train, test);
  const auto r = rank_all(ctx, {{"b", 0.5}});
  CHECK_THROWS_AS(ips_eval(r, ctx, table_for(ctx, 0.0), kAt5), DataError);
  PropensityTable empty;
  CHECK_THROWS_AS(ips_eval(r, ctx, empty, kAt5), DataError);
}

namespace {
StrataAssignment two_strata(const EvalContext& ctx, const std::vector<std::string>& head) {
  auto t = table_for(ctx, 0.01);
  for (std::size_t i = 0; i < t.items.size(); ++i) {
    if (std::find(head.begin(), head.end(), t.items[i]) != head.end()) t.scores[i] = 1.0;
  }
  return assign_strata(t, 2);
}
}  // namespace

TEST_CASE("per-stratum restriction") {
  const auto train = fixtures::dataset("u9,z,5\n");
  // Strata: head {a}; tail everything else.
  const auto test = fixtures::dataset("u1,a,5\nu1,b,5\nu2,b,5\nu3,a,5\n");
  const EvalContext ctx(train, test);
  const auto assignment = two_strata(ctx, {"a"});
  REQUIRE(*assignment.stratum_of_item("a") == 1);
  const auto r = rank_all(ctx, {{"a", 0.9}, {"b", 0.5}});
  const auto b = per_stratum_eval(r, ctx, assignment, kAt5);
  // u1 contributes to both strata, u2 only to the tail, u3 only to the head.
  CHECK(b.strata[0].users == 2);
  CHECK(b.strata[1].users == 2);
  CHECK(*b.per_user[0][0] == doctest::Approx(1.0 / std::log2(3.0)));
  CHECK(*b.per_user[1][0] == 1.0);
  CHECK_FALSE(b.per_user[1][1].has_value());
  CHECK_FALSE(b.per_user[0][2].has_value());
  CHECK(b.strata[0].interactions == 2);
  CHECK(b.strata[1].interactions == 2);
}

TEST_CASE("one stratum reproduces holdout exactly") {
  const auto train = fixtures::dataset("u9,z,5\nu2,c,5\n");
  const auto test = fixtures::dataset("u1,a,5\nu1,b,5\nu2,b,5\nu3,a,1\nu3,c,4\n");
  const EvalContext ctx(train, test);
  const auto r = rank_all(ctx, {{"a", 0.3}, {"b", 0.5}, {"c", 0.2}});
  const auto a1 = assign_strata(table_for(ctx, 1.0), 1);
  const auto b = per_stratum_eval(r, ctx, a1, kAt5);
  const auto report = stratified_eval(b.strata, stratum_weights(a1, test));
  CHECK(report.overall == holdout_eval(r, ctx, kAt5).overall);
}

TEST_CASE("marginalisation fixtures") {
  // Success rates as printed (93%, 73% | 87%, 69%), stone-size shares 357/700 and 343/700.
  const std::vector<double> w1{0.51, 0.49};
  CHECK(std::abs(stratified_value(std::vector<std::optional<double>>{0.93, 0.73}, w1) - 0.832) <= 0.001);
  CHECK(std::abs(stratified_value(std::vector<std::optional<double>>{0.87, 0.69}, w1) - 0.782) <= 0.001);
  CHECK(std::abs(stratified_value(std::vector<std::optional<double>>{81.0 / 87, 192.0 / 263}, w1) - 0.832) <= 0.001);
  const std::vector<double> w2{0.99, 0.01};
  CHECK(std::abs(stratified_value(std::vector<std::optional<double>>{0.339, 0.695}, w2) - 0.343) <= 0.001);
  CHECK(std::abs(stratified_value(std::vector<std::optional<double>>{0.350, 0.418}, w2) - 0.351) <= 0.001);
  CHECK(stratified_value(std::vector<std::optional<double>>{0.42}, std::vector<double>{1.0}) == 0.42);
}

TEST_CASE("weighted empty stratum is an error, unweighted one is ignored") {
  StratumWeights w{{0.5, 0.5}, {1, 1}};
  std::vector<StratumResult> strata(2);
  strata[0].value = 0.3;
  CHECK_THROWS_AS(stratified_eval(strata, w), DataError);
  w.weights = {1.0, 0.0};
  CHECK(stratified_eval(strata, w).overall == 0.3);
  w.weights = {0.7, 0.2};
  CHECK_THROWS_AS(stratified_eval(strata, w), DataError);
}

TEST_CASE("paired t-test conventions") {
  const std::vector<double> a{0.25, 0.5, 0.75};
  const auto same = paired_ttest(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);
  const std::vector<double> shifted{0.375, 0.625, 0.875};
  const auto flat = paired_ttest(shifted, a);
  CHECK(std::isinf(flat.t));
  CHECK(flat.p <= std::numeric_limits<double>::min());
  CHECK_THROWS_AS(paired_ttest(std::vector<double>{1.0}, std::vector<double>{0.0}), DataError);
}

TEST_CASE("paired t-test against a numerically integrated t distribution") {
  // Differences with mean 0.5 and sample sd 0.7434 over n = 11.
  std::vector<double> z{-1.5, -1.2, -0.9, -0.4, -0.1, 0.0, 0.2, 0.5, 0.8, 1.1, 1.5};
  double m = 0.0;
  for (double v : z) m += v / 11.0;
  double ss = 0.0;
  for (double v : z) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / 10.0);
  std::vector<double> a, b(11, 0.0);
  for (double v : z) a.push_back(0.5 + 0.7434 * (v - m) / sd);
  const auto r = paired_ttest(a, b);
  CHECK(r.n == 11);
  CHECK(r.mean_difference == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.t == doctest::Approx(2.231).epsilon(5e-4));
  CHECK(r.p == doctest::Approx(0.0498).epsilon(0.01));
  CHECK(r.p == doctest::Approx(t_two_sided_oracle(r.t, 10.0)).epsilon(1e-7));
}

TEST_CASE("optional pairing drops users undefined on either side") {
  const std::vector<std::optional<double>> a{0.5, std::nullopt, 0.7, 0.2};
  const std::vector<std::optional<double>> b{0.4, 0.3, std::nullopt, 0.1};
  const auto r = paired_ttest(a, b);
  REQUIRE(r.has_value());
  CHECK(r->n == 2);
  const std::vector<std::optional<double>> c{0.5, std::nullopt};
  const std::vector<std::optional<double>> d{std::nullopt, 0.5};
  CHECK_FALSE(paired_ttest(c, d).has_value());
}
