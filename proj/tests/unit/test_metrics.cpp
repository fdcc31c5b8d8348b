#include <doctest.h>

#include <cmath>
#include <vector>

#include "../common/fixtures.hpp"
#include "strateval/errors.hpp"
#include "strateval/metrics.hpp"

using namespace strateval;

namespace {
std::vector<double> scores_for(const EvalContext& ctx, std::initializer_list<std::pair<const char*, double>> values) {
  std::vector<double> s(ctx.items().size(), 0.0);
  for (const auto& [item, v] : values) s[*ctx.item_index(item)] = v;
  return s;
}

std::vector<std::string> ids(const EvalContext& ctx, const RankedList& r) {
  std::vector<std::string> out;
  for (auto i : r.order) out.push_back(ctx.items()[i]);
  return out;
}
}  // namespace

TEST_CASE("candidates ordered by descending score") {
  const auto train = fixtures::dataset("u2,a,5\n");
  const auto test = fixtures::dataset("u1,a,5\nu1,b,5\nu1,c,5\n");
  const EvalContext ctx(train, test);
  const auto u = *ctx.user_index("u1");
  const auto r = rank_by_scores(u, scores_for(ctx, {{"a", 0.9}, {"b", 0.1}, {"c", 0.5}}), ctx);
  CHECK(ids(ctx, r) == std::vector<std::string>{"a", "c", "b"});
  CHECK(r.rank_of[*ctx.item_index("c")] == 2);
}

TEST_CASE("training items of the user are excluded") {
  const auto train = fixtures::dataset("u1,b,5\n");
  const auto test = fixtures::dataset("u1,a,5\nu1,c,5\n");
  const EvalContext ctx(train, test);
  const auto r = rank_by_scores(*ctx.user_index("u1"), scores_for(ctx, {{"a", 0.9}, {"b", 0.8}, {"c", 0.5}}), ctx);
  CHECK(ids(ctx, r) == std::vector<std::string>{"a", "c"});
  CHECK(r.rank_of[*ctx.item_index("b")] == 0);
}

TEST_CASE("score ties fall back to training popularity then item id") {
  const auto train = fixtures::dataset("u2,c,5\nu3,c,5\nu2,b,5\n");
  const auto test = fixtures::dataset("u1,a,5\nu1,b,5\nu1,c,5\nu1,d,1\n");
  const EvalContext ctx(train, test);
  const std::vector<double> flat(ctx.items().size(), 0.0);
  const auto r = rank_by_scores(*ctx.user_index("u1"), flat, ctx);
  CHECK(ids(ctx, r) == std::vector<std::string>{"c", "b", "a", "d"});
}

TEST_CASE("nDCG at a cutoff") {
  const auto train = fixtures::dataset("u2,z,5\n");
  const auto test = fixtures::dataset("u1,a,5\nu1,b,1\nu1,c,1\nu1,d,1\nu1,e,1\nu1,f,1\nu1,g,1\n");
  const EvalContext ctx(train, test);
  const auto u = *ctx.user_index("u1");
  const auto rel = ctx.relevant_test_items(u);
  REQUIRE(rel.size() == 1);
  const MetricSpec at5 = MetricSpec::parse("ndcg@5");

  auto rank_a_at = [&](double a_score) {
    return rank_by_scores(u,
                          scores_for(ctx, {{"a", a_score}, {"b", 0.7}, {"c", 0.65}, {"d", 0.6}, {"e", 0.55},
                                           {"f", 0.5}, {"g", 0.45}, {"z", 0.0}}),
                          ctx);
  };
  CHECK(*ndcg(rank_a_at(1.0), rel, at5) == 1.0);
  CHECK(*ndcg(rank_a_at(0.68), rel, at5) == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-15));
  CHECK(*ndcg(rank_a_at(0.1), rel, at5) == 0.0);
  CHECK_FALSE(ndcg(rank_a_at(0.1), {}, at5).has_value());
}

TEST_CASE("ideal gain and discount") {
  CHECK(discount(1) == 1.0);
  CHECK(discount(3) == 0.5);
  CHECK(ideal_gain(3, 2) == doctest::Approx(1.0 + 1.0 / std::log2(3.0)));
  CHECK(ideal_gain(2, std::nullopt) == doctest::Approx(1.0 + 1.0 / std::log2(3.0)));
}

TEST_CASE("metric labels round trip") {
  for (const char* label : {"ndcg", "ndcg@10", "credit@5", "credit"}) CHECK(MetricSpec::parse(label).label() == label);
  CHECK_THROWS_AS(MetricSpec::parse("ndcg@0"), ConfigError);
  CHECK_THROWS_AS(MetricSpec::parse("map@5"), ConfigError);
}
