#include <doctest.h>

#include <algorithm>
#include <vector>

#include "strateval/errors.hpp"
#include "strateval/simulator.hpp"
#include "strateval/stats.hpp"

using namespace strateval;

namespace {
double chi_square_uniform(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

std::vector<double> as_double(std::span<const std::uint64_t> v) { return {v.begin(), v.end()}; }

std::vector<double> item_frequencies(const Dataset& d, std::size_t n_items) {
  std::vector<double> f(n_items, 0.0);
  for (std::size_t i = 0; i < d.items().size(); ++i) {
    f[std::stoul(d.items()[i].substr(1))] = d.item_counts()[i];
  }
  return f;
}

SimConfig full_scale(Policy policy, std::uint64_t seed) {
  SimConfig c;
  c.deployed_policy = policy;
  c.seed = seed;
  return c;
}
}  // namespace

TEST_CASE("uniform policy exposure passes a chi-square uniformity test") {
  const auto log = generate(full_scale(Policy::uniform_random, 1));
  const double stat = chi_square_uniform(as_double(log.exposure_counts));
  CHECK(chi_square_upper_p(stat, static_cast<double>(log.exposure_counts.size() - 1)) > 0.01);
}

TEST_CASE("popularity policy is more skewed than uniform exposure") {
  const auto uniform = generate(full_scale(Policy::uniform_random, 2));
  const auto popular = generate(full_scale(Policy::popularity_biased, 2));
  CHECK(gini(as_double(popular.exposure_counts)) > gini(as_double(uniform.exposure_counts)));
  CHECK(audit_skew(popular).exposure_interaction_spearman > 0.9);
  const double head = audit_skew(uniform).head_share;
  CHECK(head > 0.01 / 3.0);
  CHECK(head < 0.03);
}

TEST_CASE("open-loop test frequencies are uniform under every policy") {
  for (auto policy : {Policy::popularity_biased, Policy::uniform_random, Policy::trained_mf}) {
    SimConfig c = full_scale(policy, 3);
    if (policy == Policy::trained_mf) {
      c.n_users = 600;
      c.n_items = 200;
    }
    const auto log = generate(c);
    const auto f = item_frequencies(log.open_test, c.n_items);
    CHECK(chi_square_upper_p(chi_square_uniform(f), static_cast<double>(c.n_items - 1)) > 0.01);
    CHECK(log.open_test.size() == c.n_users * c.exposure_budget);
  }
}

TEST_CASE("closed-loop interactions were exposed") {
  SimConfig c;
  c.n_users = 300;
  c.n_items = 120;
  c.seed = 4;
  for (auto policy : {Policy::popularity_biased, Policy::trained_mf, Policy::uniform_random}) {
    c.deployed_policy = policy;
    const auto log = generate(c);
    const auto closed = log.closed_log();
    for (std::uint32_t u = 0; u < closed.users().size(); ++u) {
      const auto user = std::stoul(closed.users()[u].substr(1));
      const auto& exposed = log.exposed[user];
      for (const auto& x : closed.interactions_of(u)) {
        const auto item = static_cast<std::uint32_t>(std::stoul(closed.items()[x.item].substr(1)));
        CHECK(std::binary_search(exposed.begin(), exposed.end(), item));
      }
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  SimConfig c;
  c.n_users = 200;
  c.n_items = 80;
  c.seed = 12;
  const auto a = generate(c), b = generate(c);
  CHECK(a.closed_train == b.closed_train);
  CHECK(a.closed_test == b.closed_test);
  CHECK(a.open_test == b.open_test);
  CHECK(a.exposure_counts == b.exposure_counts);
  c.seed = 13;
  CHECK_FALSE(generate(c).closed_train == a.closed_train);
}

TEST_CASE("ratings sit on the extremes and relevance follows the ground truth rate") {
  SimConfig c;
  c.n_users = 300;
  c.n_items = 100;
  c.interact_noise = 0.0;
  c.deployed_policy = Policy::uniform_random;
  const auto log = generate(c);
  std::size_t relevant = 0;
  for (const auto& x : log.open_test.interactions()) {
    CHECK((x.rating == 1 || x.rating == 5));
    relevant += x.relevant;
  }
  const double rate = static_cast<double>(relevant) / static_cast<double>(log.open_test.size());
  CHECK(rate == doctest::Approx(c.relevance_quantile).epsilon(0.15));
}

TEST_CASE("empty log audit is all zeros") {
  const FeedbackLog empty;
  const auto s = audit_skew(empty);
  CHECK(s.exposure_gini == 0.0);
  CHECK(s.head_share == 0.0);
  CHECK(s.exposure_interaction_spearman == 0.0);
}

TEST_CASE("invalid configurations") {
  SimConfig c;
  c.exposure_budget = c.n_items + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(generate(c), ConfigError);
  SimConfig q;
  q.relevance_quantile = 0.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  CHECK_THROWS_AS(parse_policy("greedy"), ConfigError);
}
