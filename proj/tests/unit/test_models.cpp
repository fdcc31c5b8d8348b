#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "../common/fixtures.hpp"
#include "strateval/errors.hpp"
#include "strateval/models.hpp"
#include "strateval/random.hpp"

using namespace strateval;

namespace {
double score_of(const TrainedModel& m, const std::string& user, const std::string& item) {
  const auto s = m.score(user);
  const auto it = std::find(m.items().begin(), m.items().end(), item);
  return s[static_cast<std::size_t>(it - m.items().begin())];
}
}  // namespace

TEST_CASE("POP ranks by training count") {
  const auto train = fixtures::dataset("u1,a,5\nu2,a,5\nu3,a,5\nu1,b,5\n");
  const auto m = fit(ModelConfig::defaults(Algorithm::POP), train);
  for (const char* u : {"u1", "u2", "u3", "stranger"}) CHECK(score_of(m, u, "a") > score_of(m, u, "b"));
}

TEST_CASE("GA is constant and BO is deterministic") {
  const auto train = fixtures::dataset("u1,a,5\nu2,b,5\nu1,c,5\n");
  const auto ga = fit(ModelConfig::defaults(Algorithm::GA), train);
  const auto s = ga.score("u1");
  CHECK(std::all_of(s.begin(), s.end(), [&](double v) { return v == s[0]; }));
  const auto bo = fit(ModelConfig::defaults(Algorithm::BO, 10, 3), train);
  CHECK(bo.score("u1") == bo.score("u1"));
  CHECK(bo.score("u1") == fit(ModelConfig::defaults(Algorithm::BO, 10, 3), train).score("u1"));
}

TEST_CASE("MF fits a noiseless rank-one matrix") {
  Rng rng(11);
  // Factors in {1, 2} keep every product an exact rating.
  std::vector<double> uf(20), vf(20);
  for (auto& x : uf) x = 1.0 + static_cast<double>(rng.below(2));
  for (auto& x : vf) x = 1.0 + static_cast<double>(rng.below(2));
  std::vector<RawRecord> records;
  std::vector<std::tuple<std::string, std::string, double>> truth;
  for (int u = 0; u < 20; ++u) {
    for (int i = 0; i < 20; ++i) {
      if (rng.uniform() >= 0.5) continue;
      const int rating = static_cast<int>(uf[u] * vf[i]);
      char un[8], in[8];
      std::snprintf(un, sizeof un, "u%02d", u);
      std::snprintf(in, sizeof in, "i%02d", i);
      records.push_back({un, in, rating});
      truth.emplace_back(un, in, rating);
    }
  }
  const auto train = Dataset::from_records(records, LoopKind::closed);
  auto config = ModelConfig::defaults(Algorithm::MF, 8, 1);
  config.epochs = 200;
  const auto m = fit(config, train);
  double se = 0.0;
  for (const auto& [u, i, r] : truth) se += std::pow(score_of(m, u, i) - r, 2.0);
  CHECK(std::sqrt(se / static_cast<double>(truth.size())) <= 0.1);
}

TEST_CASE("BPR ranks a user's only item above the median") {
  std::vector<RawRecord> base;
  for (int u = 0; u < 30; ++u) {
    for (int i = 0; i < 30; ++i) {
      if ((u * 7 + i * 3) % 5 == 0) base.push_back({"v" + std::to_string(u), "i" + std::to_string(i), 5});
    }
  }
  base.push_back({"target", "i0", 5});
  const auto train = Dataset::from_records(base, LoopKind::closed);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = fit(ModelConfig::defaults(Algorithm::BPR, 10, seed), train);
    const auto s = m.score("target");
    std::vector<double> others;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (m.items()[i] != "i0") others.push_back(s[i]);
    }
    std::nth_element(others.begin(), others.begin() + others.size() / 2, others.end());
    hits += score_of(m, "target", "i0") > others[others.size() / 2];
  }
  CHECK(hits >= 95);
}

TEST_CASE("unknown users of factor models get popularity scores") {
  const auto train = fixtures::dataset("u1,a,5\nu2,a,5\nu2,b,5\nu3,c,1\n");
  for (auto alg : {Algorithm::MF, Algorithm::BPR, Algorithm::WMF}) {
    const auto m = fit(ModelConfig::defaults(alg, 4, 2), train);
    const auto s = m.score("nobody");
    CHECK(std::vector<double>(s.begin(), s.end()) == std::vector<double>(m.popularity().begin(), m.popularity().end()));
  }
}

TEST_CASE("sweep counting rule") {
  const auto train = fixtures::dataset("u1,a,5\nu2,b,5\n");
  const std::vector<Algorithm> mfpop{Algorithm::MF, Algorithm::POP};
  const std::vector<std::size_t> sizes{10, 20};
  const auto cfgs = sweep_configs(mfpop, sizes);
  REQUIRE(cfgs.size() == 3);
  std::vector<std::string> labels;
  for (const auto& c : cfgs) labels.push_back(c.label());
  CHECK(labels == std::vector<std::string>{"POP", "MF-10", "MF-20"});
  std::vector<std::size_t> all_sizes;
  for (std::size_t k = 10; k <= 100; k += 10) all_sizes.push_back(k);
  CHECK(sweep_configs(kAllAlgorithms, all_sizes).size() == 33);
  const std::vector<Algorithm> factors{Algorithm::MF, Algorithm::BPR};
  CHECK(sweep_configs(factors, std::span<const std::size_t>{}).empty());
}

TEST_CASE("sweep results do not depend on the thread count") {
  const auto train = fixtures::dataset("u1,a,5\nu1,b,4\nu2,b,5\nu2,c,1\nu3,a,5\nu3,c,4\n");
  const std::vector<std::size_t> sizes{2, 3};
  const auto one = sweep(kAllAlgorithms, sizes, train, 5, 1);
  const auto four = sweep(kAllAlgorithms, sizes, train, 5, 4);
  REQUIRE(one.size() == four.size());
  for (std::size_t m = 0; m < one.size(); ++m) CHECK(one[m] == four[m]);
}

TEST_CASE("model files round trip") {
  const auto train = fixtures::dataset("u1,a,5\nu1,b,4\nu2,b,5\nu2,c,1\n");
  const auto path = (std::filesystem::temp_directory_path() / "strateval_model_rt.json").string();
  for (auto alg : kAllAlgorithms) {
    const auto m = fit(ModelConfig::defaults(alg, 3, 4), train);
    save_model(path, m);
    CHECK(load_model(path) == m);
  }
  std::filesystem::remove(path);
}

TEST_CASE("invalid configurations are rejected") {
  auto c = ModelConfig::defaults(Algorithm::MF, 0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_algorithm("SVD"), ConfigError);
}
