#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "strateval/errors.hpp"
#include "strateval/reports.hpp"
#include "strateval/workbench.hpp"

using namespace strateval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("strateval_wb_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const TempDir& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.path.string() + "' && STRATEVAL_HOME='" + (dir.path / "home").string() + "' '" +
                          STRATEVAL_CLI + "' " + args + " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

struct Fixture {
  FeedbackLog log;
  std::vector<TrainedModel> models;
  PropensityTable propensities;

  Fixture() {
    SimConfig c;
    c.n_users = 250;
    c.n_items = 80;
    c.true_rank = 3;
    c.seed = 21;
    log = generate(c);
    const std::vector<std::size_t> sizes{5};
    models = sweep(kAllAlgorithms, sizes, log.closed_train, 21);
    const auto closed = log.closed_log();
    propensities = estimate_propensities(closed, fit_gamma(closed.item_counts()));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("SHA-256 test vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("manifest round trip and digest check") {
  TempDir dir;
  write_file(dir.path / "a.txt", "hello");
  RunManifest m;
  m.command = "evaluate";
  m.config = {{"k", 2}, {"name", "x"}};
  m.seeds = {1, 2};
  m.add_input(dir.path / "a.txt");
  m.write(dir.path / "m.json");
  const auto j = json::parse(slurp(dir.path / "m.json"));
  const auto back = RunManifest::from_json(j);
  CHECK(back.command == "evaluate");
  CHECK(back.seeds == m.seeds);
  REQUIRE(back.inputs.size() == 1);
  CHECK(back.inputs[0].sha256 == sha256_hex("hello"));
  auto tampered = j;
  tampered["config"]["k"] = 3;
  CHECK_THROWS_AS(RunManifest::from_json(tampered), DataError);
  CHECK(manifest_path_for("x/out.tsv") == fs::path("x/out.tsv.manifest.json"));
}

TEST_CASE("configuration files are strict and echo defaults") {
  const auto defaults = to_json(SimConfig{});
  CHECK(sim_config_from_json(defaults).n_users == 2000);
  CHECK(sim_config_from_json(json::object()).n_items == 500);
  CHECK_THROWS_AS(sim_config_from_json({{"n_user", 10}}), ConfigError);
  CHECK_THROWS_AS(sim_config_from_json({{"n_users", "many"}}), ConfigError);
  CHECK_THROWS_AS(sim_config_from_json({{"n_items", 5}, {"exposure_budget", 10}}), ConfigError);
  StudyConfig s;
  const auto back = study_config_from_json(to_json(s));
  CHECK(back.latent_sizes == s.latent_sizes);
  CHECK(back.metrics == s.metrics);
  CHECK(back.algorithms == s.algorithms);
  CHECK_THROWS_AS(study_config_from_json({{"gamma", {{"xmin", 3}}}}), ConfigError);
}

TEST_CASE("evaluation records audit and round trip") {
  const auto& f = fixture();
  const EvalContext ctx(f.log.closed_train, f.log.closed_test);
  EvalPlan plan;
  plan.methods = {EvalMethod::holdout, EvalMethod::ips, EvalMethod::stratified};
  plan.strata = {1, 2, 3};
  plan.metrics = {MetricSpec::parse("ndcg@10"), MetricSpec::parse("ndcg")};
  plan.baseline = "POP";
  const auto records = evaluate_models(f.models, ctx, plan, &f.propensities);
  CHECK(records.size() == f.models.size() * 2 * 5);

  for (const auto& metric : {"ndcg@10", "ndcg"}) {
    const auto holdout = select_values(records, {EvalMethod::holdout, metric, std::nullopt});
    const auto k1 = select_values(records, {EvalMethod::stratified, metric, std::size_t{1}});
    CHECK(holdout == k1);
  }
  for (const auto& r : records) {
    if (r.method != EvalMethod::stratified) continue;
    double total = 0.0, weights = 0.0;
    for (const auto& s : r.strata) {
      weights += s.weight;
      if (s.weight > 0) total += *s.value * s.weight;
    }
    CHECK(total == doctest::Approx(r.value).epsilon(1e-12));
    CHECK(weights == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::stringstream io;
  write_records_jsonl(io, records);
  const auto back = read_records_jsonl(io);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(to_json(back[i]) == to_json(records[i]));

  auto broken = records;
  for (auto& r : broken) {
    if (r.method == EvalMethod::stratified) {
      r.value += 0.01;
      break;
    }
  }
  CHECK_THROWS_AS(audit_records(broken), DataError);
  std::ostringstream table;
  CHECK_THROWS_AS(write_eval_table(table, broken), DataError);
}

TEST_CASE("propensity-based methods require a table") {
  const auto& f = fixture();
  const EvalContext ctx(f.log.closed_train, f.log.closed_test);
  EvalPlan plan;
  plan.methods = {EvalMethod::ips};
  try {
    evaluate_models(f.models, ctx, plan, nullptr);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("propensity") != std::string::npos);
  }
  plan.methods = {EvalMethod::holdout};
  plan.baseline = "NOPE";
  CHECK_THROWS_AS(evaluate_models(f.models, ctx, plan, nullptr), ConfigError);
}

TEST_CASE("comparison of series keyed by model") {
  const std::vector<std::pair<std::string, double>> x{{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}, {"e", 5}};
  const std::vector<std::pair<std::string, double>> y{{"e", 4}, {"d", 5}, {"c", 3}, {"b", 2}, {"a", 1}};
  const std::vector<std::pair<std::string, double>> z{{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}, {"e", 5}, {"f", 0}};
  const auto c = compare_series(x, y, z);
  CHECK(c.models.size() == 5);
  CHECK(c.correlation.tau_xz == 1.0);
  CHECK(c.correlation.tau_xy == doctest::Approx(0.8));
  const std::vector<std::pair<std::string, double>> short_y{{"a", 1}, {"b", 2}};
  CHECK_THROWS_AS(compare_series(x, short_y, z), DataError);
}

TEST_CASE("Simpson audit flags reversals in the dominant stratum") {
  std::vector<std::string> labels{"A", "B"};
  std::vector<EvalReport> holdout(2);
  holdout[0].overall = 0.6;
  holdout[1].overall = 0.5;
  holdout[0].per_user = {0.6, 0.6, 0.6};
  holdout[1].per_user = {0.5, 0.5, 0.5};
  std::vector<StratumBreakdown> b(2);
  b[0].strata.resize(2);
  b[1].strata.resize(2);
  b[0].per_user.assign(2, std::vector<std::optional<double>>(3));
  b[1].per_user.assign(2, std::vector<std::optional<double>>(3));
  b[0].strata[0].value = 0.2;
  b[1].strata[0].value = 0.3;
  b[0].strata[1].value = 0.9;
  b[1].strata[1].value = 0.8;
  StratumWeights w{{0.95, 0.05}, {95, 5}};
  const auto found = simpson_audit(labels, holdout, b, w, 0.9);
  REQUIRE(found.size() == 1);
  CHECK(found[0].holdout_winner == "A");
  CHECK(found[0].stratum == 0);
  w.weights = {0.5, 0.5};
  CHECK(simpson_audit(labels, holdout, b, w, 0.9).empty());
  std::ostringstream out;
  write_simpson(out, found);
  CHECK(out.str().find("A\tB") != std::string::npos);
}

TEST_CASE("report emitters") {
  std::ostringstream scatter;
  write_scatter(scatter, std::vector<std::string>{"a", "b", "c"}, std::vector<double>{0, 1, 2},
                std::vector<double>{1, 3, 5});
  CHECK(scatter.str().find("# fit\tslope\t2.000000\tintercept\t1.000000") != std::string::npos);
  CorrelationReport r;
  r.tau_xy = 0.5;
  r.tau_xz = 0.6;
  r.tau_yz = 0.7;
  r.n = 10;
  r.steiger = SteigerResult{-1.0, 0.3};
  std::ostringstream cmp;
  write_comparison(cmp, r, "ndcg@10", "holdout", "stratified-K2");
  CHECK(cmp.str().find("0.200000\n") != std::string::npos);
  std::vector<std::optional<CorrelationReport>> by_K{r, std::nullopt};
  std::ostringstream sweep;
  write_strata_sweep(sweep, by_K);
  CHECK(sweep.str().find("2\tNA") != std::string::npos);
}

TEST_CASE("command line: simulate is deterministic and validates first") {
  TempDir dir;
  write_file(dir.path / "sim.json", R"({"n_users": 120, "n_items": 60, "seed": 3})");
  REQUIRE(run_cli(dir, "simulate --config sim.json --out a") == 0);
  REQUIRE(run_cli(dir, "simulate --config sim.json --out b") == 0);
  for (const char* f : {"closed_train.csv", "closed_test.csv", "open_test.csv", "exposure.csv"}) {
    CHECK(slurp(dir.path / "home/a" / f) == slurp(dir.path / "home/b" / f));
    CHECK(!slurp(dir.path / "home/a" / f).empty());
  }
  CHECK(fs::exists(dir.path / "home/a/manifest.json"));
  write_file(dir.path / "bad.json", R"({"n_items": 5, "exposure_budget": 10})");
  CHECK(run_cli(dir, "simulate --config bad.json --out c") == 1);
  CHECK_FALSE(fs::exists(dir.path / "home/c"));
}

TEST_CASE("command line: ingest errors carry line numbers") {
  TempDir dir;
  write_file(dir.path / "ok.csv", "u1,a,5\nu2,a,3\n");
  write_file(dir.path / "open.csv", "u1,b,5\n");
  CHECK(run_cli(dir, "ingest --closed ok.csv --open open.csv --name d") == 0);
  CHECK(slurp(dir.path / "out.txt").find("users 2 items 1 interactions 2") != std::string::npos);
  CHECK(fs::exists(dir.path / "home/datasets/d.closed.csv"));
  CHECK(fs::exists(dir.path / "home/datasets/d.open.csv"));
  CHECK(fs::exists(dir.path / "home/datasets/d.open.csv.manifest.json"));
  write_file(dir.path / "bad.csv", "u1,a,5\nu1,a,7\n");
  CHECK(run_cli(dir, "ingest --closed bad.csv --name e") == 2);
  CHECK(slurp(dir.path / "err.txt").find("line 2") != std::string::npos);
  CHECK(run_cli(dir, "ingest --name e") == 1);
  CHECK(run_cli(dir, "frobnicate") == 1);
}

TEST_CASE("command line: evaluate and compare pipeline") {
  TempDir dir;
  write_file(dir.path / "sim.json", R"({"n_users": 200, "n_items": 60, "true_rank": 3, "seed": 4})");
  REQUIRE(run_cli(dir, "simulate --config sim.json --out s") == 0);
  REQUIRE(run_cli(dir, "propensity --data s/closed_train.csv s/closed_test.csv --out p.csv") == 0);
  REQUIRE(run_cli(dir, "train --train s/closed_train.csv --sizes 4 --out-dir m") == 0);
  CHECK(run_cli(dir, "evaluate --train s/closed_train.csv --test s/closed_test.csv --models m --methods ips") == 1);
  CHECK(slurp(dir.path / "err.txt").find("propensity") != std::string::npos);
  REQUIRE(run_cli(dir, "evaluate --train s/closed_train.csv --test s/closed_test.csv --models m --methods "
                       "holdout,stratified -K 1,2 --propensity p.csv --baseline POP --out c.jsonl --table c.tsv") == 0);
  REQUIRE(run_cli(dir, "evaluate --train s/closed_train.csv --test s/open_test.csv --models m --methods holdout "
                       "--out o.jsonl") == 0);
  REQUIRE(run_cli(dir, "compare --open o.jsonl --closed c.jsonl --strata-sweep 2 --out-dir cmp") == 0);
  for (const char* f : {"comparison.tsv", "comparison.json", "scatter.tsv", "strata_sweep.tsv"}) {
    CHECK(fs::exists(dir.path / "home/cmp" / f));
    CHECK(fs::exists(dir.path / "home/cmp" / (std::string(f) + ".manifest.json")));
  }
  const auto records = read_records_file(dir.path / "home/c.jsonl");
  CHECK(select_values(records, {EvalMethod::holdout, "ndcg@10", std::nullopt}) ==
        select_values(records, {EvalMethod::stratified, "ndcg@10", std::size_t{1}}));
  REQUIRE(run_cli(dir, "report --records c.jsonl --out c2.tsv") == 0);
  CHECK(slurp(dir.path / "home/c.tsv") == slurp(dir.path / "home/c2.tsv"));
}
