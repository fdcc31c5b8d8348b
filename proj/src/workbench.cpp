#include "strateval/workbench.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "strateval/errors.hpp"

namespace strateval {

using nlohmann::json;

std::filesystem::path data_root() {
  if (const char* home = std::getenv(kHomeVariable); home != nullptr && *home != '\0') return home;
  return "strateval-data";
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw DataError("SHA-256 computation failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return sha256_hex(buffer.str());
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string RunManifest::config_digest() const { return sha256_hex(config.dump()); }

void RunManifest::add_input(const std::filesystem::path& path) { inputs.push_back({path.string(), sha256_file(path)}); }

void RunManifest::add_artifact(const std::filesystem::path& path) {
  artifacts.push_back({path.string(), sha256_file(path)});
}

namespace {
json digests_to_json(const std::vector<FileDigest>& files) {
  json out = json::array();
  for (const auto& f : files) out.push_back({{"path", f.path}, {"sha256", f.sha256}});
  return out;
}

std::vector<FileDigest> digests_from_json(const json& j) {
  std::vector<FileDigest> out;
  for (const auto& f : j) out.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>()});
  return out;
}
}  // namespace

json RunManifest::to_json() const {
  return {{"command", command},     {"config", config},     {"config_digest", config_digest()},
          {"seeds", seeds},         {"inputs", digests_to_json(inputs)},
          {"artifacts", digests_to_json(artifacts)},        {"started", started},
          {"finished", finished}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.inputs = digests_from_json(j.at("inputs"));
  m.artifacts = digests_from_json(j.at("artifacts"));
  m.started = j.value("started", "");
  m.finished = j.value("finished", "");
  if (j.contains("config_digest") && j.at("config_digest").get<std::string>() != m.config_digest()) {
    throw DataError("manifest config digest does not match its config");
  }
  return m;
}

void RunManifest::write(const std::filesystem::path& path) {
  finished = utc_timestamp();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

std::filesystem::path manifest_path_for(const std::filesystem::path& artifact) {
  return artifact.string() + ".manifest.json";
}

namespace {

// Copies recognised keys; anything else is rejected.
class StrictReader {
 public:
  StrictReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j.is_object()) throw ConfigError(context_ + ": expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(context_ + ": bad value for '" + key + "': " + e.what());
    }
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(context_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string, std::less<>> seen_;
};

}  // namespace

json to_json(const SimConfig& c) {
  return {{"n_users", c.n_users},
          {"n_items", c.n_items},
          {"true_rank", c.true_rank},
          {"exposure_budget", c.exposure_budget},
          {"sessions", c.sessions},
          {"deployed_policy", to_string(c.deployed_policy)},
          {"interact_noise", c.interact_noise},
          {"relevance_quantile", c.relevance_quantile},
          {"popularity_exponent", c.popularity_exponent},
          {"split_ratio", c.split_ratio},
          {"seed", c.seed}};
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig c;
  StrictReader r(j, "simulation config");
  r.read("n_users", c.n_users);
  r.read("n_items", c.n_items);
  r.read("true_rank", c.true_rank);
  r.read("exposure_budget", c.exposure_budget);
  r.read("sessions", c.sessions);
  std::string policy(to_string(c.deployed_policy));
  r.read("deployed_policy", policy);
  c.deployed_policy = parse_policy(policy);
  r.read("interact_noise", c.interact_noise);
  r.read("relevance_quantile", c.relevance_quantile);
  r.read("popularity_exponent", c.popularity_exponent);
  r.read("split_ratio", c.split_ratio);
  r.read("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

json to_json(const ModelConfig& c) {
  return {{"algorithm", to_string(c.algorithm)},   {"latent_size", c.latent_size},
          {"learning_rate", c.learning_rate},      {"epochs", c.epochs},
          {"regularization", c.regularization},    {"confidence_alpha", c.confidence_alpha},
          {"init_scale", c.init_scale},            {"seed", c.seed}};
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Evaluation records

namespace {

std::size_t find_baseline(std::span<const TrainedModel> models, const std::string& baseline) {
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (models[m].label() == baseline) return m;
  }
  throw ConfigError("baseline model '" + baseline + "' is not among the evaluated models");
}

StratumRecord stratum_record(std::size_t s, const StratumResult& r) {
  return {s, r.value, r.weight, r.users, r.interactions, r.low_support, std::nullopt};
}

}  // namespace

std::vector<EvalRecord> evaluate_models(std::span<const TrainedModel> models, const EvalContext& ctx,
                                        const EvalPlan& plan, const PropensityTable* propensities) {
  if (models.empty()) throw ConfigError("no models to evaluate");
  const bool needs_propensity = std::any_of(plan.methods.begin(), plan.methods.end(),
                                            [](EvalMethod m) { return m != EvalMethod::holdout; });
  if (needs_propensity && propensities == nullptr) {
    throw ConfigError("ips and stratified evaluation need a propensity table; run the propensity command first");
  }
  std::optional<std::size_t> base;
  if (!plan.baseline.empty()) base = find_baseline(models, plan.baseline);

  std::vector<RankingSet> rankings;
  rankings.reserve(models.size());
  for (const auto& m : models) rankings.push_back(rank_test_users(m, ctx));

  std::vector<StrataAssignment> assignments;
  std::vector<StratumWeights> weights;
  if (std::find(plan.methods.begin(), plan.methods.end(), EvalMethod::stratified) != plan.methods.end()) {
    for (auto K : plan.strata) {
      assignments.push_back(assign_strata(*propensities, K));
      weights.push_back(stratum_weights(assignments.back(), ctx.test()));
    }
  }

  std::vector<EvalRecord> out;
  for (const auto& spec : plan.metrics) {
    for (auto method : plan.methods) {
      if (method == EvalMethod::stratified) {
        for (std::size_t k = 0; k < assignments.size(); ++k) {
          std::vector<StratumBreakdown> breakdowns;
          for (const auto& r : rankings) breakdowns.push_back(per_stratum_eval(r, ctx, assignments[k], spec));
          for (std::size_t m = 0; m < models.size(); ++m) {
            const auto report = stratified_eval(breakdowns[m].strata, weights[k]);
            EvalRecord rec;
            rec.model = models[m].label();
            rec.method = method;
            rec.metric = spec.label();
            rec.value = report.overall;
            rec.strata_K = assignments[k].K;
            for (std::size_t s = 0; s < report.per_stratum.size(); ++s) {
              rec.strata.push_back(stratum_record(s, report.per_stratum[s]));
              rec.users = std::max(rec.users, report.per_stratum[s].users);
              if (base && m != *base) {
                rec.strata[s].ttest = paired_ttest(breakdowns[m].per_user[s], breakdowns[*base].per_user[s]);
              }
            }
            if (base) rec.baseline = plan.baseline;
            out.push_back(std::move(rec));
          }
        }
        continue;
      }
      std::vector<EvalReport> reports;
      for (const auto& r : rankings) {
        reports.push_back(method == EvalMethod::holdout ? holdout_eval(r, ctx, spec)
                                                        : ips_eval(r, ctx, *propensities, spec, plan.ips));
      }
      for (std::size_t m = 0; m < models.size(); ++m) {
        EvalRecord rec;
        rec.model = models[m].label();
        rec.method = method;
        rec.metric = spec.label();
        rec.value = reports[m].overall;
        rec.users = reports[m].defined_users();
        if (base) {
          rec.baseline = plan.baseline;
          if (m != *base) {
            rec.ttest = paired_ttest(reports[m].per_user, reports[*base].per_user);
            rec.significant = rec.ttest && rec.ttest->p < plan.alpha;
          }
        }
        out.push_back(std::move(rec));
      }
    }
  }
  audit_records(out);
  return out;
}

void audit_records(std::span<const EvalRecord> records) {
  for (const auto& r : records) {
    if (r.method != EvalMethod::stratified) continue;
    double weight_sum = 0.0, total = 0.0;
    for (const auto& s : r.strata) {
      weight_sum += s.weight;
      if (s.weight > 0.0) {
        if (!s.value) throw DataError("audit: " + r.model + " stratum Q" + std::to_string(s.index + 1) +
                                      " carries weight but has no value");
        total += *s.value * s.weight;
      }
    }
    if (std::abs(weight_sum - 1.0) > 1e-12) {
      throw DataError("audit: stratum weights of " + r.model + " " + r.metric + " sum to " + std::to_string(weight_sum));
    }
    if (std::abs(total - r.value) > 1e-12) {
      throw DataError("audit: stratified value of " + r.model + " " + r.metric +
                      " differs from the weighted sum of its strata");
    }
  }
}

namespace {

json ttest_json(const std::optional<TTestResult>& t) {
  if (!t) return nullptr;
  auto finite_or_string = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : "-inf";
  };
  return {{"t", finite_or_string(t->t)}, {"p", t->p}, {"n", t->n}, {"mean_difference", t->mean_difference}};
}

std::optional<TTestResult> ttest_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  TTestResult t;
  const auto& tv = j.at("t");
  if (tv.is_string()) {
    t.t = tv.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                         : -std::numeric_limits<double>::infinity();
  } else {
    t.t = tv.get<double>();
  }
  t.p = j.at("p").get<double>();
  t.n = j.at("n").get<std::size_t>();
  t.mean_difference = j.at("mean_difference").get<double>();
  return t;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const EvalRecord& r) {
  json strata = json::array();
  for (const auto& s : r.strata) {
    strata.push_back({{"stratum", "Q" + std::to_string(s.index + 1)},
                      {"value", optional_json(s.value)},
                      {"weight", s.weight},
                      {"users", s.users},
                      {"interactions", s.interactions},
                      {"low_support", s.low_support},
                      {"ttest", ttest_json(s.ttest)}});
  }
  json j = {{"model", r.model},
            {"method", to_string(r.method)},
            {"metric", r.metric},
            {"value", r.value},
            {"users", r.users},
            {"strata_K", r.strata_K ? json(*r.strata_K) : json(nullptr)},
            {"strata", strata},
            {"baseline", r.baseline},
            {"ttest", ttest_json(r.ttest)},
            {"significant", r.significant}};
  return j;
}

EvalRecord eval_record_from_json(const json& j) {
  EvalRecord r;
  r.model = j.at("model").get<std::string>();
  r.method = parse_eval_method(j.at("method").get<std::string>());
  r.metric = j.at("metric").get<std::string>();
  r.value = j.at("value").get<double>();
  r.users = j.at("users").get<std::size_t>();
  if (!j.at("strata_K").is_null()) r.strata_K = j.at("strata_K").get<std::size_t>();
  for (const auto& s : j.at("strata")) {
    StratumRecord sr;
    sr.index = std::stoul(s.at("stratum").get<std::string>().substr(1)) - 1;
    if (!s.at("value").is_null()) sr.value = s.at("value").get<double>();
    sr.weight = s.at("weight").get<double>();
    sr.users = s.at("users").get<std::size_t>();
    sr.interactions = s.at("interactions").get<std::uint64_t>();
    sr.low_support = s.at("low_support").get<bool>();
    sr.ttest = ttest_from_json(s.at("ttest"));
    r.strata.push_back(sr);
  }
  r.baseline = j.at("baseline").get<std::string>();
  r.ttest = ttest_from_json(j.at("ttest"));
  r.significant = j.at("significant").get<bool>();
  return r;
}

void write_records_jsonl(std::ostream& out, std::span<const EvalRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

std::vector<EvalRecord> read_records_jsonl(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(eval_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(number, e.what());
    }
  }
  return out;
}

std::vector<EvalRecord> read_records_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_records_jsonl(in);
  } catch (const ParseError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::pair<std::string, double>> select_values(std::span<const EvalRecord> records, const Selection& sel) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& r : records) {
    if (r.method != sel.method || r.metric != sel.metric) continue;
    if (sel.method == EvalMethod::stratified && r.strata_K != sel.strata_K) continue;
    out.emplace_back(r.model, r.value);
  }
  return out;
}

Comparison compare_series(std::span<const std::pair<std::string, double>> x,
                          std::span<const std::pair<std::string, double>> y,
                          std::span<const std::pair<std::string, double>> z) {
  std::map<std::string, double> ym(y.begin(), y.end()), zm(z.begin(), z.end());
  Comparison c;
  for (const auto& [model, value] : x) {
    const auto yi = ym.find(model);
    const auto zi = zm.find(model);
    if (yi == ym.end() || zi == zm.end()) continue;
    c.models.push_back(model);
    c.x.push_back(value);
    c.y.push_back(yi->second);
    c.z.push_back(zi->second);
  }
  if (c.models.size() < 4) {
    throw DataError("comparison needs at least 4 models common to all reports (found " +
                    std::to_string(c.models.size()) + ")");
  }
  c.correlation = correlate(c.x, c.y, c.z);
  return c;
}

std::vector<SimpsonFinding> simpson_audit(std::span<const std::string> labels, std::span<const EvalReport> holdout,
                                          std::span<const StratumBreakdown> breakdowns,
                                          const StratumWeights& weights, double min_share) {
  std::vector<SimpsonFinding> out;
  for (std::size_t s = 0; s < weights.weights.size(); ++s) {
    if (weights.weights[s] < min_share) continue;
    for (std::size_t a = 0; a < labels.size(); ++a) {
      for (std::size_t b = 0; b < labels.size(); ++b) {
        if (!(holdout[a].overall > holdout[b].overall)) continue;
        const auto& va = breakdowns[a].strata[s].value;
        const auto& vb = breakdowns[b].strata[s].value;
        if (!va || !vb || !(*va < *vb)) continue;
        SimpsonFinding f;
        f.holdout_winner = labels[a];
        f.holdout_loser = labels[b];
        f.winner_holdout = holdout[a].overall;
        f.loser_holdout = holdout[b].overall;
        f.stratum = s;
        f.stratum_weight = weights.weights[s];
        f.winner_stratum = *va;
        f.loser_stratum = *vb;
        f.holdout_ttest = paired_ttest(holdout[a].per_user, holdout[b].per_user);
        f.stratum_ttest = paired_ttest(breakdowns[a].per_user[s], breakdowns[b].per_user[s]);
        out.push_back(std::move(f));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Study

json to_json(const StudyConfig& c) {
  json algorithms = json::array();
  for (auto a : c.algorithms) algorithms.push_back(to_string(a));
  json metrics = json::array();
  for (const auto& m : c.metrics) metrics.push_back(m.label());
  return {{"simulation", to_json(c.sim)},
          {"algorithms", algorithms},
          {"latent_sizes", c.latent_sizes},
          {"metrics", metrics},
          {"max_strata", c.max_strata},
          {"audit_K", c.audit_K},
          {"simpson_share", c.simpson_share},
          {"gamma",
           {{"method", to_string(c.gamma.method)},
            {"x_min", c.gamma.x_min},
            {"select_x_min", c.gamma.select_x_min},
            {"min_tail", c.gamma.min_tail}}},
          {"threads", c.threads}};
}

StudyConfig study_config_from_json(const json& j) {
  StudyConfig c;
  StrictReader r(j, "study config");
  if (const json* sim = r.raw("simulation")) c.sim = sim_config_from_json(*sim);
  if (const json* algs = r.raw("algorithms")) {
    c.algorithms.clear();
    for (const auto& a : *algs) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
  }
  r.read("latent_sizes", c.latent_sizes);
  if (const json* ms = r.raw("metrics")) {
    c.metrics.clear();
    for (const auto& m : *ms) c.metrics.push_back(MetricSpec::parse(m.get<std::string>()));
  }
  r.read("max_strata", c.max_strata);
  r.read("audit_K", c.audit_K);
  r.read("simpson_share", c.simpson_share);
  if (const json* g = r.raw("gamma")) {
    StrictReader gr(*g, "gamma options");
    std::string method(to_string(c.gamma.method));
    gr.read("method", method);
    c.gamma.method = parse_gamma_method(method);
    gr.read("x_min", c.gamma.x_min);
    gr.read("select_x_min", c.gamma.select_x_min);
    gr.read("min_tail", c.gamma.min_tail);
    gr.finish();
  }
  r.read("threads", c.threads);
  r.finish();
  if (c.max_strata == 0) throw ConfigError("max_strata must be >= 1");
  if (c.audit_K == 0 || c.audit_K > c.max_strata) throw ConfigError("audit_K must lie in [1, max_strata]");
  if (c.metrics.empty()) throw ConfigError("study needs at least one metric");
  return c;
}

const StudyMetric& StudyResult::metric(const MetricSpec& spec) const {
  for (const auto& m : metrics) {
    if (m.spec == spec) return m;
  }
  throw ConfigError("metric " + spec.label() + " was not part of the study");
}

StudyResult run_study(const StudyConfig& config) {
  const auto log = generate(config.sim);
  StudyResult out;
  out.seed = config.sim.seed;
  out.skew = audit_skew(log);

  const Dataset closed = log.closed_log();
  const auto counts = closed.item_counts();
  out.gamma = fit_gamma(counts, config.gamma);
  const auto propensities = estimate_propensities(closed, out.gamma);

  const auto models = sweep(config.algorithms, config.latent_sizes, log.closed_train, config.sim.seed, config.threads);
  for (const auto& m : models) out.models.push_back(m.label());

  const EvalContext closed_ctx(log.closed_train, log.closed_test);
  const EvalContext open_ctx(log.closed_train, log.open_test);
  std::vector<RankingSet> closed_rank, open_rank;
  for (const auto& m : models) {
    closed_rank.push_back(rank_test_users(m, closed_ctx));
    open_rank.push_back(rank_test_users(m, open_ctx));
  }

  std::vector<StrataAssignment> assignments;
  for (std::size_t K = 1; K <= config.max_strata; ++K) {
    assignments.push_back(assign_strata(propensities, K));
    out.weights.push_back(stratum_weights(assignments.back(), log.closed_test));
  }
  out.stratum_sizes_audit = assignments[config.audit_K - 1].sizes;

  for (const auto& spec : config.metrics) {
    StudyMetric sm;
    sm.spec = spec;
    std::vector<EvalReport> holdout;
    for (std::size_t m = 0; m < models.size(); ++m) {
      sm.open.push_back(holdout_eval(open_rank[m], open_ctx, spec).overall);
      holdout.push_back(holdout_eval(closed_rank[m], closed_ctx, spec));
      sm.holdout.push_back(holdout.back().overall);
    }
    sm.open_vs_holdout = linear_fit(sm.open, sm.holdout);
    sm.stratified.assign(config.max_strata, std::vector<std::optional<double>>(models.size()));
    for (std::size_t k = 0; k < config.max_strata; ++k) {
      std::vector<StratumBreakdown> breakdowns;
      for (std::size_t m = 0; m < models.size(); ++m) {
        breakdowns.push_back(per_stratum_eval(closed_rank[m], closed_ctx, assignments[k], spec));
        try {
          sm.stratified[k][m] = stratified_eval(breakdowns.back().strata, out.weights[k]).overall;
        } catch (const DataError&) {
          sm.stratified[k][m] = std::nullopt;
        }
      }
      if (k + 1 == config.audit_K) {
        sm.simpson = simpson_audit(out.models, holdout, breakdowns, out.weights[k], config.simpson_share);
      }
      const bool complete = std::all_of(sm.stratified[k].begin(), sm.stratified[k].end(),
                                        [](const auto& v) { return v.has_value(); });
      if (!complete) {
        sm.by_K.emplace_back();
        continue;
      }
      std::vector<double> z;
      for (const auto& v : sm.stratified[k]) z.push_back(*v);
      sm.by_K.push_back(correlate(sm.open, sm.holdout, z));
    }
    out.metrics.push_back(std::move(sm));
  }
  return out;
}

}  // namespace strateval
