#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "strateval/corpus.hpp"
#include "strateval/errors.hpp"
#include "strateval/evaluators.hpp"
#include "strateval/models.hpp"
#include "strateval/propensity.hpp"
#include "strateval/reports.hpp"
#include "strateval/simulator.hpp"
#include "strateval/strata.hpp"
#include "strateval/workbench.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace strateval;

namespace {

// Relative outputs live under the data root.
fs::path output_path(const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : data_root() / path;
}

// Relative inputs are tried as given, then under the data root.
fs::path input_path(const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  const fs::path rooted = data_root() / path;
  if (fs::exists(rooted)) return rooted;
  throw DataError("input not found: " + p);
}

void prepare_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::ofstream open_output(const fs::path& path) {
  prepare_parent(path);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

RunManifest start_manifest(const std::string& command, json config, std::vector<std::uint64_t> seeds = {}) {
  RunManifest m;
  m.command = command;
  m.config = std::move(config);
  m.seeds = std::move(seeds);
  m.started = utc_timestamp();
  return m;
}

// Writes one sidecar manifest per artifact, each listing all artifacts.
void finish_manifest(RunManifest& manifest, const std::vector<fs::path>& artifacts) {
  for (const auto& a : artifacts) manifest.add_artifact(a);
  for (const auto& a : artifacts) manifest.write(manifest_path_for(a));
}

template <typename T>
std::vector<T> split_list(const std::string& text, T (*convert)(std::string_view)) {
  std::vector<T> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) out.push_back(convert(part));
  }
  return out;
}

std::size_t parse_size(std::string_view text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(std::string(text), &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(text) + "'");
  }
}

MetricSpec parse_metric(std::string_view text) { return MetricSpec::parse(text); }

std::string dataset_summary(const Dataset& d) {
  std::size_t relevant = 0;
  for (const auto& x : d.interactions()) relevant += x.relevant;
  std::ostringstream out;
  out << "users " << d.users().size() << " items " << d.items().size() << " interactions " << d.size()
      << " relevant " << relevant;
  return out.str();
}

Dataset read_dataset(const std::string& p, LoopKind loop = LoopKind::closed) {
  return read_interactions_file(input_path(p).string(), {}, ",", loop);
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string closed, open, name, delimiter = ",", columns = "0,1,2";
  std::size_t max_columns = 4;
  int threshold = kDefaultRelevanceThreshold;
  double split = 0.0;
  std::uint64_t seed = 0;
};

int run_ingest(const IngestArgs& a) {
  if (a.closed.empty() && a.open.empty()) throw ConfigError("ingest needs --closed and/or --open");
  const auto cols = split_list<std::size_t>(a.columns, parse_size);
  if (cols.size() != 3) throw ConfigError("--columns takes user,item,rating positions");
  ColumnSchema schema{cols[0], cols[1], cols[2], a.max_columns};
  json config = {{"closed", a.closed}, {"open", a.open}, {"name", a.name}, {"delimiter", a.delimiter},
                 {"columns", cols},    {"max_columns", a.max_columns},   {"threshold", a.threshold},
                 {"split", a.split},   {"seed", a.seed}};
  auto manifest = start_manifest("ingest", config, {a.seed});
  std::vector<fs::path> artifacts;

  auto ingest_one = [&](const std::string& file, LoopKind loop) {
    const auto in = input_path(file);
    Dataset d;
    try {
      d = binarize(read_interactions_file(in.string(), schema, a.delimiter, loop), a.threshold);
    } catch (const ParseError& e) {
      throw DataError(in.string() + ": " + e.what());
    }
    manifest.add_input(in);
    const auto out = output_path("datasets/" + a.name + "." + std::string(to_string(loop)) + ".csv");
    prepare_parent(out);
    write_interactions_file(out.string(), d);
    artifacts.push_back(out);
    std::cout << to_string(loop) << ": " << dataset_summary(d) << " -> " << out.string() << '\n';
    return d;
  };

  if (!a.closed.empty()) {
    const Dataset closed = ingest_one(a.closed, LoopKind::closed);
    if (a.split > 0.0) {
      if (!(a.split < 1.0)) throw ConfigError("--split must lie in (0, 1)");
      const auto s = split_holdout(closed, a.split, a.seed);
      for (const auto& [part, d] : {std::pair{"train", &s.train}, std::pair{"test", &s.test}}) {
        const auto out = output_path("datasets/" + a.name + "." + part + ".csv");
        write_interactions_file(out.string(), *d);
        artifacts.push_back(out);
        std::cout << part << ": " << dataset_summary(*d) << " -> " << out.string() << '\n';
      }
    }
  }
  if (!a.open.empty()) ingest_one(a.open, LoopKind::open);
  finish_manifest(manifest, artifacts);
  return 0;
}

struct SimulateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
  json raw = a.config.empty() ? json::object() : read_json_file(input_path(a.config));
  if (a.seed) raw["seed"] = *a.seed;
  const SimConfig config = sim_config_from_json(raw);
  const fs::path dir = output_path(a.out.empty() ? "sim-" + std::to_string(config.seed) : a.out);

  const auto log = generate(config);
  fs::create_directories(dir);
  auto manifest = start_manifest("simulate", to_json(config), {config.seed});
  if (!a.config.empty()) manifest.add_input(input_path(a.config));
  std::vector<fs::path> artifacts;
  for (const auto& [name, d] : {std::pair{"closed_train", &log.closed_train},
                                std::pair{"closed_test", &log.closed_test}, std::pair{"open_test", &log.open_test}}) {
    const auto path = dir / (std::string(name) + ".csv");
    write_interactions_file(path.string(), *d);
    artifacts.push_back(path);
    std::cout << name << ": " << dataset_summary(*d) << '\n';
  }
  {
    const auto path = dir / "exposure.csv";
    auto out = open_output(path);
    out << "item,exposures\n";
    for (std::size_t i = 0; i < log.item_ids.size(); ++i) out << log.item_ids[i] << ',' << log.exposure_counts[i] << '\n';
    out.close();
    artifacts.push_back(path);
  }
  const auto skew = audit_skew(log);
  std::cout << "exposure gini " << skew.exposure_gini << " head share " << skew.head_share
            << " exposure/interaction spearman " << skew.exposure_interaction_spearman << '\n';
  for (const auto& p : artifacts) manifest.add_artifact(p);
  json m = manifest.to_json();
  m["exposure_counts"] = log.exposure_counts;
  m["skew"] = {{"exposure_gini", skew.exposure_gini},
               {"head_share", skew.head_share},
               {"exposure_interaction_spearman", skew.exposure_interaction_spearman}};
  m["finished"] = utc_timestamp();
  auto out = open_output(dir / "manifest.json");
  out << m.dump(2) << '\n';
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

struct PropensityArgs {
  std::vector<std::string> data;
  std::string out = "propensity.csv", method = "discrete_mle";
  std::uint64_t x_min = 1;
  bool select_x_min = false;
  std::size_t min_tail = 10;
};

int run_propensity(const PropensityArgs& a) {
  GammaFitOptions opts;
  opts.method = parse_gamma_method(a.method);
  opts.x_min = a.x_min;
  opts.select_x_min = a.select_x_min;
  opts.min_tail = a.min_tail;
  json config = {{"data", a.data},         {"method", a.method},       {"x_min", a.x_min},
                 {"select_x_min", a.select_x_min}, {"min_tail", a.min_tail}};
  auto manifest = start_manifest("propensity", config);
  std::vector<Dataset> parts;
  for (const auto& p : a.data) {
    parts.push_back(read_dataset(p));
    manifest.add_input(input_path(p));
  }
  const Dataset closed = merge(parts);
  const auto gamma = fit_gamma(closed.item_counts(), opts);
  const auto table = estimate_propensities(closed, gamma);
  const auto out = output_path(a.out);
  prepare_parent(out);
  write_propensity_file(out.string(), table);
  finish_manifest(manifest, {out});
  std::cout << "gamma " << gamma.gamma << " x_min " << gamma.x_min << " tail " << gamma.n_samples << " ks "
            << gamma.ks_distance << " items " << table.size() << " -> " << out.string() << '\n';
  return 0;
}

struct StratifyArgs {
  std::string propensity, reference, out = "strata.csv";
  std::size_t K = 2;
};

int run_stratify(const StratifyArgs& a) {
  json config = {{"propensity", a.propensity}, {"reference", a.reference}, {"K", a.K}};
  auto manifest = start_manifest("stratify", config);
  const auto ppath = input_path(a.propensity);
  manifest.add_input(ppath);
  const auto assignment = assign_strata(read_propensity_file(ppath.string()), a.K);
  std::optional<StratumWeights> weights;
  if (!a.reference.empty()) {
    weights = stratum_weights(assignment, read_dataset(a.reference));
    manifest.add_input(input_path(a.reference));
  }
  const auto out = output_path(a.out);
  prepare_parent(out);
  write_strata_file(out.string(), assignment);
  finish_manifest(manifest, {out});
  std::cout << "stratum\titems\tmass";
  if (weights) std::cout << "\tinteractions\tweight";
  std::cout << '\n';
  for (std::size_t s = 0; s < assignment.K; ++s) {
    std::cout << 'Q' << s + 1 << '\t' << assignment.sizes[s] << '\t' << assignment.mass[s];
    if (weights) std::cout << '\t' << weights->counts[s] << '\t' << weights->weights[s];
    std::cout << '\n';
  }
  return 0;
}

struct TrainArgs {
  std::string train, out_dir = "models", algorithms = "BO,GA,POP,MF,BPR,WMF", sizes = "10";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate, regularization;
};

Algorithm parse_alg(std::string_view t) { return parse_algorithm(t); }

int run_train(const TrainArgs& a) {
  const auto algorithms = split_list<Algorithm>(a.algorithms, parse_alg);
  const auto sizes = split_list<std::size_t>(a.sizes, parse_size);
  if (algorithms.empty()) throw ConfigError("--algorithms is empty");
  auto configs = sweep_configs(algorithms, sizes, a.seed);
  for (auto& c : configs) {
    if (a.epochs) c.epochs = *a.epochs;
    if (a.learning_rate) c.learning_rate = *a.learning_rate;
    if (a.regularization) c.regularization = *a.regularization;
  }
  const auto tpath = input_path(a.train);
  const Dataset train = read_dataset(a.train);
  const auto models = fit_all(configs, train, a.threads);
  const fs::path dir = output_path(a.out_dir);
  fs::create_directories(dir);
  for (const auto& m : models) {
    auto manifest = start_manifest("train", to_json(m.config()), {m.config().seed});
    manifest.add_input(tpath);
    const auto path = dir / (m.label() + ".model.json");
    save_model(path.string(), m);
    finish_manifest(manifest, {path});
    std::cout << m.label() << " -> " << path.string() << '\n';
  }
  return 0;
}

std::vector<fs::path> model_files(const std::vector<std::string>& specs) {
  std::vector<fs::path> out;
  for (const auto& s : specs) {
    const auto p = input_path(s);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (name.ends_with(".model.json")) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  if (out.empty()) throw DataError("no model files found");
  return out;
}

EvalMethod parse_method(std::string_view t) { return parse_eval_method(t); }

struct EvaluateArgs {
  std::string train, test, propensity, baseline, out = "evaluation.jsonl", table;
  std::vector<std::string> models;
  std::string methods = "holdout,stratified", strata = "2", metrics = "ndcg@10";
  double clip = 0.0, alpha = 0.05;
  bool self_normalized = false;
};

int run_evaluate(const EvaluateArgs& a) {
  EvalPlan plan;
  plan.methods = split_list<EvalMethod>(a.methods, parse_method);
  plan.strata = split_list<std::size_t>(a.strata, parse_size);
  plan.metrics = split_list<MetricSpec>(a.metrics, parse_metric);
  plan.baseline = a.baseline;
  plan.ips.clip = a.clip;
  plan.ips.self_normalized = a.self_normalized;
  plan.alpha = a.alpha;
  if (plan.methods.empty() || plan.metrics.empty()) throw ConfigError("--methods and --metrics must be non-empty");
  const bool needs_propensity = std::any_of(plan.methods.begin(), plan.methods.end(),
                                            [](EvalMethod m) { return m != EvalMethod::holdout; });
  if (needs_propensity && a.propensity.empty()) {
    throw ConfigError("ips and stratified evaluation need --propensity; run the propensity command first");
  }

  json config = {{"train", a.train},           {"test", a.test},          {"models", a.models},
                 {"methods", a.methods},       {"strata", a.strata},      {"metrics", a.metrics},
                 {"baseline", a.baseline},     {"propensity", a.propensity}, {"clip", a.clip},
                 {"self_normalized", a.self_normalized}, {"alpha", a.alpha}};
  auto manifest = start_manifest("evaluate", config);
  const Dataset train = read_dataset(a.train);
  const Dataset test = read_dataset(a.test);
  manifest.add_input(input_path(a.train));
  manifest.add_input(input_path(a.test));
  std::optional<PropensityTable> table;
  if (!a.propensity.empty()) {
    const auto p = input_path(a.propensity);
    table = read_propensity_file(p.string());
    manifest.add_input(p);
  }
  std::vector<TrainedModel> models;
  for (const auto& f : model_files(a.models)) {
    models.push_back(load_model(f.string()));
    manifest.add_input(f);
  }
  const EvalContext ctx(train, test);
  const auto records = evaluate_models(models, ctx, plan, table ? &*table : nullptr);

  std::vector<fs::path> artifacts;
  const auto out = output_path(a.out);
  {
    auto stream = open_output(out);
    write_records_jsonl(stream, records);
  }
  artifacts.push_back(out);
  if (!a.table.empty()) {
    const auto tpath = output_path(a.table);
    auto stream = open_output(tpath);
    write_eval_table(stream, records, plan.alpha);
    stream.close();
    artifacts.push_back(tpath);
  }
  finish_manifest(manifest, artifacts);
  write_eval_table(std::cout, records, plan.alpha);
  return 0;
}

struct CompareArgs {
  std::string open, closed, metric = "ndcg@10", y = "holdout", z = "stratified", out_dir = "compare";
  std::size_t K = 2, y_K = 2, strata_sweep = 0;
};

int run_compare(const CompareArgs& a) {
  json config = {{"open", a.open}, {"closed", a.closed}, {"metric", a.metric}, {"y", a.y},
                 {"z", a.z},       {"K", a.K},           {"y_K", a.y_K},     {"strata_sweep", a.strata_sweep}};
  auto manifest = start_manifest("compare", config);
  const auto open_path = input_path(a.open), closed_path = input_path(a.closed);
  manifest.add_input(open_path);
  manifest.add_input(closed_path);
  const auto open_records = read_records_file(open_path);
  const auto closed_records = read_records_file(closed_path);
  const std::string metric = MetricSpec::parse(a.metric).label();

  auto selection = [&](const std::string& method, std::size_t K) {
    Selection s{parse_eval_method(method), metric, std::nullopt};
    if (s.method == EvalMethod::stratified) s.strata_K = K;
    return s;
  };
  const auto x = select_values(open_records, {EvalMethod::holdout, metric, std::nullopt});
  const auto y = select_values(closed_records, selection(a.y, a.y_K));
  const auto z = select_values(closed_records, selection(a.z, a.K));
  if (x.empty()) throw DataError("open-loop report has no holdout " + metric + " records");
  if (y.empty() || z.empty()) throw DataError("closed-loop report lacks " + a.y + "/" + a.z + " " + metric + " records");
  const auto cmp = compare_series(x, y, z);

  const fs::path dir = output_path(a.out_dir);
  fs::create_directories(dir);
  std::vector<fs::path> artifacts;
  const std::string label_y = a.y + (a.y == "stratified" ? "-K" + std::to_string(a.y_K) : "");
  const std::string label_z = a.z + (a.z == "stratified" ? "-K" + std::to_string(a.K) : "");
  {
    const auto path = dir / "comparison.tsv";
    auto out = open_output(path);
    write_comparison(out, cmp.correlation, metric, label_y, label_z);
    artifacts.push_back(path);
    write_comparison(std::cout, cmp.correlation, metric, label_y, label_z);
  }
  {
    const auto path = dir / "comparison.json";
    auto out = open_output(path);
    json j = to_json(cmp.correlation);
    j["metric"] = metric;
    j["y"] = label_y;
    j["z"] = label_z;
    j["models"] = cmp.models;
    j["x"] = cmp.x;
    j["y_values"] = cmp.y;
    j["z_values"] = cmp.z;
    out << j.dump(2) << '\n';
    artifacts.push_back(path);
  }
  {
    const auto path = dir / "scatter.tsv";
    auto out = open_output(path);
    write_scatter(out, cmp.models, cmp.x, cmp.y);
    artifacts.push_back(path);
  }
  if (a.strata_sweep > 0) {
    const auto k1 = select_values(closed_records, {EvalMethod::stratified, metric, std::size_t{1}});
    std::vector<std::optional<CorrelationReport>> by_K;
    for (std::size_t K = 1; K <= a.strata_sweep; ++K) {
      const auto zk = select_values(closed_records, {EvalMethod::stratified, metric, K});
      if (k1.empty() || zk.empty()) {
        by_K.emplace_back();
        continue;
      }
      by_K.push_back(compare_series(x, k1, zk).correlation);
    }
    const auto path = dir / "strata_sweep.tsv";
    auto out = open_output(path);
    write_strata_sweep(out, by_K);
    artifacts.push_back(path);
  }
  finish_manifest(manifest, artifacts);
  return 0;
}

struct ReportArgs {
  std::string records, study, out, out_dir = "study";
  std::optional<std::uint64_t> seed;
  double alpha = 0.05;
};

std::string file_safe(std::string s) {
  for (auto& c : s) {
    if (c == '@') c = '_';
  }
  return s;
}

int run_report(const ReportArgs& a) {
  if (a.records.empty() == a.study.empty()) throw ConfigError("report needs exactly one of --records or --study");
  if (!a.records.empty()) {
    auto manifest = start_manifest("report", {{"records", a.records}, {"alpha", a.alpha}});
    const auto in = input_path(a.records);
    manifest.add_input(in);
    const auto records = read_records_file(in);
    if (a.out.empty()) {
      write_eval_table(std::cout, records, a.alpha);
      return 0;
    }
    const auto path = output_path(a.out);
    auto out = open_output(path);
    write_eval_table(out, records, a.alpha);
    out.close();
    finish_manifest(manifest, {path});
    return 0;
  }

  const auto cpath = input_path(a.study);
  json raw = read_json_file(cpath);
  if (a.seed) raw["simulation"]["seed"] = *a.seed;
  const auto config = study_config_from_json(raw);
  auto manifest = start_manifest("report", to_json(config), {config.sim.seed});
  manifest.add_input(cpath);
  const auto result = run_study(config);
  const fs::path dir = output_path(a.out_dir);
  fs::create_directories(dir);
  std::vector<fs::path> artifacts;
  {
    const auto path = dir / "study.json";
    auto out = open_output(path);
    out << to_json(result).dump(2) << '\n';
    artifacts.push_back(path);
  }
  std::cout << "gamma " << result.gamma.gamma << " x_min " << result.gamma.x_min << "  K=" << config.audit_K
            << " weights";
  for (double w : result.weights[config.audit_K - 1].weights) std::cout << ' ' << w;
  std::cout << '\n';
  for (const auto& m : result.metrics) {
    const std::string tag = file_safe(m.spec.label());
    const auto& headline = m.by_K[config.audit_K - 1];
    if (headline) {
      const auto path = dir / ("comparison_" + tag + ".tsv");
      auto out = open_output(path);
      write_comparison(out, *headline, m.spec.label(), "holdout", "stratified-K" + std::to_string(config.audit_K));
      artifacts.push_back(path);
      write_comparison(std::cout, *headline, m.spec.label(), "holdout",
                       "stratified-K" + std::to_string(config.audit_K));
    } else {
      std::cout << m.spec.label() << ": stratified estimate undefined at K=" << config.audit_K << '\n';
    }
    {
      const auto path = dir / ("scatter_" + tag + ".tsv");
      auto out = open_output(path);
      write_scatter(out, result.models, m.open, m.holdout);
      artifacts.push_back(path);
    }
    {
      const auto path = dir / ("strata_sweep_" + tag + ".tsv");
      auto out = open_output(path);
      write_strata_sweep(out, m.by_K, a.alpha);
      artifacts.push_back(path);
    }
    {
      const auto path = dir / ("simpson_" + tag + ".tsv");
      auto out = open_output(path);
      write_simpson(out, m.simpson);
      artifacts.push_back(path);
      std::cout << m.spec.label() << ": " << m.simpson.size() << " Simpson reversal(s)\n";
    }
  }
  finish_manifest(manifest, artifacts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strateval: offline recommender evaluation with propensity stratification"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse interaction files into stored datasets");
  c_ingest->add_option("--closed", ingest.closed, "Closed-loop interaction file");
  c_ingest->add_option("--open", ingest.open, "Open-loop (randomised) interaction file");
  c_ingest->add_option("--name", ingest.name, "Dataset name")->required();
  c_ingest->add_option("--delimiter", ingest.delimiter, "Field delimiter")->capture_default_str();
  c_ingest->add_option("--columns", ingest.columns, "0-based user,item,rating columns")->capture_default_str();
  c_ingest->add_option("--max-columns", ingest.max_columns, "Maximum fields per line")->capture_default_str();
  c_ingest->add_option("--threshold", ingest.threshold, "Relevance threshold on ratings")->capture_default_str();
  c_ingest->add_option("--split", ingest.split, "Also split the closed log with this train ratio");
  c_ingest->add_option("--seed", ingest.seed, "Split seed")->capture_default_str();

  SimulateArgs simulate;
  auto* c_sim = app.add_subcommand("simulate", "Generate closed- and open-loop feedback");
  c_sim->add_option("--config", simulate.config, "JSON simulation config");
  c_sim->add_option("--out", simulate.out, "Output directory (default sim-<seed>)");
  c_sim->add_option("--seed", simulate.seed, "Override the config seed");

  PropensityArgs prop;
  auto* c_prop = app.add_subcommand("propensity", "Fit the power law and item propensities");
  c_prop->add_option("--data", prop.data, "Closed-loop dataset file(s)")->required();
  c_prop->add_option("--out", prop.out, "Propensity table")->capture_default_str();
  c_prop->add_option("--method", prop.method, "discrete_mle or continuous")->capture_default_str();
  c_prop->add_option("--x-min", prop.x_min, "Lower bound of the fitted tail")->capture_default_str();
  c_prop->add_flag("--select-x-min", prop.select_x_min, "Choose x_min by Kolmogorov-Smirnov distance");
  c_prop->add_option("--min-tail", prop.min_tail, "Smallest tail for x_min selection")->capture_default_str();

  StratifyArgs strat;
  auto* c_strat = app.add_subcommand("stratify", "Cut items into propensity strata");
  c_strat->add_option("--propensity", strat.propensity, "Propensity table")->required();
  c_strat->add_option("--strata,-K", strat.K, "Number of strata")->capture_default_str();
  c_strat->add_option("--reference", strat.reference, "Dataset whose interactions define stratum weights");
  c_strat->add_option("--out", strat.out, "Strata file")->capture_default_str();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train recommenders");
  c_train->add_option("--train", train.train, "Training dataset")->required();
  c_train->add_option("--algorithms", train.algorithms, "Comma-separated algorithms")->capture_default_str();
  c_train->add_option("--sizes", train.sizes, "Comma-separated latent sizes")->capture_default_str();
  c_train->add_option("--seed", train.seed, "Training seed")->capture_default_str();
  c_train->add_option("--threads", train.threads, "Worker threads")->capture_default_str();
  c_train->add_option("--epochs", train.epochs, "Override epochs");
  c_train->add_option("--learning-rate", train.learning_rate, "Override learning rate");
  c_train->add_option("--regularization", train.regularization, "Override regularisation");
  c_train->add_option("--out-dir", train.out_dir, "Model directory")->capture_default_str();

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Evaluate trained models on a test set");
  c_eval->add_option("--train", eval.train, "Training dataset (its items are excluded from rankings)")->required();
  c_eval->add_option("--test", eval.test, "Test dataset")->required();
  c_eval->add_option("--models", eval.models, "Model files or directories")->required();
  c_eval->add_option("--methods", eval.methods, "holdout,ips,stratified")->capture_default_str();
  c_eval->add_option("--strata,-K", eval.strata, "Comma-separated strata counts")->capture_default_str();
  c_eval->add_option("--metrics", eval.metrics, "Comma-separated metrics, e.g. ndcg@10,ndcg")->capture_default_str();
  c_eval->add_option("--baseline", eval.baseline, "Model label for paired t-tests");
  c_eval->add_option("--propensity", eval.propensity, "Propensity table (ips, stratified)");
  c_eval->add_option("--clip", eval.clip, "IPS propensity floor")->capture_default_str();
  c_eval->add_flag("--self-normalized", eval.self_normalized, "Self-normalised IPS");
  c_eval->add_option("--alpha", eval.alpha, "Significance level")->capture_default_str();
  c_eval->add_option("--out", eval.out, "Records (JSON lines)")->capture_default_str();
  c_eval->add_option("--table", eval.table, "Also write a TSV table");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "Correlate closed-loop estimators with open-loop results");
  c_cmp->add_option("--open", cmp.open, "Open-loop evaluation records")->required();
  c_cmp->add_option("--closed", cmp.closed, "Closed-loop evaluation records")->required();
  c_cmp->add_option("--metric", cmp.metric, "Metric label")->capture_default_str();
  c_cmp->add_option("--y", cmp.y, "First estimator")->capture_default_str();
  c_cmp->add_option("--z", cmp.z, "Second estimator")->capture_default_str();
  c_cmp->add_option("--strata,-K", cmp.K, "Strata count of a stratified z")->capture_default_str();
  c_cmp->add_option("--y-strata", cmp.y_K, "Strata count of a stratified y")->capture_default_str();
  c_cmp->add_option("--strata-sweep", cmp.strata_sweep, "Emit per-K data for K = 1..N")->capture_default_str();
  c_cmp->add_option("--out-dir", cmp.out_dir, "Output directory")->capture_default_str();

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Emit tables from records or run a simulated study");
  c_rep->add_option("--records", rep.records, "Evaluation records to tabulate");
  c_rep->add_option("--out", rep.out, "Table file (stdout when omitted)");
  c_rep->add_option("--study", rep.study, "Study config (JSON)");
  c_rep->add_option("--seed", rep.seed, "Override the simulation seed");
  c_rep->add_option("--out-dir", rep.out_dir, "Study output directory")->capture_default_str();
  c_rep->add_option("--alpha", rep.alpha, "Significance level")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_sim->parsed()) return run_simulate(simulate);
    if (c_prop->parsed()) return run_propensity(prop);
    if (c_strat->parsed()) return run_stratify(strat);
    if (c_train->parsed()) return run_train(train);
    if (c_eval->parsed()) return run_evaluate(eval);
    if (c_cmp->parsed()) return run_compare(cmp);
    if (c_rep->parsed()) return run_report(rep);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
  return static_cast<int>(ExitCode::usage);
}
