#pragma once

// Run plumbing shared by the command-line tool and the test suites:
// manifests, configuration files, evaluation records, comparisons and the
// end-to-end simulated study.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strateval/evaluators.hpp"
#include "strateval/models.hpp"
#include "strateval/propensity.hpp"
#include "strateval/simulator.hpp"
#include "strateval/stats.hpp"
#include "strateval/strata.hpp"

namespace strateval {

inline constexpr const char* kHomeVariable = "STRATEVAL_HOME";

// $STRATEVAL_HOME, or ./strateval-data when unset.
std::filesystem::path data_root();

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> artifacts;
  std::string started;
  std::string finished;

  // Digest of the canonical (sorted-key, compact) config dump.
  std::string config_digest() const;
  void add_input(const std::filesystem::path& path);
  void add_artifact(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  // Stamps `finished` and writes JSON to `path`.
  void write(const std::filesystem::path& path);
};

// Sidecar manifest path for an output file: "<file>.manifest.json".
std::filesystem::path manifest_path_for(const std::filesystem::path& artifact);

// Configuration files. Unknown keys are a ConfigError; missing keys keep
// their defaults. to_json emits every resolved field.
nlohmann::json to_json(const SimConfig& config);
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& config);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Evaluation records: one per model x method x metric.
struct StratumRecord {
  std::size_t index = 0;  // 0-based; printed as Q1..QK
  std::optional<double> value;
  double weight = 0.0;
  std::size_t users = 0;
  std::uint64_t interactions = 0;
  bool low_support = false;
  std::optional<TTestResult> ttest;  // against the baseline within this stratum
};

struct EvalRecord {
  std::string model;
  EvalMethod method = EvalMethod::holdout;
  std::string metric;
  double value = 0.0;
  std::size_t users = 0;
  std::optional<std::size_t> strata_K;
  std::vector<StratumRecord> strata;
  std::string baseline;               // empty when no baseline was named
  std::optional<TTestResult> ttest;   // against the baseline
  bool significant = false;           // p < 0.05 against the baseline
};

struct EvalPlan {
  std::vector<EvalMethod> methods{EvalMethod::holdout, EvalMethod::stratified};
  std::vector<MetricSpec> metrics{MetricSpec{10, Aggregation::ndcg}};
  // Stratified records are produced for every K listed.
  std::vector<std::size_t> strata{2};
  std::string baseline;
  IpsOptions ips;
  double alpha = 0.05;
};

// `propensities` is required for ips and stratified methods.
std::vector<EvalRecord> evaluate_models(std::span<const TrainedModel> models, const EvalContext& ctx,
                                        const EvalPlan& plan, const PropensityTable* propensities);

// Re-checks stratified = sum weight x stratum value and sum of weights = 1.
void audit_records(std::span<const EvalRecord> records);

nlohmann::json to_json(const EvalRecord& record);
EvalRecord eval_record_from_json(const nlohmann::json& j);
void write_records_jsonl(std::ostream& out, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_records_jsonl(std::istream& in);
std::vector<EvalRecord> read_records_file(const std::filesystem::path& path);

// Values of one method/metric/K selection keyed by model label.
struct Selection {
  EvalMethod method = EvalMethod::holdout;
  std::string metric;
  std::optional<std::size_t> strata_K;
};
std::vector<std::pair<std::string, double>> select_values(std::span<const EvalRecord> records, const Selection& sel);

// Kendall/Steiger comparison of two estimators against a reference series.
struct Comparison {
  std::string metric;
  std::string method_y, method_z;
  std::vector<std::string> models;
  std::vector<double> x, y, z;
  CorrelationReport correlation;
};

Comparison compare_series(std::span<const std::pair<std::string, double>> x,
                          std::span<const std::pair<std::string, double>> y,
                          std::span<const std::pair<std::string, double>> z);

// A pair whose holdout order reverses in the stratum carrying most feedback.
struct SimpsonFinding {
  std::string holdout_winner, holdout_loser;
  double winner_holdout = 0.0, loser_holdout = 0.0;
  std::size_t stratum = 0;
  double stratum_weight = 0.0;
  double winner_stratum = 0.0, loser_stratum = 0.0;
  std::optional<TTestResult> holdout_ttest, stratum_ttest;
};

// Scans every ordered model pair. Only strata with weight >= min_share count.
std::vector<SimpsonFinding> simpson_audit(std::span<const std::string> labels, std::span<const EvalReport> holdout,
                                          std::span<const StratumBreakdown> breakdowns,
                                          const StratumWeights& weights, double min_share);

// End-to-end simulated study: simulate, fit propensities on the closed log,
// train the sweep on closed_train, evaluate on closed_test (holdout and
// stratified for K = 1..max_strata) and on open_test (holdout), then compare.
struct StudyConfig {
  SimConfig sim;
  std::vector<Algorithm> algorithms{std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
  std::vector<std::size_t> latent_sizes{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<MetricSpec> metrics{MetricSpec{std::nullopt, Aggregation::ndcg}, MetricSpec{10, Aggregation::ndcg}};
  std::size_t max_strata = 10;
  // Strata count used for the Simpson audit and the headline comparison.
  std::size_t audit_K = 2;
  double simpson_share = 0.9;
  GammaFitOptions gamma;
  std::size_t threads = 1;
};

nlohmann::json to_json(const StudyConfig& config);
StudyConfig study_config_from_json(const nlohmann::json& j);

struct StudyMetric {
  MetricSpec spec;
  std::vector<double> open;     // X: holdout on the open-loop test set
  std::vector<double> holdout;  // Y: holdout on the closed-loop test set
  // stratified[K - 1][model]; nullopt when some weighted stratum is empty.
  std::vector<std::vector<std::optional<double>>> stratified;
  // Comparison of X against holdout and against stratified at each K.
  std::vector<std::optional<CorrelationReport>> by_K;
  LinearFit open_vs_holdout;
  std::vector<SimpsonFinding> simpson;
};

struct StudyResult {
  std::uint64_t seed = 0;
  std::vector<std::string> models;
  GammaEstimate gamma;
  SkewSummary skew;
  std::vector<StratumWeights> weights;  // per K
  std::vector<std::size_t> stratum_sizes_audit;
  std::vector<StudyMetric> metrics;

  const StudyMetric& metric(const MetricSpec& spec) const;
};

StudyResult run_study(const StudyConfig& config);

}  // namespace strateval
