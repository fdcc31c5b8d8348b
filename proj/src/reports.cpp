#include "strateval/reports.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <tuple>

#include "strateval/errors.hpp"

namespace strateval {

using nlohmann::json;

namespace {

struct FixedFormat {
  explicit FixedFormat(std::ostream& out) : out_(out), flags_(out.flags()), precision_(out.precision()) {
    out_ << std::fixed << std::setprecision(6);
  }
  ~FixedFormat() {
    out_.flags(flags_);
    out_.precision(precision_);
  }

 private:
  std::ostream& out_;
  std::ios::fmtflags flags_;
  std::streamsize precision_;
};

bool wins(const std::optional<TTestResult>& t, double alpha) { return t && t->p < alpha && t->mean_difference > 0; }
bool loses(const std::optional<TTestResult>& t, double alpha) { return t && t->p < alpha && t->mean_difference < 0; }

std::string k_label(const EvalRecord& r) { return r.strata_K ? std::to_string(*r.strata_K) : "-"; }

void write_optional(std::ostream& out, const std::optional<double>& v) {
  if (v) out << *v;
  else out << "NA";
}

}  // namespace

void write_eval_table(std::ostream& out, std::span<const EvalRecord> records, double alpha) {
  audit_records(records);
  FixedFormat fmt(out);

  // The baseline wins a group when it beats every model tested against it.
  using Group = std::tuple<std::string, std::string, std::string>;
  std::map<Group, std::pair<std::size_t, std::size_t>> baseline_tally;  // (tested, baseline wins)
  for (const auto& r : records) {
    if (!r.ttest) continue;
    auto& tally = baseline_tally[{std::string(to_string(r.method)), r.metric, k_label(r)}];
    ++tally.first;
    tally.second += loses(r.ttest, alpha);
  }

  out << "model\tmethod\tmetric\tK\tstratum\tvalue\tweight\tusers\tsig\tnote\n";
  for (const auto& r : records) {
    std::string sig;
    if (wins(r.ttest, alpha)) sig = "*";
    if (!r.baseline.empty() && r.model == r.baseline) {
      const auto it = baseline_tally.find({std::string(to_string(r.method)), r.metric, k_label(r)});
      if (it != baseline_tally.end() && it->second.first > 0 && it->second.first == it->second.second) sig = "*";
    }
    out << r.model << '\t' << to_string(r.method) << '\t' << r.metric << '\t' << k_label(r) << "\tall\t" << r.value
        << '\t' << 1.0 << '\t' << r.users << '\t' << sig << '\t' << (r.model == r.baseline ? "baseline" : "") << '\n';
    for (const auto& s : r.strata) {
      out << r.model << '\t' << to_string(r.method) << '\t' << r.metric << '\t' << k_label(r) << "\tQ" << s.index + 1
          << '\t';
      write_optional(out, s.value);
      out << '\t' << s.weight << '\t' << s.users << '\t' << (wins(s.ttest, alpha) ? "*" : "") << '\t'
          << (s.low_support ? "low-support" : "") << '\n';
    }
  }
}

void write_comparison(std::ostream& out, const CorrelationReport& report, const std::string& metric,
                      const std::string& label_y, const std::string& label_z) {
  FixedFormat fmt(out);
  out << "metric\ty\tz\tn\ttau_xy\ttau_xz\ttau_yz\tsteiger_z\tp\tchange\n";
  out << metric << '\t' << label_y << '\t' << label_z << '\t' << report.n << '\t' << report.tau_xy << '\t'
      << report.tau_xz << '\t' << report.tau_yz << '\t';
  if (report.steiger) out << report.steiger->z << '\t' << report.steiger->p;
  else out << "NA\tNA";
  out << '\t';
  if (report.tau_xy != 0.0) out << (report.tau_xz - report.tau_xy) / std::abs(report.tau_xy);
  else out << "NA";
  out << '\n';
  if (!report.note.empty()) out << "# " << report.note << '\n';
}

void write_scatter(std::ostream& out, std::span<const std::string> models, std::span<const double> open,
                   std::span<const double> closed) {
  if (models.size() != open.size() || models.size() != closed.size()) {
    throw DataError("scatter series differ in length");
  }
  FixedFormat fmt(out);
  out << "model\topen\tclosed\n";
  for (std::size_t m = 0; m < models.size(); ++m) out << models[m] << '\t' << open[m] << '\t' << closed[m] << '\n';
  const auto fit = linear_fit(open, closed);
  out << "# fit\tslope\t" << fit.slope << "\tintercept\t" << fit.intercept << '\n';
}

void write_strata_sweep(std::ostream& out, std::span<const std::optional<CorrelationReport>> by_K, double alpha) {
  FixedFormat fmt(out);
  out << "K\ttau\tsteiger_z_vs_K1\tp\tsig\n";
  for (std::size_t k = 0; k < by_K.size(); ++k) {
    out << k + 1 << '\t';
    const auto& r = by_K[k];
    if (!r) {
      out << "NA\tNA\tNA\t\n";
      continue;
    }
    out << r->tau_xz << '\t';
    if (r->steiger) {
      out << r->steiger->z << '\t' << r->steiger->p << '\t' << (r->steiger->p < alpha ? "*" : "");
    } else {
      out << "NA\tNA\t";
    }
    out << '\n';
  }
}

void write_simpson(std::ostream& out, std::span<const SimpsonFinding> findings) {
  FixedFormat fmt(out);
  out << "holdout_winner\tholdout_loser\twinner_holdout\tloser_holdout\tstratum\tweight\twinner_stratum\t"
         "loser_stratum\tholdout_p\tstratum_p\n";
  for (const auto& f : findings) {
    out << f.holdout_winner << '\t' << f.holdout_loser << '\t' << f.winner_holdout << '\t' << f.loser_holdout
        << "\tQ" << f.stratum + 1 << '\t' << f.stratum_weight << '\t' << f.winner_stratum << '\t' << f.loser_stratum
        << '\t';
    if (f.holdout_ttest) out << f.holdout_ttest->p;
    else out << "NA";
    out << '\t';
    if (f.stratum_ttest) out << f.stratum_ttest->p;
    else out << "NA";
    out << '\n';
  }
}

json to_json(const CorrelationReport& r) {
  json j = {{"tau_xy", r.tau_xy}, {"tau_xz", r.tau_xz}, {"tau_yz", r.tau_yz}, {"n", r.n}};
  j["steiger"] = r.steiger ? json{{"z", r.steiger->z}, {"p", r.steiger->p}} : json(nullptr);
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

json to_json(const StudyResult& result) {
  json metrics = json::array();
  for (const auto& m : result.metrics) {
    json by_K = json::array();
    for (const auto& r : m.by_K) by_K.push_back(r ? to_json(*r) : json(nullptr));
    json simpson = json::array();
    for (const auto& f : m.simpson) {
      simpson.push_back({{"winner", f.holdout_winner},
                         {"loser", f.holdout_loser},
                         {"stratum", "Q" + std::to_string(f.stratum + 1)},
                         {"weight", f.stratum_weight}});
    }
    json stratified = json::array();
    for (const auto& row : m.stratified) {
      json values = json::array();
      for (const auto& v : row) values.push_back(v ? json(*v) : json(nullptr));
      stratified.push_back(values);
    }
    metrics.push_back({{"metric", m.spec.label()},
                       {"open", m.open},
                       {"holdout", m.holdout},
                       {"stratified", stratified},
                       {"by_K", by_K},
                       {"fit", {{"slope", m.open_vs_holdout.slope}, {"intercept", m.open_vs_holdout.intercept}}},
                       {"simpson", simpson}});
  }
  json weights = json::array();
  for (const auto& w : result.weights) weights.push_back(w.weights);
  return {{"seed", result.seed},
          {"models", result.models},
          {"gamma",
           {{"gamma", result.gamma.gamma},
            {"x_min", result.gamma.x_min},
            {"n_samples", result.gamma.n_samples},
            {"ks_distance", result.gamma.ks_distance},
            {"method", to_string(result.gamma.method)}}},
          {"skew",
           {{"exposure_gini", result.skew.exposure_gini},
            {"head_share", result.skew.head_share},
            {"exposure_interaction_spearman", result.skew.exposure_interaction_spearman}}},
          {"weights", weights},
          {"stratum_sizes", result.stratum_sizes_audit},
          {"metrics", metrics}};
}

}  // namespace strateval
