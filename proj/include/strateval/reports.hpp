#pragma once

// Tab-separated tables and plot data. Every emitter re-runs the arithmetic
// audits before writing.

#include <iosfwd>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strateval/stats.hpp"
#include "strateval/workbench.hpp"

namespace strateval {

// Evaluation table: one row per record plus one per stratum. The `sig`
// column carries '*' on the winner of a significant (p < alpha) paired t-test
// against the baseline.
void write_eval_table(std::ostream& out, std::span<const EvalRecord> records, double alpha = 0.05);

// One row: the three correlations, the Steiger statistic and the relative
// change of tau from Y to Z.
void write_comparison(std::ostream& out, const CorrelationReport& report, const std::string& metric,
                      const std::string& label_y, const std::string& label_z);

// Per-model (open, closed) pairs followed by a "# fit" line.
void write_scatter(std::ostream& out, std::span<const std::string> models, std::span<const double> open,
                   std::span<const double> closed);

// One row per strata count K: tau against the reference and the Steiger
// test of that K against K = 1. Undefined K are written as "NA".
void write_strata_sweep(std::ostream& out, std::span<const std::optional<CorrelationReport>> by_K,
                        double alpha = 0.05);

void write_simpson(std::ostream& out, std::span<const SimpsonFinding> findings);

nlohmann::json to_json(const CorrelationReport& report);
nlohmann::json to_json(const StudyResult& result);

}  // namespace strateval
