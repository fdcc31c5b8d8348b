#include "strateval/strata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "strateval/errors.hpp"

namespace strateval {

std::optional<std::uint32_t> StrataAssignment::stratum_of_item(std::string_view item) const {
  const auto it = std::lower_bound(items.begin(), items.end(), item);
  if (it == items.end() || *it != item) return std::nullopt;
  return stratum_of[static_cast<std::size_t>(it - items.begin())];
}

StrataAssignment assign_strata(const PropensityTable& propensities, std::size_t K) {
  const std::size_t n = propensities.size();
  if (K == 0) throw ConfigError("number of strata must be >= 1");
  if (n == 0) throw DataError("cannot stratify an empty propensity table");
  if (K > n) {
    throw ConfigError("cannot form " + std::to_string(K) + " strata from " + std::to_string(n) + " items");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (propensities.scores[a] != propensities.scores[b]) return propensities.scores[a] < propensities.scores[b];
    if (propensities.counts[a] != propensities.counts[b]) return propensities.counts[a] < propensities.counts[b];
    return a < b;
  });

  std::vector<double> cumulative(n);
  double running = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    running += propensities.scores[order[r]];
    cumulative[r] = running;
  }
  const double total = running;

  // ends[s] = one past the last sorted position of stratum s.
  std::vector<std::size_t> ends(K);
  std::size_t start = 0;
  for (std::size_t s = 0; s + 1 < K; ++s) {
    const double target = total * static_cast<double>(s + 1) / static_cast<double>(K);
    // Leave at least one item for each remaining stratum.
    const std::size_t last_allowed = n - (K - s - 1);
    std::size_t best = start + 1;
    double best_gap = std::abs(cumulative[best - 1] - target);
    for (std::size_t end = start + 2; end <= last_allowed; ++end) {
      const double gap = std::abs(cumulative[end - 1] - target);
      if (gap < best_gap) {
        best_gap = gap;
        best = end;
      } else if (cumulative[end - 1] > target) {
        break;
      }
    }
    ends[s] = best;
    start = best;
  }
  ends[K - 1] = n;

  StrataAssignment out;
  out.K = K;
  out.items = propensities.items;
  out.counts = propensities.counts;
  out.scores = propensities.scores;
  out.stratum_of.assign(n, 0);
  out.mass.assign(K, 0.0);
  out.sizes.assign(K, 0);
  std::size_t begin = 0;
  for (std::size_t s = 0; s < K; ++s) {
    for (std::size_t r = begin; r < ends[s]; ++r) {
      out.stratum_of[order[r]] = static_cast<std::uint32_t>(s);
      out.mass[s] += propensities.scores[order[r]];
      ++out.sizes[s];
    }
    if (s + 1 < K) out.boundaries.push_back(propensities.scores[order[ends[s] - 1]]);
    begin = ends[s];
  }
  return out;
}

StratumWeights stratum_weights(const StrataAssignment& assignment, const Dataset& reference) {
  std::vector<std::uint32_t> stratum_by_ref_item(reference.items().size());
  for (std::size_t i = 0; i < reference.items().size(); ++i) {
    const auto s = assignment.stratum_of_item(reference.items()[i]);
    if (!s) throw DataError("item '" + reference.items()[i] + "' has no stratum assignment");
    stratum_by_ref_item[i] = *s;
  }
  StratumWeights out;
  out.counts.assign(assignment.K, 0);
  for (std::size_t i = 0; i < reference.items().size(); ++i) {
    out.counts[stratum_by_ref_item[i]] += reference.item_counts()[i];
  }
  const std::uint64_t total = std::accumulate(out.counts.begin(), out.counts.end(), std::uint64_t{0});
  if (total == 0) throw DataError("reference dataset has no interactions to weight strata");
  out.weights.reserve(assignment.K);
  for (auto c : out.counts) out.weights.push_back(static_cast<double>(c) / static_cast<double>(total));
  return out;
}

void write_strata(std::ostream& out, const StrataAssignment& assignment) {
  out << "# K=" << assignment.K;
  for (std::size_t s = 0; s < assignment.K; ++s) {
    out << " Q" << (s + 1) << "_items=" << assignment.sizes[s] << " Q" << (s + 1) << "_mass=" << std::setprecision(17)
        << assignment.mass[s];
  }
  out << '\n' << "item,count,score,stratum\n";
  for (std::size_t i = 0; i < assignment.items.size(); ++i) {
    out << assignment.items[i] << ',' << assignment.counts[i] << ',' << std::setprecision(17) << assignment.scores[i]
        << ',' << (assignment.stratum_of[i] + 1) << '\n';
  }
}

void write_strata_file(const std::string& path, const StrataAssignment& assignment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_strata(out, assignment);
}

}  // namespace strateval
