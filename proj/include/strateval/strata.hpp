#pragma once

// Propensity stratification: items are cut into K contiguous strata of the
// ascending propensity order, each holding roughly 1/K of the total
// propensity mass. Stratum 0 is the long tail, stratum K-1 the head.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "strateval/corpus.hpp"
#include "strateval/propensity.hpp"

namespace strateval {

struct StrataAssignment {
  std::size_t K = 1;
  std::vector<std::string> items;           // sorted, same order as the propensity table
  std::vector<std::uint32_t> counts;        // item counts from the table
  std::vector<double> scores;               // item propensities
  std::vector<std::uint32_t> stratum_of;    // 0-based stratum per item
  std::vector<double> mass;                 // summed propensity per stratum
  std::vector<std::size_t> sizes;           // items per stratum
  std::vector<double> boundaries;           // K-1 upper score bounds of strata 0..K-2

  // Stratum of an item id, or nullopt when unassigned.
  std::optional<std::uint32_t> stratum_of_item(std::string_view item) const;
};

// Greedy cumulative-mass cut over items sorted by (score, count, id).
StrataAssignment assign_strata(const PropensityTable& propensities, std::size_t K);

struct StratumWeights {
  std::vector<double> weights;
  std::vector<std::uint64_t> counts;
};

// Share of the reference interactions falling in each stratum.
StratumWeights stratum_weights(const StrataAssignment& assignment, const Dataset& reference);

// "item,count,score,stratum" rows, strata numbered from 1.
void write_strata(std::ostream& out, const StrataAssignment& assignment);
void write_strata_file(const std::string& path, const StrataAssignment& assignment);

}  // namespace strateval
