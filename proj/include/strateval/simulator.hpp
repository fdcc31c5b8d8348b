#pragma once

// Synthetic closed- and open-loop feedback from a latent-factor ground truth.
//
// Ground truth: users and items carry standard-normal latent vectors; a user
// finds the top relevance_quantile fraction of items (by dot product)
// relevant. A deployed policy exposes items session by session and every
// exposure yields a rating of 5 (relevant) or 1, flipped with probability
// interact_noise. The open-loop test set exposes uniform random items once.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "strateval/corpus.hpp"
#include "strateval/models.hpp"

namespace strateval {

enum class Policy { popularity_biased, trained_mf, uniform_random };

std::string_view to_string(Policy policy) noexcept;
Policy parse_policy(std::string_view text);

struct SimConfig {
  std::size_t n_users = 2000;
  std::size_t n_items = 500;
  std::size_t true_rank = 10;
  std::size_t exposure_budget = 10;
  std::size_t sessions = 3;
  Policy deployed_policy = Policy::popularity_biased;
  double interact_noise = 0.1;
  double relevance_quantile = 0.2;
  // Exponent on (count + 1) in popularity-biased sampling.
  double popularity_exponent = 1.0;
  double split_ratio = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  Matrix user_factors;
  Matrix item_factors;
  // n_users x n_items row-major relevance flags.
  std::vector<std::uint8_t> relevant;
  std::size_t n_items = 0;

  bool is_relevant(std::size_t user, std::size_t item) const { return relevant[user * n_items + item] != 0; }
};

struct FeedbackLog {
  SimConfig config;
  Dataset closed_train;
  Dataset closed_test;
  Dataset open_test;
  // Exposure ids follow the generated vocabularies "u<n>" / "i<n>".
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  // Deployed-policy exposures per item, repeats included.
  std::vector<std::uint64_t> exposure_counts;
  // Sorted distinct items each user was exposed to by the deployed policy.
  std::vector<std::vector<std::uint32_t>> exposed;
  GroundTruth ground_truth;

  // closed_train and closed_test recombined.
  Dataset closed_log() const;
};

FeedbackLog generate(const SimConfig& config);

struct SkewSummary {
  double exposure_gini = 0.0;
  // Share of closed-loop interactions on the top 1% most exposed items.
  double head_share = 0.0;
  // Spearman correlation of per-item exposure and closed-loop interaction counts.
  double exposure_interaction_spearman = 0.0;
};

SkewSummary audit_skew(const FeedbackLog& log);

}  // namespace strateval
