#pragma once

// Per-user rankings and nDCG@k.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strateval/corpus.hpp"
#include "strateval/models.hpp"

namespace strateval {

// How per-item credits are combined into a per-user value.
enum class Aggregation {
  // Discounted gain sum over the ideal gain: standard nDCG@k.
  ndcg,
  // Mean of the per-item discounted gains over the user's relevant items.
  mean_credit,
};

struct MetricSpec {
  // nullopt ranks the whole candidate list.
  std::optional<std::size_t> cutoff;
  Aggregation aggregation = Aggregation::ndcg;

  // "ndcg@10", "ndcg", "credit@10", ...
  std::string label() const;
  static MetricSpec parse(std::string_view text);
  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

inline constexpr std::size_t kStandardCutoffs[] = {5, 10, 20, 30, 100};

// 1 / log2(rank + 1); rank is 1-based.
double discount(std::size_t rank);

// Joint view of a train/test pair over the union of their vocabularies.
// User and item indices below refer to this union ("universe").
class EvalContext {
 public:
  struct Feedback {
    std::uint32_t item;
    bool relevant;
  };

  EvalContext(const Dataset& train, const Dataset& test, bool exclude_train_items = true);

  const Dataset& train() const noexcept { return train_; }
  const Dataset& test() const noexcept { return test_; }
  std::span<const std::string> users() const noexcept { return users_; }
  std::span<const std::string> items() const noexcept { return items_; }
  bool excludes_train_items() const noexcept { return exclude_train_; }

  // Training interaction count per universe item.
  std::span<const std::uint32_t> train_popularity() const noexcept { return popularity_; }
  // Sorted universe items the user interacted with in training.
  std::span<const std::uint32_t> train_items_of(std::uint32_t user) const noexcept;
  std::span<const Feedback> test_feedback_of(std::uint32_t user) const noexcept;
  // Relevant test items of a user, ascending.
  std::span<const std::uint32_t> relevant_test_items(std::uint32_t user) const noexcept;
  // Universe users with at least one test interaction, ascending.
  std::span<const std::uint32_t> test_users() const noexcept { return test_users_; }

  std::optional<std::uint32_t> user_index(std::string_view id) const;
  std::optional<std::uint32_t> item_index(std::string_view id) const;

 private:
  Dataset train_, test_;
  bool exclude_train_;
  std::vector<std::string> users_, items_;
  std::vector<std::uint32_t> popularity_;
  std::vector<std::uint32_t> train_offsets_, train_items_;
  std::vector<std::uint32_t> test_offsets_;
  std::vector<Feedback> test_feedback_;
  std::vector<std::uint32_t> relevant_offsets_, relevant_items_;
  std::vector<std::uint32_t> test_users_;
};

struct RankedList {
  std::uint32_t user = 0;
  // Candidate items, best first.
  std::vector<std::uint32_t> order;
  // 1-based rank per universe item; 0 marks an excluded (non-candidate) item.
  std::vector<std::uint32_t> rank_of;
};

// Orders the user's candidates by descending score, then descending train
// popularity, then ascending canonical item index. `scores` holds one value
// per universe item.
RankedList rank_by_scores(std::uint32_t user, std::span<const double> scores, const EvalContext& ctx);

// Maps a trained model onto a context's universe and ranks users with it.
class ModelRanker {
 public:
  ModelRanker(const TrainedModel& model, const EvalContext& ctx);
  // Model scores for every universe item.
  void scores(std::uint32_t user, std::span<double> out) const;
  RankedList rank(std::uint32_t user) const;

 private:
  const TrainedModel& model_;
  const EvalContext& ctx_;
  std::vector<std::int64_t> model_item_;  // universe item -> model item, -1 if unseen
  std::vector<std::uint64_t> item_hash_;
};

RankedList build_ranking(const TrainedModel& model, std::uint32_t user, const EvalContext& ctx);

// Sum of discount(rank) over items ranked within the cutoff, each term divided
// by the matching entry of `weights` when that span is non-empty.
double credit_sum(const RankedList& ranked, std::span<const std::uint32_t> items, std::optional<std::size_t> cutoff,
                  std::span<const double> weights = {});

// Ideal discounted gain of `relevant` items under the cutoff.
double ideal_gain(std::size_t relevant, std::optional<std::size_t> cutoff);

// Per-user metric value; nullopt when there are no relevant items.
std::optional<double> ndcg(const RankedList& ranked, std::span<const std::uint32_t> relevant_items,
                           const MetricSpec& spec);

}  // namespace strateval
