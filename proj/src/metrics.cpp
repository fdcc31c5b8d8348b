#include "strateval/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "strateval/errors.hpp"
#include "strateval/random.hpp"

namespace strateval {

std::string MetricSpec::label() const {
  std::string base = aggregation == Aggregation::ndcg ? "ndcg" : "credit";
  if (cutoff) base += "@" + std::to_string(*cutoff);
  return base;
}

MetricSpec MetricSpec::parse(std::string_view text) {
  MetricSpec spec;
  const auto at = text.find('@');
  const std::string_view name = text.substr(0, at);
  if (name == "ndcg") spec.aggregation = Aggregation::ndcg;
  else if (name == "credit") spec.aggregation = Aggregation::mean_credit;
  else throw ConfigError("unknown metric '" + std::string(text) + "' (expected ndcg[@k] or credit[@k])");
  if (at != std::string_view::npos) {
    const std::string_view k = text.substr(at + 1);
    std::size_t value = 0;
    const auto [end, ec] = std::from_chars(k.data(), k.data() + k.size(), value);
    if (ec != std::errc{} || end != k.data() + k.size() || value == 0) {
      throw ConfigError("metric cutoff must be a positive integer in '" + std::string(text) + "'");
    }
    spec.cutoff = value;
  }
  return spec;
}

double discount(std::size_t rank) { return 1.0 / std::log2(static_cast<double>(rank) + 1.0); }

namespace {

std::vector<std::string> union_sorted(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::string> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<std::uint32_t> remap(std::span<const std::string> from, const std::vector<std::string>& to) {
  std::vector<std::uint32_t> out(from.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    while (to[j] != from[i]) ++j;
    out[i] = static_cast<std::uint32_t>(j);
  }
  return out;
}

std::optional<std::uint32_t> find_sorted(const std::vector<std::string>& vocab, std::string_view id) {
  const auto it = std::lower_bound(vocab.begin(), vocab.end(), id);
  if (it == vocab.end() || *it != id) return std::nullopt;
  return static_cast<std::uint32_t>(it - vocab.begin());
}

}  // namespace

EvalContext::EvalContext(const Dataset& train, const Dataset& test, bool exclude_train_items)
    : train_(train), test_(test), exclude_train_(exclude_train_items) {
  users_ = union_sorted(train.users(), test.users());
  items_ = union_sorted(train.items(), test.items());
  const auto train_user = remap(train.users(), users_);
  const auto train_item = remap(train.items(), items_);
  const auto test_user = remap(test.users(), users_);
  const auto test_item = remap(test.items(), items_);

  popularity_.assign(items_.size(), 0);
  for (std::size_t i = 0; i < train.items().size(); ++i) popularity_[train_item[i]] = train.item_counts()[i];

  const std::size_t n_users = users_.size();
  // Both datasets are sorted by (user, item) and the remaps are monotone, so
  // per-user item lists come out ascending.
  train_offsets_.assign(n_users + 1, 0);
  for (const auto& x : train.interactions()) ++train_offsets_[train_user[x.user] + 1];
  std::partial_sum(train_offsets_.begin(), train_offsets_.end(), train_offsets_.begin());
  train_items_.resize(train.size());
  {
    std::vector<std::uint32_t> cursor(train_offsets_.begin(), train_offsets_.end() - 1);
    for (const auto& x : train.interactions()) train_items_[cursor[train_user[x.user]]++] = train_item[x.item];
  }

  test_offsets_.assign(n_users + 1, 0);
  relevant_offsets_.assign(n_users + 1, 0);
  for (const auto& x : test.interactions()) {
    ++test_offsets_[test_user[x.user] + 1];
    if (x.relevant) ++relevant_offsets_[test_user[x.user] + 1];
  }
  std::partial_sum(test_offsets_.begin(), test_offsets_.end(), test_offsets_.begin());
  std::partial_sum(relevant_offsets_.begin(), relevant_offsets_.end(), relevant_offsets_.begin());
  test_feedback_.resize(test.size());
  relevant_items_.resize(relevant_offsets_.back());
  {
    std::vector<std::uint32_t> cursor(test_offsets_.begin(), test_offsets_.end() - 1);
    std::vector<std::uint32_t> rel_cursor(relevant_offsets_.begin(), relevant_offsets_.end() - 1);
    for (const auto& x : test.interactions()) {
      const auto u = test_user[x.user];
      test_feedback_[cursor[u]++] = {test_item[x.item], x.relevant};
      if (x.relevant) relevant_items_[rel_cursor[u]++] = test_item[x.item];
    }
  }
  for (std::uint32_t u = 0; u < n_users; ++u) {
    if (test_offsets_[u + 1] > test_offsets_[u]) test_users_.push_back(u);
  }
}

std::span<const std::uint32_t> EvalContext::train_items_of(std::uint32_t user) const noexcept {
  return std::span(train_items_).subspan(train_offsets_[user], train_offsets_[user + 1] - train_offsets_[user]);
}

std::span<const EvalContext::Feedback> EvalContext::test_feedback_of(std::uint32_t user) const noexcept {
  return std::span(test_feedback_).subspan(test_offsets_[user], test_offsets_[user + 1] - test_offsets_[user]);
}

std::span<const std::uint32_t> EvalContext::relevant_test_items(std::uint32_t user) const noexcept {
  return std::span(relevant_items_)
      .subspan(relevant_offsets_[user], relevant_offsets_[user + 1] - relevant_offsets_[user]);
}

std::optional<std::uint32_t> EvalContext::user_index(std::string_view id) const { return find_sorted(users_, id); }
std::optional<std::uint32_t> EvalContext::item_index(std::string_view id) const { return find_sorted(items_, id); }

RankedList rank_by_scores(std::uint32_t user, std::span<const double> scores, const EvalContext& ctx) {
  const std::size_t n = ctx.items().size();
  if (scores.size() != n) throw DataError("score vector does not match the item universe");
  RankedList out;
  out.user = user;
  out.rank_of.assign(n, 0);
  out.order.reserve(n);
  const auto excluded = ctx.excludes_train_items() ? ctx.train_items_of(user) : std::span<const std::uint32_t>{};
  std::size_t e = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (e < excluded.size() && excluded[e] == i) {
      ++e;
      continue;
    }
    out.order.push_back(i);
  }
  const auto pop = ctx.train_popularity();
  std::sort(out.order.begin(), out.order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (pop[a] != pop[b]) return pop[a] > pop[b];
    return a < b;
  });
  for (std::size_t r = 0; r < out.order.size(); ++r) out.rank_of[out.order[r]] = static_cast<std::uint32_t>(r + 1);
  return out;
}

ModelRanker::ModelRanker(const TrainedModel& model, const EvalContext& ctx) : model_(model), ctx_(ctx) {
  const auto items = ctx.items();
  model_item_.assign(items.size(), -1);
  item_hash_.resize(items.size());
  const auto model_items = model.items();
  std::size_t j = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    item_hash_[i] = fnv1a(items[i]);
    while (j < model_items.size() && model_items[j] < items[i]) ++j;
    if (j < model_items.size() && model_items[j] == items[i]) model_item_[i] = static_cast<std::int64_t>(j);
  }
}

void ModelRanker::scores(std::uint32_t user, std::span<double> out) const {
  const UserKey key = model_.key_for(ctx_.users()[user]);
  std::vector<double> model_scores(model_.items().size());
  model_.score_into(key, model_scores);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = model_item_[i] >= 0 ? model_scores[static_cast<std::size_t>(model_item_[i])]
                                 : model_.score_unseen_item(key, item_hash_[i]);
  }
}

RankedList ModelRanker::rank(std::uint32_t user) const {
  std::vector<double> universe_scores(ctx_.items().size());
  scores(user, universe_scores);
  return rank_by_scores(user, universe_scores, ctx_);
}

RankedList build_ranking(const TrainedModel& model, std::uint32_t user, const EvalContext& ctx) {
  return ModelRanker(model, ctx).rank(user);
}

double credit_sum(const RankedList& ranked, std::span<const std::uint32_t> items, std::optional<std::size_t> cutoff,
                  std::span<const double> weights) {
  double sum = 0.0;
  for (std::size_t j = 0; j < items.size(); ++j) {
    const std::uint32_t rank = ranked.rank_of[items[j]];
    if (rank == 0) continue;
    if (cutoff && rank > *cutoff) continue;
    const double gain = discount(rank);
    sum += weights.empty() ? gain : gain / weights[j];
  }
  return sum;
}

double ideal_gain(std::size_t relevant, std::optional<std::size_t> cutoff) {
  const std::size_t m = cutoff ? std::min(*cutoff, relevant) : relevant;
  double sum = 0.0;
  for (std::size_t j = 1; j <= m; ++j) sum += discount(j);
  return sum;
}

std::optional<double> ndcg(const RankedList& ranked, std::span<const std::uint32_t> relevant_items,
                           const MetricSpec& spec) {
  if (relevant_items.empty()) return std::nullopt;
  const double gain = credit_sum(ranked, relevant_items, spec.cutoff);
  if (spec.aggregation == Aggregation::mean_credit) return gain / static_cast<double>(relevant_items.size());
  return gain / ideal_gain(relevant_items.size(), spec.cutoff);
}

}  // namespace strateval
