#include "strateval/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "strateval/errors.hpp"
#include "strateval/random.hpp"
#include "strateval/simd/kernels.hpp"
#include "strateval/stats.hpp"

namespace strateval {

std::string_view to_string(Policy policy) noexcept {
  switch (policy) {
    case Policy::popularity_biased: return "popularity_biased";
    case Policy::trained_mf: return "trained_mf";
    case Policy::uniform_random: return "uniform_random";
  }
  return "?";
}

Policy parse_policy(std::string_view text) {
  if (text == "popularity_biased") return Policy::popularity_biased;
  if (text == "trained_mf") return Policy::trained_mf;
  if (text == "uniform_random") return Policy::uniform_random;
  throw ConfigError("unknown policy '" + std::string(text) +
                    "' (expected popularity_biased, trained_mf or uniform_random)");
}

void SimConfig::validate() const {
  if (n_users == 0 || n_items == 0) throw ConfigError("n_users and n_items must be positive");
  if (true_rank == 0) throw ConfigError("true_rank must be positive");
  if (sessions == 0) throw ConfigError("sessions must be positive");
  if (exposure_budget == 0) throw ConfigError("exposure_budget must be positive");
  if (exposure_budget > n_items) {
    throw ConfigError("exposure_budget (" + std::to_string(exposure_budget) + ") exceeds n_items (" +
                      std::to_string(n_items) + ")");
  }
  if (!(interact_noise >= 0.0 && interact_noise <= 1.0)) throw ConfigError("interact_noise must lie in [0, 1]");
  if (!(relevance_quantile > 0.0 && relevance_quantile < 1.0)) {
    throw ConfigError("relevance_quantile must lie in (0, 1)");
  }
  if (!(popularity_exponent >= 0.0) || !std::isfinite(popularity_exponent)) {
    throw ConfigError("popularity_exponent must be finite and >= 0");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
}

Dataset FeedbackLog::closed_log() const {
  const Dataset parts[] = {closed_train, closed_test};
  return merge(parts);
}

namespace {

// Independent stream per generation stage.
enum Stream : std::uint64_t { kTruth = 1, kPolicy, kNoise, kSplit, kOpen, kBootstrap };

Rng stream(std::uint64_t seed, Stream s) { return Rng(splitmix64(seed) ^ splitmix64(0x5157'0000ULL + s)); }

std::vector<std::string> make_ids(char prefix, std::size_t n) {
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::string digits = std::to_string(i);
    ids[i] = std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
  }
  return ids;
}

GroundTruth make_truth(const SimConfig& c, Rng& rng) {
  GroundTruth g;
  g.n_items = c.n_items;
  g.user_factors = Matrix(c.n_users, c.true_rank);
  g.item_factors = Matrix(c.n_items, c.true_rank);
  for (double& v : g.user_factors.data()) v = rng.normal();
  for (double& v : g.item_factors.data()) v = rng.normal();
  const auto& k = simd::active();
  const auto n_relevant =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c.relevance_quantile * static_cast<double>(c.n_items))));
  g.relevant.assign(c.n_users * c.n_items, 0);
  std::vector<double> affinity(c.n_items);
  std::vector<std::uint32_t> order(c.n_items);
  for (std::size_t u = 0; u < c.n_users; ++u) {
    k.gemv(g.item_factors.data().data(), c.n_items, c.true_rank, g.user_factors.row(u).data(), affinity.data());
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_relevant), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (affinity[a] != affinity[b]) return affinity[a] > affinity[b];
                        return a < b;
                      });
    for (std::size_t j = 0; j < n_relevant; ++j) g.relevant[u * c.n_items + order[j]] = 1;
  }
  return g;
}

int draw_rating(bool relevant, double noise, Rng& rng) {
  const bool flip = noise > 0.0 && rng.uniform() < noise;
  return (relevant != flip) ? kMaxRating : 1;
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys).
void sample_weighted(std::span<const double> weights, std::size_t k, Rng& rng, std::vector<std::uint32_t>& out) {
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (std::uint32_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) continue;
    double u = rng.uniform();
    while (u == 0.0) u = rng.uniform();
    const double key = std::log(u) / weights[i];
    if (heap.size() < k) heap.emplace(key, i);
    else if (key > heap.top().first) {
      heap.pop();
      heap.emplace(key, i);
    }
  }
  out.clear();
  while (!heap.empty()) {
    out.push_back(heap.top().second);
    heap.pop();
  }
  std::sort(out.begin(), out.end());
}

void sample_uniform(std::size_t n, std::size_t k, Rng& rng, std::vector<std::uint32_t>& out) {
  std::vector<std::uint32_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
  out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
}

// Scores of the uniform-bootstrap MF policy, one row per user.
std::vector<double> bootstrap_policy_scores(const SimConfig& c, const GroundTruth& truth,
                                            const std::vector<std::string>& users,
                                            const std::vector<std::string>& items) {
  Rng rng = stream(c.seed, kBootstrap);
  std::vector<RawRecord> records;
  std::vector<std::uint32_t> slate;
  for (std::size_t u = 0; u < c.n_users; ++u) {
    sample_uniform(c.n_items, c.exposure_budget, rng, slate);
    for (auto i : slate) records.push_back({users[u], items[i], draw_rating(truth.is_relevant(u, i), c.interact_noise, rng)});
  }
  const auto data = Dataset::from_records(records, LoopKind::open);
  auto cfg = ModelConfig::defaults(Algorithm::MF, c.true_rank, c.seed);
  cfg.epochs = 50;
  const auto model = fit(cfg, data);
  std::vector<double> scores(c.n_users * c.n_items, 0.0);
  for (std::size_t u = 0; u < c.n_users; ++u) {
    const auto s = model.score(users[u]);
    const auto model_items = model.items();
    const auto key = model.key_for(users[u]);
    for (std::size_t i = 0, j = 0; i < c.n_items; ++i) {
      while (j < model_items.size() && model_items[j] < items[i]) ++j;
      scores[u * c.n_items + i] = (j < model_items.size() && model_items[j] == items[i])
                                      ? s[j]
                                      : model.score_unseen_item(key, fnv1a(items[i]));
    }
  }
  return scores;
}

}  // namespace

FeedbackLog generate(const SimConfig& config) {
  config.validate();
  const auto& c = config;
  FeedbackLog log;
  log.config = c;
  log.user_ids = make_ids('u', c.n_users);
  log.item_ids = make_ids('i', c.n_items);
  {
    Rng truth_rng = stream(c.seed, kTruth);
    log.ground_truth = make_truth(c, truth_rng);
  }
  const auto& truth = log.ground_truth;

  std::vector<double> policy_scores;
  if (c.deployed_policy == Policy::trained_mf) policy_scores = bootstrap_policy_scores(c, truth, log.user_ids, log.item_ids);

  Rng policy_rng = stream(c.seed, kPolicy);
  Rng noise_rng = stream(c.seed, kNoise);
  log.exposure_counts.assign(c.n_items, 0);
  log.exposed.assign(c.n_users, {});
  std::vector<std::uint64_t> interaction_counts(c.n_items, 0);
  std::vector<double> weights(c.n_items);
  std::vector<RawRecord> closed;
  std::vector<std::uint32_t> slate, candidates;
  for (std::size_t s = 0; s < c.sessions; ++s) {
    for (std::size_t u = 0; u < c.n_users; ++u) {
      auto& seen = log.exposed[u];
      switch (c.deployed_policy) {
        case Policy::uniform_random: sample_uniform(c.n_items, c.exposure_budget, policy_rng, slate); break;
        case Policy::popularity_biased:
          for (std::size_t i = 0; i < c.n_items; ++i) {
            weights[i] = std::pow(static_cast<double>(interaction_counts[i]) + 1.0, c.popularity_exponent);
          }
          sample_weighted(weights, c.exposure_budget, policy_rng, slate);
          break;
        case Policy::trained_mf: {
          // Best-scored items not shown before; falls back to repeats once exhausted.
          candidates.clear();
          for (std::uint32_t i = 0; i < c.n_items; ++i) {
            if (!std::binary_search(seen.begin(), seen.end(), i)) candidates.push_back(i);
          }
          if (candidates.size() < c.exposure_budget) {
            candidates.resize(c.n_items);
            std::iota(candidates.begin(), candidates.end(), 0u);
          }
          const double* row = policy_scores.data() + u * c.n_items;
          std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(c.exposure_budget),
                            candidates.end(), [&](std::uint32_t a, std::uint32_t b) {
                              if (row[a] != row[b]) return row[a] > row[b];
                              return a < b;
                            });
          slate.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(c.exposure_budget));
          std::sort(slate.begin(), slate.end());
          break;
        }
      }
      for (auto i : slate) {
        ++log.exposure_counts[i];
        const auto pos = std::lower_bound(seen.begin(), seen.end(), i);
        if (pos == seen.end() || *pos != i) {
          seen.insert(pos, i);
          ++interaction_counts[i];
        }
        closed.push_back({log.user_ids[u], log.item_ids[i], draw_rating(truth.is_relevant(u, i), c.interact_noise, noise_rng)});
      }
    }
  }
  const auto closed_data = Dataset::from_records(closed, LoopKind::closed);
  auto split = split_holdout(closed_data, c.split_ratio, splitmix64(c.seed ^ kSplit));
  log.closed_train = std::move(split.train);
  log.closed_test = std::move(split.test);

  Rng open_rng = stream(c.seed, kOpen);
  std::vector<RawRecord> open;
  for (std::size_t u = 0; u < c.n_users; ++u) {
    sample_uniform(c.n_items, c.exposure_budget, open_rng, slate);
    for (auto i : slate) {
      open.push_back({log.user_ids[u], log.item_ids[i], draw_rating(truth.is_relevant(u, i), c.interact_noise, open_rng)});
    }
  }
  log.open_test = Dataset::from_records(open, LoopKind::open);
  return log;
}

SkewSummary audit_skew(const FeedbackLog& log) {
  SkewSummary out;
  if (log.exposure_counts.empty()) return out;
  std::vector<double> exposure(log.exposure_counts.begin(), log.exposure_counts.end());
  const double total_exposure = std::accumulate(exposure.begin(), exposure.end(), 0.0);
  if (total_exposure == 0.0) return out;
  out.exposure_gini = gini(exposure);

  std::vector<double> interactions(exposure.size(), 0.0);
  double total = 0.0;
  for (const Dataset* d : {&log.closed_train, &log.closed_test}) {
    for (std::size_t i = 0; i < d->items().size(); ++i) {
      const auto it = std::lower_bound(log.item_ids.begin(), log.item_ids.end(), d->items()[i]);
      if (it == log.item_ids.end() || *it != d->items()[i]) continue;
      interactions[static_cast<std::size_t>(it - log.item_ids.begin())] += d->item_counts()[i];
      total += d->item_counts()[i];
    }
  }
  if (total == 0.0) return out;

  std::vector<std::uint32_t> order(exposure.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return exposure[a] > exposure[b]; });
  const auto head = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(exposure.size()))));
  double head_total = 0.0;
  for (std::size_t j = 0; j < head; ++j) head_total += interactions[order[j]];
  out.head_share = head_total / total;
  if (exposure.size() >= 2) out.exposure_interaction_spearman = spearman(exposure, interactions);
  return out;
}

}  // namespace strateval
