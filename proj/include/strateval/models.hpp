#pragma once

// Recommender roster with a uniform fit/score surface.
//
//   BO   seeded random scorer (a per-user random permutation)
//   GA   constant scorer; the ranking tie rule orders by popularity
//   POP  training interaction count
//   MF   biased matrix factorisation, SGD on squared rating error + L2
//   BPR  pairwise logistic ranking, SGD with uniform negative sampling
//   WMF  weighted (implicit) matrix factorisation by alternating least squares

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "strateval/corpus.hpp"

namespace strateval {

enum class Algorithm { BO, GA, POP, MF, BPR, WMF };

std::string_view to_string(Algorithm algorithm) noexcept;
Algorithm parse_algorithm(std::string_view text);
bool is_factor_model(Algorithm algorithm) noexcept;

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::BO, Algorithm::GA,  Algorithm::POP,
                                               Algorithm::MF, Algorithm::BPR, Algorithm::WMF};

struct ModelConfig {
  Algorithm algorithm = Algorithm::POP;
  std::size_t latent_size = 10;
  double learning_rate = 0.01;
  // Passes over the training data; for WMF the number of ALS sweeps.
  std::size_t epochs = 100;
  double regularization = 0.01;
  double confidence_alpha = 40.0;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  // Roster defaults for one algorithm (ALS converges in far fewer sweeps
  // than SGD needs epochs).
  static ModelConfig defaults(Algorithm algorithm, std::size_t latent_size = 10, std::uint64_t seed = 0);

  // "MF-10", "POP", ...
  std::string label() const;
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Scoring identity of a user: index in the model's vocabulary when known,
// plus a stable hash of the external id.
struct UserKey {
  std::optional<std::uint32_t> index;
  std::uint64_t hash = 0;
};

class TrainedModel {
 public:
  const ModelConfig& config() const noexcept { return config_; }
  std::span<const std::string> users() const noexcept { return users_; }
  std::span<const std::string> items() const noexcept { return items_; }
  std::span<const double> popularity() const noexcept { return popularity_; }
  const Matrix& user_factors() const noexcept { return user_factors_; }
  const Matrix& item_factors() const noexcept { return item_factors_; }
  std::span<const double> user_bias() const noexcept { return user_bias_; }
  std::span<const double> item_bias() const noexcept { return item_bias_; }
  double global_mean() const noexcept { return global_mean_; }
  std::string label() const { return config_.label(); }

  UserKey key_for(std::string_view user) const;

  // Scores for every item of items(). Users unknown to a factor model get
  // the popularity scores.
  std::vector<double> score(std::string_view user) const;
  void score_into(const UserKey& user, std::span<double> out) const;

  // Score of an item that never appeared in training.
  double score_unseen_item(const UserKey& user, std::uint64_t item_hash) const;

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;

 private:
  friend TrainedModel fit(const ModelConfig&, const Dataset&);
  friend struct ModelCodec;

  double bo_score(std::uint64_t user_hash, std::uint64_t item_hash) const;

  ModelConfig config_;
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::vector<std::uint64_t> item_hashes_;
  std::vector<double> popularity_;
  Matrix user_factors_;
  Matrix item_factors_;
  std::vector<double> user_bias_;
  std::vector<double> item_bias_;
  double global_mean_ = 0.0;
};

TrainedModel fit(const ModelConfig& config, const Dataset& train);

// One model per (algorithm, latent size) for factor models and one per
// baseline, ordered by algorithm then size. Models train on up to `threads`
// workers; results do not depend on the thread count.
std::vector<TrainedModel> sweep(std::span<const Algorithm> algorithms, std::span<const std::size_t> latent_sizes,
                                const Dataset& train, std::uint64_t seed = 0, std::size_t threads = 1);

// The configurations sweep() would train, in the same order.
std::vector<ModelConfig> sweep_configs(std::span<const Algorithm> algorithms,
                                       std::span<const std::size_t> latent_sizes, std::uint64_t seed = 0);

// Trains each configuration; errors are annotated with the failing label.
std::vector<TrainedModel> fit_all(std::span<const ModelConfig> configs, const Dataset& train, std::size_t threads = 1);

// Versioned JSON container (config, vocabularies, parameters).
void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

}  // namespace strateval
