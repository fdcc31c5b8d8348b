#include "strateval/models.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "strateval/errors.hpp"
#include "strateval/random.hpp"
#include "strateval/simd/kernels.hpp"

namespace strateval {

std::string_view to_string(Algorithm algorithm) noexcept {
  switch (algorithm) {
    case Algorithm::BO: return "BO";
    case Algorithm::GA: return "GA";
    case Algorithm::POP: return "POP";
    case Algorithm::MF: return "MF";
    case Algorithm::BPR: return "BPR";
    case Algorithm::WMF: return "WMF";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  for (auto a : kAllAlgorithms) {
    if (text == to_string(a)) return a;
  }
  throw ConfigError("unknown algorithm '" + std::string(text) + "' (expected BO, GA, POP, MF, BPR or WMF)");
}

bool is_factor_model(Algorithm algorithm) noexcept {
  return algorithm == Algorithm::MF || algorithm == Algorithm::BPR || algorithm == Algorithm::WMF;
}

ModelConfig ModelConfig::defaults(Algorithm algorithm, std::size_t latent_size, std::uint64_t seed) {
  ModelConfig c;
  c.algorithm = algorithm;
  c.latent_size = latent_size;
  c.seed = seed;
  if (algorithm == Algorithm::WMF) c.epochs = 10;
  return c;
}

std::string ModelConfig::label() const {
  if (!is_factor_model(algorithm)) return std::string(to_string(algorithm));
  return std::string(to_string(algorithm)) + "-" + std::to_string(latent_size);
}

void ModelConfig::validate() const {
  auto finite_positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (is_factor_model(algorithm)) {
    if (latent_size == 0) throw ConfigError(label() + ": latent_size must be positive");
    if (epochs == 0) throw ConfigError(label() + ": epochs must be positive");
    if (!finite_positive(learning_rate)) throw ConfigError(label() + ": learning_rate must be finite and > 0");
    if (!std::isfinite(regularization) || regularization < 0.0) {
      throw ConfigError(label() + ": regularization must be finite and >= 0");
    }
    if (!finite_positive(confidence_alpha)) throw ConfigError(label() + ": confidence_alpha must be finite and > 0");
    if (!finite_positive(init_scale)) throw ConfigError(label() + ": init_scale must be finite and > 0");
  }
}

UserKey TrainedModel::key_for(std::string_view user) const {
  UserKey key;
  key.hash = fnv1a(user);
  const auto it = std::lower_bound(users_.begin(), users_.end(), user);
  if (it != users_.end() && *it == user) key.index = static_cast<std::uint32_t>(it - users_.begin());
  return key;
}

double TrainedModel::bo_score(std::uint64_t user_hash, std::uint64_t item_hash) const {
  const std::uint64_t h = splitmix64(config_.seed ^ splitmix64(user_hash ^ splitmix64(item_hash)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void TrainedModel::score_into(const UserKey& user, std::span<double> out) const {
  const std::size_t n = items_.size();
  switch (config_.algorithm) {
    case Algorithm::BO:
      for (std::size_t i = 0; i < n; ++i) out[i] = bo_score(user.hash, item_hashes_[i]);
      return;
    case Algorithm::GA:
      std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(n), global_mean_);
      return;
    case Algorithm::POP:
      std::copy(popularity_.begin(), popularity_.end(), out.begin());
      return;
    case Algorithm::MF:
    case Algorithm::BPR:
    case Algorithm::WMF:
      break;
  }
  if (!user.index) {
    std::copy(popularity_.begin(), popularity_.end(), out.begin());
    return;
  }
  const auto u = *user.index;
  simd::active().gemv(item_factors_.data().data(), n, item_factors_.cols(), user_factors_.row(u).data(), out.data());
  if (config_.algorithm == Algorithm::MF) {
    const double base = global_mean_ + user_bias_[u];
    for (std::size_t i = 0; i < n; ++i) out[i] += base + item_bias_[i];
  } else if (config_.algorithm == Algorithm::BPR) {
    for (std::size_t i = 0; i < n; ++i) out[i] += item_bias_[i];
  }
}

std::vector<double> TrainedModel::score(std::string_view user) const {
  std::vector<double> out(items_.size());
  score_into(key_for(user), out);
  return out;
}

double TrainedModel::score_unseen_item(const UserKey& user, std::uint64_t item_hash) const {
  switch (config_.algorithm) {
    case Algorithm::BO: return bo_score(user.hash, item_hash);
    case Algorithm::GA: return global_mean_;
    case Algorithm::POP: return 0.0;
    case Algorithm::MF: return user.index ? global_mean_ + user_bias_[*user.index] : 0.0;
    case Algorithm::BPR:
    case Algorithm::WMF: return 0.0;
  }
  return 0.0;
}

namespace {

void fill_normal(Matrix& m, Rng& rng, double scale) {
  for (auto& v : m.data()) v = scale * rng.normal();
}

void check_finite(double loss, const ModelConfig& config, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw NumericalError(config.label() + ": non-finite training loss at epoch " + std::to_string(epoch + 1));
  }
}

void train_mf(const ModelConfig& cfg, const Dataset& train, Matrix& P, Matrix& Q, std::vector<double>& bu,
              std::vector<double>& bi, double& mu) {
  const auto data = train.interactions();
  Rng rng(cfg.seed);
  fill_normal(P, rng, cfg.init_scale);
  fill_normal(Q, rng, cfg.init_scale);
  double total = 0.0;
  for (const auto& x : data) total += x.rating;
  mu = total / static_cast<double>(data.size());

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> p_old(cfg.latent_size);
  const double lr = cfg.learning_rate, reg = cfg.regularization, shrink = 1.0 - lr * reg;
  const auto& k = simd::active();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss = 0.0;
    for (std::size_t idx : order) {
      const auto& x = data[idx];
      auto p = P.row(x.user);
      auto q = Q.row(x.item);
      const double pred = mu + bu[x.user] + bi[x.item] + k.dot(p.data(), q.data(), p.size());
      const double err = x.rating - pred;
      loss += err * err;
      bu[x.user] += lr * (err - reg * bu[x.user]);
      bi[x.item] += lr * (err - reg * bi[x.item]);
      std::copy(p.begin(), p.end(), p_old.begin());
      k.axpby(lr * err, q.data(), shrink, p.data(), p.size());
      k.axpby(lr * err, p_old.data(), shrink, q.data(), q.size());
    }
    check_finite(loss, cfg, epoch);
  }
}

void train_bpr(const ModelConfig& cfg, const Dataset& train, Matrix& P, Matrix& Q, std::vector<double>& bi) {
  const auto data = train.interactions();
  std::vector<std::size_t> positives;
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data[r].relevant) positives.push_back(r);
  }
  if (positives.empty()) throw DataError(cfg.label() + ": no relevant interactions to learn from");

  Rng rng(cfg.seed);
  fill_normal(P, rng, cfg.init_scale);
  fill_normal(Q, rng, cfg.init_scale);
  const std::size_t n_items = train.items().size();
  std::vector<double> p_old(cfg.latent_size);
  const double lr = cfg.learning_rate, reg = cfg.regularization, shrink = 1.0 - lr * reg;
  const auto& k = simd::active();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(positives));
    double loss = 0.0;
    for (std::size_t idx : positives) {
      const auto& x = data[idx];
      const auto seen = train.interactions_of(x.user);
      if (seen.size() >= n_items) continue;
      std::uint32_t neg;
      do {
        neg = static_cast<std::uint32_t>(rng.below(n_items));
      } while (std::binary_search(seen.begin(), seen.end(), Interaction{x.user, neg, 0, false},
                                  [](const Interaction& a, const Interaction& b) { return a.item < b.item; }));
      auto p = P.row(x.user);
      auto qi = Q.row(x.item);
      auto qj = Q.row(neg);
      const double margin =
          bi[x.item] - bi[neg] + k.dot(p.data(), qi.data(), p.size()) - k.dot(p.data(), qj.data(), p.size());
      // d/dmargin of ln sigmoid(margin)
      const double g = 1.0 / (1.0 + std::exp(margin));
      loss += margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
      std::copy(p.begin(), p.end(), p_old.begin());
      k.axpby(lr * g, qi.data(), shrink, p.data(), p.size());
      k.axpy(-lr * g, qj.data(), p.data(), p.size());
      k.axpby(lr * g, p_old.data(), shrink, qi.data(), qi.size());
      k.axpby(-lr * g, p_old.data(), shrink, qj.data(), qj.size());
      bi[x.item] += lr * (g - reg * bi[x.item]);
      bi[neg] += lr * (-g - reg * bi[neg]);
    }
    check_finite(loss, cfg, epoch);
  }
}

struct Observation {
  std::uint32_t other;
  double preference;
  double confidence;
};

// Solves (G + sum (c-1) y y^T + reg I) x = sum c p y for every row of `solve`.
// The observed part is one rank-n update over the gathered rows sqrt(c-1) y.
void als_half_sweep(const std::vector<std::vector<Observation>>& observed, const Matrix& fixed, Matrix& solve,
                    double reg, const ModelConfig& cfg, std::size_t epoch) {
  const std::size_t f = fixed.cols();
  const auto fi = static_cast<Eigen::Index>(f);
  const auto& k = simd::active();
  std::vector<double> gram(f * f, 0.0);
  for (std::size_t r = 0; r < fixed.rows(); ++r) k.syr(1.0, fixed.row(r).data(), gram.data(), f);

  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> G(gram.data(), fi, fi);
  std::size_t widest = 0;
  for (const auto& obs : observed) widest = std::max(widest, obs.size());
  RowMajor gathered(static_cast<Eigen::Index>(widest), fi);
  Eigen::MatrixXd a(fi, fi);
  std::vector<double> b(f);
  Eigen::LLT<Eigen::MatrixXd> llt(fi);
  for (std::size_t r = 0; r < solve.rows(); ++r) {
    const auto& obs = observed[r];
    std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t j = 0; j < obs.size(); ++j) {
      const double* y = fixed.row(obs[j].other).data();
      const double w = std::sqrt(obs[j].confidence - 1.0);
      double* dst = gathered.row(static_cast<Eigen::Index>(j)).data();
      for (std::size_t d = 0; d < f; ++d) dst[d] = w * y[d];
      if (obs[j].preference != 0.0) k.axpy(obs[j].confidence * obs[j].preference, y, b.data(), f);
    }
    a = G;
    a.diagonal().array() += reg;
    if (!obs.empty()) {
      a.selfadjointView<Eigen::Lower>().rankUpdate(gathered.topRows(static_cast<Eigen::Index>(obs.size())).transpose());
    }
    llt.compute(a);
    if (llt.info() != Eigen::Success) {
      throw NumericalError(cfg.label() + ": normal equations not positive definite at epoch " +
                           std::to_string(epoch + 1));
    }
    const Eigen::VectorXd x = llt.solve(Eigen::Map<const Eigen::VectorXd>(b.data(), fi));
    auto dst = solve.row(r);
    for (std::size_t d = 0; d < f; ++d) dst[d] = x[static_cast<Eigen::Index>(d)];
  }
}

void train_wmf(const ModelConfig& cfg, const Dataset& train, Matrix& P, Matrix& Q) {
  const std::size_t n_users = train.users().size(), n_items = train.items().size();
  std::vector<std::vector<Observation>> by_user(n_users), by_item(n_items);
  const double confidence = 1.0 + cfg.confidence_alpha;
  for (const auto& x : train.interactions()) {
    const double pref = x.relevant ? 1.0 : 0.0;
    by_user[x.user].push_back({x.item, pref, confidence});
    by_item[x.item].push_back({x.user, pref, confidence});
  }
  Rng rng(cfg.seed);
  fill_normal(Q, rng, cfg.init_scale);
  // Keep the system positive definite even when reg == 0.
  const double reg = std::max(cfg.regularization, 1e-8);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    als_half_sweep(by_user, Q, P, reg, cfg, epoch);
    als_half_sweep(by_item, P, Q, reg, cfg, epoch);
    double norm = 0.0;
    for (double v : P.data()) norm += v * v;
    for (double v : Q.data()) norm += v * v;
    check_finite(norm, cfg, epoch);
  }
}

}  // namespace

TrainedModel fit(const ModelConfig& config, const Dataset& train) {
  config.validate();
  if (train.empty()) throw DataError(config.label() + ": training set is empty");
  TrainedModel m;
  m.config_ = config;
  m.users_.assign(train.users().begin(), train.users().end());
  m.items_.assign(train.items().begin(), train.items().end());
  m.item_hashes_.reserve(m.items_.size());
  for (const auto& id : m.items_) m.item_hashes_.push_back(fnv1a(id));
  m.popularity_.assign(train.item_counts().begin(), train.item_counts().end());

  double rating_sum = 0.0;
  for (const auto& x : train.interactions()) rating_sum += x.rating;
  m.global_mean_ = rating_sum / static_cast<double>(train.size());

  if (!is_factor_model(config.algorithm)) return m;

  const std::size_t f = config.latent_size;
  m.user_factors_ = Matrix(m.users_.size(), f);
  m.item_factors_ = Matrix(m.items_.size(), f);
  switch (config.algorithm) {
    case Algorithm::MF:
      m.user_bias_.assign(m.users_.size(), 0.0);
      m.item_bias_.assign(m.items_.size(), 0.0);
      train_mf(config, train, m.user_factors_, m.item_factors_, m.user_bias_, m.item_bias_, m.global_mean_);
      break;
    case Algorithm::BPR:
      m.item_bias_.assign(m.items_.size(), 0.0);
      train_bpr(config, train, m.user_factors_, m.item_factors_, m.item_bias_);
      break;
    case Algorithm::WMF:
      train_wmf(config, train, m.user_factors_, m.item_factors_);
      break;
    default:
      break;
  }
  return m;
}

std::vector<ModelConfig> sweep_configs(std::span<const Algorithm> algorithms,
                                       std::span<const std::size_t> latent_sizes, std::uint64_t seed) {
  std::vector<Algorithm> algos(algorithms.begin(), algorithms.end());
  std::sort(algos.begin(), algos.end());
  algos.erase(std::unique(algos.begin(), algos.end()), algos.end());
  std::vector<std::size_t> sizes(latent_sizes.begin(), latent_sizes.end());
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  std::vector<ModelConfig> out;
  for (auto a : algos) {
    if (!is_factor_model(a)) {
      out.push_back(ModelConfig::defaults(a, 0, seed));
      continue;
    }
    for (auto s : sizes) out.push_back(ModelConfig::defaults(a, s, seed));
  }
  return out;
}

std::vector<TrainedModel> fit_all(std::span<const ModelConfig> configs, const Dataset& train, std::size_t threads) {
  std::vector<std::optional<TrainedModel>> slots(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        slots[i] = fit(configs[i], train);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(configs.size(), 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      const std::string what = e.what();
      if (what.rfind(configs[i].label(), 0) == 0) throw;
      throw Error(e.code(), configs[i].label() + ": " + what);
    }
  }
  std::vector<TrainedModel> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<TrainedModel> sweep(std::span<const Algorithm> algorithms, std::span<const std::size_t> latent_sizes,
                                const Dataset& train, std::uint64_t seed, std::size_t threads) {
  const auto configs = sweep_configs(algorithms, latent_sizes, seed);
  return fit_all(configs, train, threads);
}

}  // namespace strateval
