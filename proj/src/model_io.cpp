#include <fstream>
#include <json.hpp>

#include "strateval/errors.hpp"
#include "strateval/models.hpp"
#include "strateval/random.hpp"

namespace strateval {

namespace {
constexpr int kModelFormatVersion = 1;
constexpr const char* kModelFormatName = "strateval-model";

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.data().size()) throw DataError("model matrix has wrong number of entries");
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}
}  // namespace

struct ModelCodec {
  static nlohmann::json encode(const TrainedModel& m) {
    const auto& c = m.config_;
    return {
        {"format", kModelFormatName},
        {"version", kModelFormatVersion},
        {"config",
         {{"algorithm", to_string(c.algorithm)},
          {"latent_size", c.latent_size},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"regularization", c.regularization},
          {"confidence_alpha", c.confidence_alpha},
          {"init_scale", c.init_scale},
          {"seed", c.seed}}},
        {"users", m.users_},
        {"items", m.items_},
        {"popularity", m.popularity_},
        {"user_factors", matrix_to_json(m.user_factors_)},
        {"item_factors", matrix_to_json(m.item_factors_)},
        {"user_bias", m.user_bias_},
        {"item_bias", m.item_bias_},
        {"global_mean", m.global_mean_},
    };
  }

  static TrainedModel decode(const nlohmann::json& j) {
    if (j.value("format", "") != kModelFormatName) throw DataError("not a strateval model file");
    if (j.value("version", 0) != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(j.value("version", 0)));
    }
    TrainedModel m;
    const auto& c = j.at("config");
    m.config_.algorithm = parse_algorithm(c.at("algorithm").get<std::string>());
    m.config_.latent_size = c.at("latent_size").get<std::size_t>();
    m.config_.learning_rate = c.at("learning_rate").get<double>();
    m.config_.epochs = c.at("epochs").get<std::size_t>();
    m.config_.regularization = c.at("regularization").get<double>();
    m.config_.confidence_alpha = c.at("confidence_alpha").get<double>();
    m.config_.init_scale = c.at("init_scale").get<double>();
    m.config_.seed = c.at("seed").get<std::uint64_t>();
    m.users_ = j.at("users").get<std::vector<std::string>>();
    m.items_ = j.at("items").get<std::vector<std::string>>();
    for (const auto& id : m.items_) m.item_hashes_.push_back(fnv1a(id));
    m.popularity_ = j.at("popularity").get<std::vector<double>>();
    m.user_factors_ = matrix_from_json(j.at("user_factors"));
    m.item_factors_ = matrix_from_json(j.at("item_factors"));
    m.user_bias_ = j.at("user_bias").get<std::vector<double>>();
    m.item_bias_ = j.at("item_bias").get<std::vector<double>>();
    m.global_mean_ = j.at("global_mean").get<double>();
    if (m.popularity_.size() != m.items_.size()) throw DataError("model popularity table does not match items");
    if (is_factor_model(m.config_.algorithm) &&
        (m.user_factors_.rows() != m.users_.size() || m.item_factors_.rows() != m.items_.size() ||
         m.user_factors_.cols() != m.config_.latent_size || m.item_factors_.cols() != m.config_.latent_size)) {
      throw DataError("model factor shapes do not match its vocabularies");
    }
    return m;
  }
};

void save_model(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << ModelCodec::encode(model).dump() << '\n';
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return ModelCodec::decode(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace strateval
