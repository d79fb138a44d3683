#include "sldml/config.hpp"

#include <cmath>
#include <string>

namespace sldml {

std::string_view miner_mode_name(MinerMode mode) {
  return mode == MinerMode::Standard ? "standard" : "literal-eq3";
}

MinerMode parse_miner_mode(std::string_view name) {
  if (name == "standard") return MinerMode::Standard;
  if (name == "literal-eq3") return MinerMode::LiteralEq3;
  throw Error(ErrorCode::InvalidConfig, "unknown miner_mode '" + std::string(name) + "'");
}

void validate(const TrainConfig& cfg) {
  const auto& w = cfg.weights;
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0; };
  if (!finite_nonneg(w.alpha) || !finite_nonneg(w.beta) || !finite_nonneg(w.delta) || !finite_nonneg(w.epsilon_mine)) {
    throw Error(ErrorCode::InvalidConfig, "loss weights must be finite and >= 0");
  }
  if (!std::isfinite(cfg.lr) || cfg.lr <= 0) throw Error(ErrorCode::InvalidConfig, "lr must be > 0");
  if (cfg.batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch_size must be positive");
  if (cfg.epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be positive");
  if (cfg.target_width < 2) throw Error(ErrorCode::InvalidConfig, "target_width must be >= 2");
  if (cfg.embedding_dim != kEmbeddingDim) throw Error(ErrorCode::InvalidConfig, "embedding_dim is fixed at 128");
  if (cfg.num_labels < 0) throw Error(ErrorCode::InvalidConfig, "num_labels must be >= 0");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {
      {"weights",
       {{"alpha", cfg.weights.alpha},
        {"beta", cfg.weights.beta},
        {"delta", cfg.weights.delta},
        {"epsilon_mine", cfg.weights.epsilon_mine}}},
      {"lr", cfg.lr},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"seed", cfg.seed},
      {"target_width", cfg.target_width},
      {"embedding_dim", cfg.embedding_dim},
      {"num_labels", cfg.num_labels},
      {"miner_mode", std::string(miner_mode_name(cfg.miner_mode))},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "training config must be an object");
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "weights") {
        for (const auto& [wk, wv] : value.items()) {
          if (wk == "alpha") cfg.weights.alpha = wv.get<double>();
          else if (wk == "beta") cfg.weights.beta = wv.get<double>();
          else if (wk == "delta") cfg.weights.delta = wv.get<double>();
          else if (wk == "epsilon_mine") cfg.weights.epsilon_mine = wv.get<double>();
          else throw Error(ErrorCode::InvalidConfig, "unknown key weights." + wk);
        }
      } else if (key == "lr") cfg.lr = value.get<double>();
      else if (key == "batch_size") cfg.batch_size = value.get<int>();
      else if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "target_width") cfg.target_width = value.get<int>();
      else if (key == "embedding_dim") cfg.embedding_dim = value.get<int>();
      else if (key == "num_labels") cfg.num_labels = value.get<int>();
      else if (key == "miner_mode") cfg.miner_mode = parse_miner_mode(value.get<std::string>());
      else throw Error(ErrorCode::InvalidConfig, "unknown key " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  validate(cfg);
  return cfg;
}

}  // namespace sldml
