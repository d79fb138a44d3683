#ifndef SLDML_CONFIG_HPP_
#define SLDML_CONFIG_HPP_

#include <cstdint>

#include <nlohmann/json.hpp>

#include "sldml/metric.hpp"

namespace sldml {

inline constexpr int kEmbeddingDim = 128;
inline constexpr double kPretrainedLearningRate = 1e-6;

struct TrainConfig {
  LossWeights weights;
  double lr = 1e-3;  // desk-scale default; the pretrained-backbone setting is kPretrainedLearningRate
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 0;
  int target_width = 64;
  int embedding_dim = kEmbeddingDim;
  int num_labels = 0;  // 0 = number of auxiliary classes
  MinerMode miner_mode = MinerMode::Standard;
};

/// Throws InvalidConfig on any violated invariant.
void validate(const TrainConfig& cfg);

nlohmann::json to_json(const TrainConfig& cfg);

/// Reads the keys present in `j` over defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace sldml

#endif  // SLDML_CONFIG_HPP_
