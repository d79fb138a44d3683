#ifndef SLDML_TRAINER_HPP_
#define SLDML_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sldml/class_id.hpp"
#include "sldml/config.hpp"
#include "sldml/encoder.hpp"
#include "sldml/micronet.hpp"
#include "sldml/signal_io.hpp"

namespace sldml {

struct EpochRecord {
  int epoch = 0;
  double mean_total_loss = 0;
  double mean_triplet_loss = 0;
  double mean_ce_loss = 0;
  std::size_t mined_positive_count = 0;  // summed over the epoch's batches
  std::size_t mined_negative_count = 0;
  double wall_time = 0;  // seconds

  /// Equality on every field except the wall-clock reading.
  bool same_trajectory(const EpochRecord& other) const;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  double lr = 0;
  double pretrained_lr = kPretrainedLearningRate;

  /// CSV: epoch,total,triplet,ce,pos_pairs,neg_pairs,seconds
  void write_csv(const std::filesystem::path& path) const;
  bool same_trajectory(const RunHistory& other) const;
};

/**
 * Class-balanced sampler with two samples per class: each batch holds
 * batch_size / 2 sample pairs from distinct classes where enough classes
 * remain, otherwise extra pairs are taken from the classes with most pairs
 * left. Pairs that cannot fill a batch are dropped for the epoch.
 */
std::vector<std::vector<int>> make_batches(std::span<const int> labels, int batch_size, std::uint64_t seed, int epoch);

/// SHA-256 of the file contents, hex encoded.
std::string file_digest(const std::filesystem::path& path);

/// SHA-256 of a string, hex encoded.
std::string text_digest(std::string_view text);

/// Encoded images keyed by (file digest, target width).
class ImageCache {
 public:
  const SignalImage& get(const std::string& path, int target_width);
  std::size_t size() const { return images_.size(); }

 private:
  std::map<std::pair<std::string, int>, SignalImage> images_;
  std::map<std::string, std::string> digests_;
};

struct TrainResult {
  ModelParams<double> params;
  RunHistory history;
  std::vector<std::string> classes;  // label index -> class id
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on pre-encoded images with label indices in [0, num_labels).
TrainResult train_on_images(std::span<const SignalImage> images, std::span<const int> labels,
                            std::vector<std::string> classes, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {});

/// Trains on every manifest entry whose label is an auxiliary class.
TrainResult train(const DatasetManifest& manifest, const ClassSet& aux_classes, const TrainConfig& cfg,
                  ImageCache* cache = nullptr, const EpochCallback& on_epoch = {});

struct Checkpoint {
  ModelParams<double> params;  // values exactly representable in 32 bits
  TrainConfig config;
};

inline constexpr char kCheckpointMagic[] = "SLDML1";
inline constexpr int kCheckpointVersion = 1;

/// Container: magic, u64 little-endian header length, JSON header, f32 tensor data.
void save_checkpoint(const ModelParams<double>& params, const TrainConfig& cfg, const std::filesystem::path& path);

/// `expected_num_labels`, when given, must match the stored classifier width.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<int> expected_num_labels = std::nullopt);

}  // namespace sldml

#endif  // SLDML_TRAINER_HPP_
