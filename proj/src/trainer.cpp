#include "sldml/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace sldml {
namespace {

std::string hex(const unsigned char* bytes, unsigned int n) {
  std::ostringstream out;
  for (unsigned int i = 0; i < n; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(bytes[i]);
  return out.str();
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) throw Error(ErrorCode::IoError, "sha256 init");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    return hex(md, len);
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

bool EpochRecord::same_trajectory(const EpochRecord& o) const {
  return epoch == o.epoch && mean_total_loss == o.mean_total_loss && mean_triplet_loss == o.mean_triplet_loss &&
         mean_ce_loss == o.mean_ce_loss && mined_positive_count == o.mined_positive_count &&
         mined_negative_count == o.mined_negative_count;
}

bool RunHistory::same_trajectory(const RunHistory& o) const {
  if (epochs.size() != o.epochs.size() || lr != o.lr) return false;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (!epochs[i].same_trajectory(o.epochs[i])) return false;
  }
  return true;
}

void RunHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "epoch,total,triplet,ce,pos_pairs,neg_pairs,seconds\n" << std::setprecision(17);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.mean_total_loss << ',' << e.mean_triplet_loss << ',' << e.mean_ce_loss << ','
        << e.mined_positive_count << ',' << e.mined_negative_count << ',' << e.wall_time << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::vector<std::vector<int>> make_batches(std::span<const int> labels, int batch_size, std::uint64_t seed,
                                           int epoch) {
  if (batch_size < 4 || batch_size % 2 != 0) {
    throw Error(ErrorCode::BatchTooSmall, "batch_size must be even and >= 4, got " + std::to_string(batch_size));
  }
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(epoch)};
  std::mt19937_64 rng(seq);

  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(int(i));

  // Per class: shuffled samples cut into consecutive pairs; odd leftovers dropped.
  struct ClassPairs {
    std::vector<int> samples;
    std::size_t next = 0;
    std::size_t remaining() const { return (samples.size() - next) / 2; }
  };
  std::vector<ClassPairs> classes;
  std::size_t total_pairs = 0;
  for (auto& [label, samples] : by_class) {
    std::shuffle(samples.begin(), samples.end(), rng);
    classes.push_back({samples, 0});
    total_pairs += classes.back().remaining();
  }

  const std::size_t pairs_per_batch = std::size_t(batch_size / 2);
  std::vector<std::size_t> order(classes.size());
  std::vector<std::vector<int>> batches;
  while (total_pairs >= pairs_per_batch) {
    std::vector<int> batch;
    batch.reserve(std::size_t(batch_size));
    std::set<int> batch_classes;
    std::size_t taken = 0;
    while (taken < pairs_per_batch) {
      // Classes with the most pairs left first, random order among equals.
      std::iota(order.begin(), order.end(), std::size_t(0));
      std::shuffle(order.begin(), order.end(), rng);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return classes[a].remaining() > classes[b].remaining(); });
      for (std::size_t c : order) {
        if (taken == pairs_per_batch || classes[c].remaining() == 0) break;
        auto& cp = classes[c];
        batch_classes.insert(labels[std::size_t(cp.samples[cp.next])]);
        batch.push_back(cp.samples[cp.next]);
        batch.push_back(cp.samples[cp.next + 1]);
        cp.next += 2;
        ++taken;
        --total_pairs;
      }
    }
    if (batch_classes.size() < 2) break;
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  Sha256 sha;
  char buf[1 << 14];
  while (in) {
    in.read(buf, sizeof(buf));
    if (in.gcount() > 0) sha.update(buf, std::size_t(in.gcount()));
  }
  return sha.finish();
}

std::string text_digest(std::string_view text) {
  Sha256 sha;
  sha.update(text.data(), text.size());
  return sha.finish();
}

const SignalImage& ImageCache::get(const std::string& path, int target_width) {
  auto dit = digests_.find(path);
  if (dit == digests_.end()) dit = digests_.emplace(path, file_digest(path)).first;
  const auto key = std::make_pair(dit->second, target_width);
  auto it = images_.find(key);
  if (it == images_.end()) {
    it = images_.emplace(key, encode(load_signal_csv(path), target_width, path)).first;
  }
  return it->second;
}

TrainResult train_on_images(std::span<const SignalImage> images, std::span<const int> labels,
                            std::vector<std::string> classes, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  if (images.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "images vs labels");
  const int num_labels = cfg.num_labels > 0 ? cfg.num_labels : int(classes.size());
  if (num_labels < int(classes.size())) {
    throw Error(ErrorCode::InvalidConfig, "num_labels " + std::to_string(num_labels) + " is below the " +
                                              std::to_string(classes.size()) + " training classes");
  }

  TrainResult result{init_params(cfg.seed, num_labels), {}, std::move(classes)};
  result.history.lr = cfg.lr;
  auto state = make_opt_state(result.params);

  std::vector<SignalImage> batch_images;
  std::vector<int> batch_labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = make_batches(labels, cfg.batch_size, cfg.seed, epoch);
    if (batches.empty()) {
      throw Error(ErrorCode::InvalidConfig, "batch_size " + std::to_string(cfg.batch_size) +
                                                " leaves no complete class-balanced batch");
    }
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& batch : batches) {
      batch_images.clear();
      batch_labels.clear();
      for (int i : batch) {
        batch_images.push_back(images[std::size_t(i)]);
        batch_labels.push_back(labels[std::size_t(i)]);
      }
      const auto lg = loss_and_grads<double>(result.params, batch_images, batch_labels, cfg);
      rmsprop_step(result.params, lg.grads, state, cfg.lr);
      rec.mean_total_loss += lg.loss.total;
      rec.mean_triplet_loss += lg.loss.triplet;
      rec.mean_ce_loss += lg.loss.cross_entropy;
      rec.mined_positive_count += lg.loss.positive_pairs;
      rec.mined_negative_count += lg.loss.negative_pairs;
    }
    const double n = double(batches.size());
    rec.mean_total_loss /= n;
    rec.mean_triplet_loss /= n;
    rec.mean_ce_loss /= n;
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

TrainResult train(const DatasetManifest& manifest, const ClassSet& aux_classes, const TrainConfig& cfg,
                  ImageCache* cache, const EpochCallback& on_epoch) {
  validate(cfg);
  ImageCache local;
  if (!cache) cache = &local;

  std::vector<std::string> classes(aux_classes.begin(), aux_classes.end());
  ClassMap<int> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index.emplace(classes[i], int(i));

  std::vector<int> counts(classes.size(), 0);
  std::vector<const ManifestEntry*> selected;
  std::vector<int> labels;
  for (const auto& e : manifest.entries) {
    const auto it = index.find(e.label);
    if (it == index.end()) continue;
    selected.push_back(&e);
    labels.push_back(it->second);
    ++counts[std::size_t(it->second)];
  }
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (counts[i] < 2) {
      throw Error(ErrorCode::InsufficientClassSamples,
                  "class " + classes[i] + " has " + std::to_string(counts[i]) + " samples, need >= 2");
    }
  }

  std::vector<SignalImage> images;
  images.reserve(selected.size());
  for (const auto* e : selected) images.push_back(cache->get(e->path, cfg.target_width));
  return train_on_images(images, labels, std::move(classes), cfg, on_epoch);
}

}  // namespace sldml
