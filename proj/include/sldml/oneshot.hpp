#ifndef SLDML_ONESHOT_HPP_
#define SLDML_ONESHOT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "sldml/class_id.hpp"
#include "sldml/config.hpp"
#include "sldml/micronet.hpp"
#include "sldml/signal_io.hpp"
#include "sldml/trainer.hpp"

namespace sldml {

struct ReferenceRule {
  enum class Kind { Prefix, Path };
  Kind kind = Kind::Prefix;
  std::string value;  // filename prefix or manifest path
};

/// Auxiliary (training) and evaluation classes plus one reference rule per evaluation class.
struct SplitProtocol {
  ClassSet aux_classes;
  ClassSet eval_classes;
  ClassMap<ReferenceRule> references;
};

/// Disjoint class sets and exactly one reference rule per evaluation class.
void validate(const SplitProtocol& protocol);

/// {aux_classes: [..], eval_classes: [..], references: {class: {prefix: ".."} | {path: ".."}}}
SplitProtocol load_protocol(const std::filesystem::path& path);
nlohmann::json to_json(const SplitProtocol& protocol);

/// NTU RGB+D 120 one-shot protocol: 20 novel classes, 100 auxiliary classes.
SplitProtocol ntu_oneshot_split();

/// Keeps a seeded uniform subset of `keep` auxiliary classes.
SplitProtocol reduced_aux_split(const SplitProtocol& base, int keep, std::uint64_t seed);

/// Manifest index of the reference sample of every evaluation class.
ClassMap<std::size_t> resolve_references(const DatasetManifest& manifest, const SplitProtocol& protocol);

struct BankEntry {
  std::string class_id;
  VectorX<double> embedding;
  std::string source_path;
};

/// One reference embedding per evaluation class, ascending class id.
struct EmbeddingBank {
  std::vector<BankEntry> entries;
};

struct Prediction {
  std::string class_id;
  double distance = 0;
};

/// Embeds every image separately, so images may differ in size.
MatrixX<double> embed_images(const ModelParams<double>& p, std::span<const SignalImage> images);

EmbeddingBank build_reference_bank(const ModelParams<double>& p, const DatasetManifest& manifest,
                                   const SplitProtocol& protocol, const TrainConfig& cfg, ImageCache* cache = nullptr);

/// Nearest reference by Euclidean distance; ties go to the smaller class id.
Prediction classify(const EmbeddingBank& bank, const Eigen::Ref<const VectorX<double>>& query);

struct LabeledEmbedding {
  std::string path;
  std::string label;
  VectorX<double> embedding;
};

struct QueryResult {
  std::string path;
  std::string label;
  Prediction prediction;
};

struct EvaluationReport {
  double accuracy = 0;        // over queries
  double macro_accuracy = 0;  // mean of per-class accuracies
  ClassMap<double> per_class;
  std::vector<std::string> classes;  // confusion row/column order (bank order)
  Eigen::MatrixXi confusion;         // confusion(i, j): class i queries predicted as class j
  std::vector<QueryResult> queries;
};

EvaluationReport evaluate_embeddings(const EmbeddingBank& bank, std::span<const LabeledEmbedding> queries);

/// Queries are the evaluation-class entries of `manifest` minus the references.
std::vector<std::size_t> query_indices(const DatasetManifest& manifest, const SplitProtocol& protocol,
                                       const ClassMap<std::size_t>& references);

EvaluationReport evaluate(const ModelParams<double>& p, const DatasetManifest& manifest, const SplitProtocol& protocol,
                          const TrainConfig& cfg, ImageCache* cache = nullptr);

/// {accuracy, macro_accuracy, per_class, classes, confusion, config_digest}
nlohmann::json report_to_json(const EvaluationReport& report, const std::string& config_digest);

/// TSV rows: path, true label, predicted label, distance, 128 embedding values.
void export_embeddings(const ModelParams<double>& p, const DatasetManifest& manifest, const SplitProtocol& protocol,
                       const TrainConfig& cfg, const std::filesystem::path& path, ImageCache* cache = nullptr);

/**
 * Projects centered vectors onto their top principal directions via power
 * iteration with deflation. Returns n x dims scores (row i = vector i).
 */
MatrixX<double> pca_project(std::span<const VectorX<double>> vectors, int dims = 2);

}  // namespace sldml

#endif  // SLDML_ONESHOT_HPP_
