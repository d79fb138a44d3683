#include "sldml/oneshot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace sldml {
namespace {

std::string basename_of(const std::string& path) { return std::filesystem::path(path).filename().string(); }

}  // namespace

void validate(const SplitProtocol& protocol) {
  for (const auto& c : protocol.eval_classes) {
    if (protocol.aux_classes.count(c)) throw Error(ErrorCode::InvalidProtocol, "class " + c + " is both aux and eval");
    if (!protocol.references.count(c)) throw Error(ErrorCode::InvalidProtocol, "no reference rule for class " + c);
  }
  for (const auto& [c, rule] : protocol.references) {
    if (!protocol.eval_classes.count(c)) {
      throw Error(ErrorCode::InvalidProtocol, "reference rule for non-evaluation class " + c);
    }
    if (rule.value.empty()) throw Error(ErrorCode::InvalidProtocol, "empty reference rule for class " + c);
  }
}

SplitProtocol load_protocol(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  SplitProtocol protocol;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& c : j.at("aux_classes")) protocol.aux_classes.insert(c.get<std::string>());
    for (const auto& c : j.at("eval_classes")) protocol.eval_classes.insert(c.get<std::string>());
    for (const auto& [cls, rule] : j.at("references").items()) {
      ReferenceRule r;
      if (rule.contains("prefix") && !rule.contains("path")) {
        r.kind = ReferenceRule::Kind::Prefix;
        r.value = rule.at("prefix").get<std::string>();
      } else if (rule.contains("path") && !rule.contains("prefix")) {
        r.kind = ReferenceRule::Kind::Path;
        std::filesystem::path p(rule.at("path").get<std::string>());
        if (p.is_relative()) p = path.parent_path() / p;
        r.value = p.lexically_normal().string();
      } else {
        throw Error(ErrorCode::InvalidProtocol, "reference for " + cls + " needs exactly one of prefix/path");
      }
      protocol.references.emplace(cls, std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidProtocol, path.string() + ": " + e.what());
  }
  validate(protocol);
  return protocol;
}

nlohmann::json to_json(const SplitProtocol& protocol) {
  nlohmann::json refs = nlohmann::json::object();
  for (const auto& [c, r] : protocol.references) {
    refs[c] = {{r.kind == ReferenceRule::Kind::Prefix ? "prefix" : "path", r.value}};
  }
  return {{"aux_classes", std::vector<std::string>(protocol.aux_classes.begin(), protocol.aux_classes.end())},
          {"eval_classes", std::vector<std::string>(protocol.eval_classes.begin(), protocol.eval_classes.end())},
          {"references", refs}};
}

SplitProtocol ntu_oneshot_split() {
  SplitProtocol protocol;
  for (int a = 1; a <= 120; ++a) {
    const std::string id = "A" + std::to_string(a);
    if (a % 6 == 1) {  // A1, A7, ..., A115
      protocol.eval_classes.insert(id);
      protocol.references.emplace(
          id, ReferenceRule{ReferenceRule::Kind::Prefix, a < 60 ? "S001C003P008R001" : "S018C003P008R001"});
    } else {
      protocol.aux_classes.insert(id);
    }
  }
  return protocol;
}

SplitProtocol reduced_aux_split(const SplitProtocol& base, int keep, std::uint64_t seed) {
  if (keep < 1 || std::size_t(keep) > base.aux_classes.size()) {
    throw Error(ErrorCode::KeepOutOfRange,
                "keep=" + std::to_string(keep) + " with " + std::to_string(base.aux_classes.size()) + " aux classes");
  }
  std::vector<std::string> aux(base.aux_classes.begin(), base.aux_classes.end());
  std::mt19937_64 rng(seed);
  std::shuffle(aux.begin(), aux.end(), rng);
  SplitProtocol out = base;
  out.aux_classes = ClassSet(aux.begin(), aux.begin() + keep);
  return out;
}

ClassMap<std::size_t> resolve_references(const DatasetManifest& manifest, const SplitProtocol& protocol) {
  validate(protocol);
  ClassMap<std::size_t> refs;
  for (const auto& cls : protocol.eval_classes) {
    const auto& rule = protocol.references.at(cls);
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const auto& e = manifest.entries[i];
      if (e.label != cls) continue;
      const bool match = rule.kind == ReferenceRule::Kind::Prefix ? basename_of(e.path).starts_with(rule.value)
                                                                  : e.path == rule.value;
      if (match) hits.push_back(i);
    }
    if (hits.empty()) throw Error(ErrorCode::ReferenceNotFound, "class " + cls + " (rule '" + rule.value + "')");
    if (hits.size() > 1) {
      throw Error(ErrorCode::AmbiguousReference, "class " + cls + ": " + std::to_string(hits.size()) + " matches");
    }
    refs.emplace(cls, hits.front());
  }
  return refs;
}

MatrixX<double> embed_images(const ModelParams<double>& p, std::span<const SignalImage> images) {
  MatrixX<double> out(kEmbeddingDim, Eigen::Index(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.col(Eigen::Index(i)) = forward<double>(p, images.subspan(i, 1)).embeddings.col(0);
  }
  return out;
}

EmbeddingBank build_reference_bank(const ModelParams<double>& p, const DatasetManifest& manifest,
                                   const SplitProtocol& protocol, const TrainConfig& cfg, ImageCache* cache) {
  ImageCache local;
  if (!cache) cache = &local;
  EmbeddingBank bank;
  for (const auto& [cls, index] : resolve_references(manifest, protocol)) {
    const auto& entry = manifest.entries[index];
    const SignalImage& img = cache->get(entry.path, cfg.target_width);
    bank.entries.push_back({cls, embed_images(p, std::span(&img, 1)).col(0), entry.path});
  }
  return bank;
}

Prediction classify(const EmbeddingBank& bank, const Eigen::Ref<const VectorX<double>>& query) {
  if (bank.entries.empty()) throw Error(ErrorCode::EmptyBank, "no reference embeddings");
  const BankEntry* best = nullptr;
  double best_distance = std::numeric_limits<double>::infinity();
  for (const auto& e : bank.entries) {
    if (e.embedding.size() != query.size()) throw Error(ErrorCode::ShapeMismatch, "query vs reference dimension");
    const double d = (e.embedding - query).norm();
    if (!best || d < best_distance || (d == best_distance && class_id_less(e.class_id, best->class_id))) {
      best = &e;
      best_distance = d;
    }
  }
  return {best->class_id, best_distance};
}

EvaluationReport evaluate_embeddings(const EmbeddingBank& bank, std::span<const LabeledEmbedding> queries) {
  if (bank.entries.empty()) throw Error(ErrorCode::EmptyBank, "no reference embeddings");
  EvaluationReport report;
  ClassMap<Eigen::Index> position;
  for (const auto& e : bank.entries) {
    position.emplace(e.class_id, Eigen::Index(report.classes.size()));
    report.classes.push_back(e.class_id);
  }
  const auto k = Eigen::Index(report.classes.size());
  report.confusion = Eigen::MatrixXi::Zero(k, k);
  for (const auto& q : queries) {
    const auto row = position.find(q.label);
    if (row == position.end()) throw Error(ErrorCode::InvalidLabel, "query label " + q.label + " is not in the bank");
    auto pred = classify(bank, q.embedding);
    ++report.confusion(row->second, position.at(pred.class_id));
    report.queries.push_back({q.path, q.label, std::move(pred)});
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const int n = report.confusion.row(i).sum();
    if (n == 0) throw Error(ErrorCode::NoQueries, "class " + report.classes[std::size_t(i)]);
    const double acc = double(report.confusion(i, i)) / double(n);
    report.per_class.emplace(report.classes[std::size_t(i)], acc);
    report.macro_accuracy += acc / double(k);
  }
  report.accuracy = double(report.confusion.trace()) / double(report.confusion.sum());
  return report;
}

std::vector<std::size_t> query_indices(const DatasetManifest& manifest, const SplitProtocol& protocol,
                                       const ClassMap<std::size_t>& references) {
  std::vector<bool> is_reference(manifest.entries.size(), false);
  for (const auto& [cls, index] : references) is_reference[index] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!is_reference[i] && protocol.eval_classes.count(manifest.entries[i].label)) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<LabeledEmbedding> embed_queries(const ModelParams<double>& p, const DatasetManifest& manifest,
                                            const std::vector<std::size_t>& indices, const TrainConfig& cfg,
                                            ImageCache& cache) {
  std::vector<LabeledEmbedding> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto& e = manifest.entries[i];
    const SignalImage& img = cache.get(e.path, cfg.target_width);
    out.push_back({e.path, e.label, embed_images(p, std::span(&img, 1)).col(0)});
  }
  return out;
}

}  // namespace

EvaluationReport evaluate(const ModelParams<double>& p, const DatasetManifest& manifest, const SplitProtocol& protocol,
                          const TrainConfig& cfg, ImageCache* cache) {
  ImageCache local;
  if (!cache) cache = &local;
  const auto refs = resolve_references(manifest, protocol);
  const auto bank = build_reference_bank(p, manifest, protocol, cfg, cache);
  const auto queries = embed_queries(p, manifest, query_indices(manifest, protocol, refs), cfg, *cache);
  return evaluate_embeddings(bank, queries);
}

nlohmann::json report_to_json(const EvaluationReport& report, const std::string& config_digest) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [c, acc] : report.per_class) per_class[c] = acc;
  std::vector<std::vector<int>> confusion;
  for (Eigen::Index i = 0; i < report.confusion.rows(); ++i) {
    confusion.emplace_back(report.confusion.row(i).begin(), report.confusion.row(i).end());
  }
  return {{"accuracy", report.accuracy},   {"macro_accuracy", report.macro_accuracy},
          {"per_class", per_class},        {"classes", report.classes},
          {"confusion", confusion},        {"config_digest", config_digest}};
}

void export_embeddings(const ModelParams<double>& p, const DatasetManifest& manifest, const SplitProtocol& protocol,
                       const TrainConfig& cfg, const std::filesystem::path& path, ImageCache* cache) {
  ImageCache local;
  if (!cache) cache = &local;
  const auto refs = resolve_references(manifest, protocol);
  const auto bank = build_reference_bank(p, manifest, protocol, cfg, cache);
  const auto queries = embed_queries(p, manifest, query_indices(manifest, protocol, refs), cfg, *cache);

  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "path\ttrue_label\tpredicted_label\tdistance";
  for (int d = 0; d < kEmbeddingDim; ++d) out << "\te" << d;
  out << '\n';
  char buf[32];
  for (const auto& q : queries) {
    const auto pred = classify(bank, q.embedding);
    std::snprintf(buf, sizeof(buf), "%.9g", pred.distance);
    out << q.path << '\t' << q.label << '\t' << pred.class_id << '\t' << buf;
    for (Eigen::Index d = 0; d < q.embedding.size(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.9g", q.embedding(d));
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

MatrixX<double> pca_project(std::span<const VectorX<double>> vectors, int dims) {
  if (vectors.size() < 2) throw Error(ErrorCode::InvalidArgument, "pca_project needs at least 2 vectors");
  if (dims < 1) throw Error(ErrorCode::InvalidArgument, "dims must be positive");
  const auto n = Eigen::Index(vectors.size());
  const Eigen::Index d = vectors.front().size();
  MatrixX<double> x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (vectors[std::size_t(i)].size() != d) throw Error(ErrorCode::ShapeMismatch, "vector dimensions differ");
    x.row(i) = vectors[std::size_t(i)].transpose();
  }
  x.rowwise() -= x.colwise().mean();
  if (x.cwiseAbs().maxCoeff() == 0.0) throw Error(ErrorCode::DegenerateData, "all vectors are identical");

  MatrixX<double> cov = x.transpose() * x / double(n - 1);
  MatrixX<double> components = MatrixX<double>::Zero(d, dims);
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  constexpr double kTolerance = 1e-9;
  constexpr int kMaxIterations = 1000;
  const double scale = cov.cwiseAbs().maxCoeff();

  for (int c = 0; c < dims && c < d; ++c) {
    VectorX<double> v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = normal(rng);
    auto orthogonalize = [&](VectorX<double>& u) {
      for (int prev = 0; prev < c; ++prev) u -= components.col(prev).dot(u) * components.col(prev);
    };
    orthogonalize(v);
    v.normalize();
    for (int it = 0; it < kMaxIterations; ++it) {
      VectorX<double> next = cov * v;
      orthogonalize(next);
      const double norm = next.norm();
      if (norm <= 1e-14 * scale) {
        v.setZero();  // remaining variance is numerically zero
        break;
      }
      next /= norm;
      const double change = (next - v).norm();
      v = next;
      if (change < kTolerance) break;
    }
    components.col(c) = v;
    const double lambda = v.dot(cov * v);
    cov -= lambda * v * v.transpose();
  }
  return x * components;
}

}  // namespace sldml
