#ifndef SLDML_SIGNAL_IO_HPP_
#define SLDML_SIGNAL_IO_HPP_

#include <cmath>
#include <filesystem>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "sldml/error.hpp"

namespace sldml {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/**
 * Multivariate sequence: row i is signal i over time, column t is one sample
 * instant. Signal files store the transpose (one sample per line).
 */
template <typename Scalar>
struct BasicSignalMatrix {
  MatrixX<Scalar> values;
  std::vector<std::string> signal_names;
  std::string modality;
  double sample_rate = 0.0;  // Hz, 0 = unknown

  Eigen::Index signals() const { return values.rows(); }
  Eigen::Index samples() const { return values.cols(); }
};

using SignalMatrix = BasicSignalMatrix<double>;

struct ManifestEntry {
  std::string path;  // resolved against the manifest directory
  std::string label;
  std::string subject;
  std::string modality;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

/// Parses a CSV signal file (header of unique names, numeric rows).
SignalMatrix load_signal_csv(const std::filesystem::path& path);

/// Writes the CSV layout read by load_signal_csv, with round-trip precision.
void write_signal_csv(const SignalMatrix& s, const std::filesystem::path& path);

/// One JSON object per line with string keys path, label, subject, modality.
DatasetManifest load_manifest(const std::filesystem::path& path);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Nearest-index selection on a uniform grid over the time axis.
template <typename Scalar>
BasicSignalMatrix<Scalar> subsample_time(const BasicSignalMatrix<Scalar>& s, Eigen::Index target_cols) {
  const Eigen::Index m = s.samples();
  if (target_cols <= 0) throw Error(ErrorCode::ZeroTarget, "target_cols must be positive");
  if (target_cols > m) {
    throw Error(ErrorCode::TargetTooLarge,
                "target_cols " + std::to_string(target_cols) + " exceeds " + std::to_string(m) + " samples");
  }
  BasicSignalMatrix<Scalar> out;
  out.signal_names = s.signal_names;
  out.modality = s.modality;
  out.sample_rate = s.sample_rate > 0 ? s.sample_rate * double(target_cols) / double(m) : 0.0;
  out.values.resize(s.signals(), target_cols);
  for (Eigen::Index j = 0; j < target_cols; ++j) {
    Eigen::Index src = 0;
    if (target_cols > 1) {
      src = static_cast<Eigen::Index>(std::lround(double(j) * double(m - 1) / double(target_cols - 1)));
    }
    out.values.col(j) = s.values.col(src);
  }
  return out;
}

/// Row-wise concatenation a-then-b. Column counts must already agree.
template <typename Scalar>
BasicSignalMatrix<Scalar> fuse_rows(const BasicSignalMatrix<Scalar>& a, const BasicSignalMatrix<Scalar>& b) {
  if (a.values.size() == 0 || b.values.size() == 0) throw Error(ErrorCode::EmptyMatrix, "fuse_rows on empty input");
  if (a.samples() != b.samples()) {
    throw Error(ErrorCode::ColumnMismatch,
                std::to_string(a.samples()) + " vs " + std::to_string(b.samples()) + " columns");
  }
  BasicSignalMatrix<Scalar> out;
  out.modality = "fused";
  out.sample_rate = a.sample_rate;
  out.values.resize(a.signals() + b.signals(), a.samples());
  out.values.topRows(a.signals()) = a.values;
  out.values.bottomRows(b.signals()) = b.values;

  const std::string prefix_a = a.modality.empty() ? "a" : a.modality;
  const std::string prefix_b = b.modality.empty() ? "b" : b.modality;
  std::unordered_set<std::string> seen;
  auto push = [&](const std::string& prefix, const std::string& name) {
    std::string fused = prefix + ":" + name;
    if (!seen.insert(fused).second) throw Error(ErrorCode::NameCollision, fused);
    out.signal_names.push_back(std::move(fused));
  };
  for (const auto& n : a.signal_names) push(prefix_a, n);
  for (const auto& n : b.signal_names) push(prefix_b, n);
  return out;
}

}  // namespace sldml

#endif  // SLDML_SIGNAL_IO_HPP_
