#ifndef SLDML_METRIC_HPP_
#define SLDML_METRIC_HPP_

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sldml/error.hpp"
#include "sldml/signal_io.hpp"

// Embedding batches are dim x B matrices: column b is the embedding of sample b.
// Logit batches follow the same convention (num_labels x B).

namespace sldml {

enum class MinerMode {
  Standard,   // negatives closer than the anchor's farthest positive + eps
  LiteralEq3  // negatives closer than the anchor's farthest negative + eps (mines every negative)
};

std::string_view miner_mode_name(MinerMode mode);
MinerMode parse_miner_mode(std::string_view name);

struct LossWeights {
  double alpha = 0.5;          // triplet weight
  double beta = 0.5;           // classifier weight
  double delta = 0.1;          // triplet margin
  double epsilon_mine = 0.05;  // miner margin
};

struct MinedPairs {
  std::vector<std::pair<int, int>> positives;  // (anchor, positive)
  std::vector<std::pair<int, int>> negatives;  // (anchor, negative)
};

template <typename Derived>
MatrixX<typename Derived::Scalar> pairwise_distances(const Eigen::MatrixBase<Derived>& embeddings) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index b = embeddings.cols();
  MatrixX<Scalar> d = MatrixX<Scalar>::Zero(b, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index i = j + 1; i < b; ++i) {
      const Scalar v = (embeddings.col(i) - embeddings.col(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

/// Multi-similarity pair selection on a precomputed distance matrix.
template <typename Scalar>
MinedPairs mine_from_distances(const MatrixX<Scalar>& d, std::span<const int> labels, double epsilon_mine,
                               MinerMode mode = MinerMode::Standard) {
  const auto b = static_cast<int>(labels.size());
  if (d.rows() != b || d.cols() != b) throw Error(ErrorCode::ShapeMismatch, "distance matrix vs labels");
  MinedPairs pairs;
  const Scalar eps = Scalar(epsilon_mine);
  for (int i = 0; i < b; ++i) {
    Scalar min_neg = std::numeric_limits<Scalar>::infinity();
    Scalar max_neg = -std::numeric_limits<Scalar>::infinity();
    Scalar max_pos = -std::numeric_limits<Scalar>::infinity();
    bool has_pos = false;
    bool has_neg = false;
    for (int k = 0; k < b; ++k) {
      if (k == i) continue;
      if (labels[k] == labels[i]) {
        has_pos = true;
        max_pos = std::max(max_pos, d(i, k));
      } else {
        has_neg = true;
        min_neg = std::min(min_neg, d(i, k));
        max_neg = std::max(max_neg, d(i, k));
      }
    }
    const bool mine_negatives = mode == MinerMode::Standard ? has_pos && has_neg : has_neg;
    const Scalar neg_bound = (mode == MinerMode::Standard ? max_pos : max_neg) + eps;
    for (int j = 0; j < b; ++j) {
      if (j == i) continue;
      if (labels[j] == labels[i]) {
        if (has_neg && d(i, j) > min_neg - eps) pairs.positives.emplace_back(i, j);
      } else if (mine_negatives && d(i, j) < neg_bound) {
        pairs.negatives.emplace_back(i, j);
      }
    }
  }
  return pairs;
}

template <typename Derived>
MinedPairs mine_multi_similarity(const Eigen::MatrixBase<Derived>& embeddings, std::span<const int> labels,
                                 double epsilon_mine, MinerMode mode = MinerMode::Standard) {
  if (embeddings.cols() != Eigen::Index(labels.size())) throw Error(ErrorCode::ShapeMismatch, "embeddings vs labels");
  return mine_from_distances(pairwise_distances(embeddings), labels, epsilon_mine, mode);
}

template <typename Scalar>
struct TripletLoss {
  Scalar value = 0;
  std::size_t triplets = 0;
  std::size_t active = 0;  // triplets with a positive hinge
};

/**
 * Mean hinge max(d(a,p) - d(a,n) + delta, 0) over the per-anchor cross product
 * of mined positives and negatives. When `grad` is non-null it receives
 * d loss / d embeddings (same shape as embeddings); the hinge kink and
 * coincident points contribute a zero subgradient.
 */
template <typename Derived>
TripletLoss<typename Derived::Scalar> triplet_margin_loss(const Eigen::MatrixBase<Derived>& embeddings,
                                                          const MinedPairs& pairs, double delta,
                                                          MatrixX<typename Derived::Scalar>* grad = nullptr) {
  using Scalar = typename Derived::Scalar;
  if (delta < 0) throw Error(ErrorCode::InvalidArgument, "triplet margin must be >= 0");
  const Eigen::Index b = embeddings.cols();
  if (grad) grad->setZero(embeddings.rows(), b);

  std::vector<std::vector<int>> pos(static_cast<std::size_t>(b)), neg(static_cast<std::size_t>(b));
  for (auto [a, p] : pairs.positives) pos[std::size_t(a)].push_back(p);
  for (auto [a, n] : pairs.negatives) neg[std::size_t(a)].push_back(n);

  TripletLoss<Scalar> out;
  for (Eigen::Index a = 0; a < b; ++a) {
    out.triplets += pos[std::size_t(a)].size() * neg[std::size_t(a)].size();
  }
  if (out.triplets == 0) return out;
  const Scalar scale = Scalar(1) / Scalar(out.triplets);

  Scalar sum = 0;
  VectorX<Scalar> unit_ap(embeddings.rows()), unit_an(embeddings.rows());
  for (Eigen::Index a = 0; a < b; ++a) {
    for (int p : pos[std::size_t(a)]) {
      const VectorX<Scalar> diff_ap = embeddings.col(a) - embeddings.col(p);
      const Scalar d_ap = diff_ap.norm();
      for (int n : neg[std::size_t(a)]) {
        const VectorX<Scalar> diff_an = embeddings.col(a) - embeddings.col(n);
        const Scalar d_an = diff_an.norm();
        const Scalar h = d_ap - d_an + Scalar(delta);
        if (!(h > 0)) continue;
        sum += h;
        ++out.active;
        if (!grad) continue;
        unit_ap = d_ap > 0 ? VectorX<Scalar>(diff_ap / d_ap) : VectorX<Scalar>::Zero(diff_ap.size());
        unit_an = d_an > 0 ? VectorX<Scalar>(diff_an / d_an) : VectorX<Scalar>::Zero(diff_an.size());
        grad->col(a) += scale * (unit_ap - unit_an);
        grad->col(p) -= scale * unit_ap;
        grad->col(n) += scale * unit_an;
      }
    }
  }
  out.value = sum * scale;
  return out;
}

/// Mean softmax cross-entropy; `grad` (optional) receives d loss / d logits.
template <typename Derived>
typename Derived::Scalar cross_entropy_loss(const Eigen::MatrixBase<Derived>& logits, std::span<const int> labels,
                                            MatrixX<typename Derived::Scalar>* grad = nullptr) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index classes = logits.rows();
  const Eigen::Index b = logits.cols();
  if (b != Eigen::Index(labels.size())) throw Error(ErrorCode::ShapeMismatch, "logits vs labels");
  if (b == 0) throw Error(ErrorCode::InvalidArgument, "empty batch");
  for (int y : labels) {
    if (y < 0 || y >= classes) throw Error(ErrorCode::InvalidLabel, "label " + std::to_string(y));
  }
  if (grad) grad->resize(classes, b);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const Scalar mx = logits.col(i).maxCoeff();
    const VectorX<Scalar> shifted = logits.col(i).array() - mx;
    const VectorX<Scalar> ex = shifted.array().exp();
    const Scalar z = ex.sum();
    total += std::log(z) - shifted(labels[std::size_t(i)]);
    if (grad) {
      grad->col(i) = ex / z;
      (*grad)(labels[std::size_t(i)], i) -= Scalar(1);
    }
  }
  if (grad) *grad /= Scalar(b);
  return total / Scalar(b);
}

inline double total_loss(double triplet, double classifier, const LossWeights& w) {
  return w.alpha * triplet + w.beta * classifier;
}

}  // namespace sldml

#endif  // SLDML_METRIC_HPP_
