#ifndef SLDML_MICRONET_HPP_
#define SLDML_MICRONET_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "sldml/config.hpp"
#include "sldml/encoder.hpp"
#include "sldml/error.hpp"
#include "sldml/metric.hpp"

namespace sldml {

template <typename Scalar>
using RowMajorMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kFeatureDim = 128;
inline constexpr Eigen::Index kMinImageSide = 3;

/// k x k convolution, weight stored as out x (in * k * k), i.e. [out, in, k, k] row-major.
template <typename Scalar>
struct Conv2d {
  RowMajorMatrixX<Scalar> weight;
  VectorX<Scalar> bias;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  Eigen::Index out_size(Eigen::Index n) const { return (n + 2 * pad - kernel) / stride + 1; }
};

/// y = weight^T x + bias, weight stored as [in, out] row-major.
template <typename Scalar>
struct Dense {
  RowMajorMatrixX<Scalar> weight;
  VectorX<Scalar> bias;
};

/// A flat view of one named parameter tensor.
template <typename Scalar>
struct ParamSlot {
  std::string name;
  std::vector<Eigen::Index> shape;
  Scalar* data;
  Eigen::Index size;

  Eigen::Map<VectorX<Scalar>> flat() const { return {data, size}; }
};

/**
 * Parameters of the residual micro-net: a 3->16 stem, two stride-2 residual
 * blocks (16->32, 32->64) with 1x1 projection shortcuts, a 64->128 trunk
 * linear producing the shared feature, a 128->128->128 embedding perceptron
 * and a 128->num_labels classifier.
 */
template <typename Scalar>
struct ModelParams {
  int num_labels = 0;
  Conv2d<Scalar> stem;
  Conv2d<Scalar> block1_conv1, block1_conv2, block1_proj;
  Conv2d<Scalar> block2_conv1, block2_conv2, block2_proj;
  Dense<Scalar> trunk;
  Dense<Scalar> embed_hidden, embed_out;
  Dense<Scalar> classifier;

  /// Parameter tensors in a fixed order (the checkpoint order).
  std::vector<ParamSlot<Scalar>> slots() {
    std::vector<ParamSlot<Scalar>> out;
    auto conv = [&](const std::string& name, Conv2d<Scalar>& c) {
      out.push_back({name + ".weight",
                     {c.out_channels, c.in_channels, c.kernel, c.kernel},
                     c.weight.data(),
                     c.weight.size()});
      out.push_back({name + ".bias", {c.out_channels}, c.bias.data(), c.bias.size()});
    };
    auto dense = [&](const std::string& name, Dense<Scalar>& d) {
      out.push_back({name + ".weight", {d.weight.rows(), d.weight.cols()}, d.weight.data(), d.weight.size()});
      out.push_back({name + ".bias", {d.bias.size()}, d.bias.data(), d.bias.size()});
    };
    conv("stem", stem);
    conv("block1.conv1", block1_conv1);
    conv("block1.conv2", block1_conv2);
    conv("block1.proj", block1_proj);
    conv("block2.conv1", block2_conv1);
    conv("block2.conv2", block2_conv2);
    conv("block2.proj", block2_proj);
    dense("trunk", trunk);
    dense("embed.hidden", embed_hidden);
    dense("embed.out", embed_out);
    dense("classifier", classifier);
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& s : const_cast<ModelParams*>(this)->slots()) n += s.size;
    return n;
  }

  VectorX<Scalar> flatten() const {
    VectorX<Scalar> v(parameter_count());
    Eigen::Index offset = 0;
    for (const auto& s : const_cast<ModelParams*>(this)->slots()) {
      v.segment(offset, s.size) = s.flat();
      offset += s.size;
    }
    return v;
  }

  void assign(const Eigen::Ref<const VectorX<Scalar>>& v) {
    if (v.size() != parameter_count()) throw Error(ErrorCode::ShapeMismatch, "flat parameter vector size");
    Eigen::Index offset = 0;
    for (auto& s : slots()) {
      s.flat() = v.segment(offset, s.size);
      offset += s.size;
    }
  }

  template <typename NewScalar>
  ModelParams<NewScalar> cast() const {
    ModelParams<NewScalar> out = zero_like<NewScalar>();
    out.assign(flatten().template cast<NewScalar>());
    return out;
  }

  /// Same architecture with every tensor zero.
  template <typename NewScalar = Scalar>
  ModelParams<NewScalar> zero_like() const;
};

namespace detail {

template <typename Scalar>
Conv2d<Scalar> make_conv(int in, int out, int kernel, int stride, int pad) {
  Conv2d<Scalar> c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = kernel;
  c.stride = stride;
  c.pad = pad;
  c.weight = RowMajorMatrixX<Scalar>::Zero(out, in * kernel * kernel);
  c.bias = VectorX<Scalar>::Zero(out);
  return c;
}

template <typename Scalar>
Dense<Scalar> make_dense(int in, int out) {
  return {RowMajorMatrixX<Scalar>::Zero(in, out), VectorX<Scalar>::Zero(out)};
}

}  // namespace detail

/// All-zero parameters for the given label count.
template <typename Scalar>
ModelParams<Scalar> zero_params(int num_labels) {
  if (num_labels < 2) throw Error(ErrorCode::InvalidArgument, "num_labels must be >= 2");
  ModelParams<Scalar> p;
  p.num_labels = num_labels;
  p.stem = detail::make_conv<Scalar>(3, 16, 3, 1, 1);
  p.block1_conv1 = detail::make_conv<Scalar>(16, 32, 3, 2, 1);
  p.block1_conv2 = detail::make_conv<Scalar>(32, 32, 3, 1, 1);
  p.block1_proj = detail::make_conv<Scalar>(16, 32, 1, 2, 0);
  p.block2_conv1 = detail::make_conv<Scalar>(32, 64, 3, 2, 1);
  p.block2_conv2 = detail::make_conv<Scalar>(64, 64, 3, 1, 1);
  p.block2_proj = detail::make_conv<Scalar>(32, 64, 1, 2, 0);
  p.trunk = detail::make_dense<Scalar>(64, kFeatureDim);
  p.embed_hidden = detail::make_dense<Scalar>(kFeatureDim, kEmbeddingDim);
  p.embed_out = detail::make_dense<Scalar>(kEmbeddingDim, kEmbeddingDim);
  p.classifier = detail::make_dense<Scalar>(kFeatureDim, num_labels);
  return p;
}

template <typename Scalar>
template <typename NewScalar>
ModelParams<NewScalar> ModelParams<Scalar>::zero_like() const {
  return zero_params<NewScalar>(num_labels);
}

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases, fully determined by seed.
template <typename Scalar = double>
ModelParams<Scalar> init_params(std::uint64_t seed, int num_labels) {
  ModelParams<Scalar> p = zero_params<Scalar>(num_labels);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& slot : p.slots()) {
    if (slot.shape.size() < 2) continue;  // bias
    // conv: [out, in, k, k] -> fan_in = in*k*k; dense: [in, out] -> fan_in = in
    const double fan_in = slot.shape.size() == 4 ? double(slot.shape[1] * slot.shape[2] * slot.shape[3])
                                                 : double(slot.shape[0]);
    const double std_dev = std::sqrt(2.0 / fan_in);
    auto flat = slot.flat();
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = Scalar(std_dev * normal(rng));
  }
  return p;
}

namespace detail {

/// Unfolds a C x (H*W) feature map into (C*k*k) x (Ho*Wo) patches.
template <typename Scalar>
MatrixX<Scalar> im2col(const MatrixX<Scalar>& x, Eigen::Index h, Eigen::Index w, const Conv2d<Scalar>& conv,
                       Eigen::Index ho, Eigen::Index wo) {
  const int k = conv.kernel;
  MatrixX<Scalar> col = MatrixX<Scalar>::Zero(Eigen::Index(conv.in_channels) * k * k, ho * wo);
  for (Eigen::Index c = 0; c < conv.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (c * k + ky) * k + kx;
        for (Eigen::Index oy = 0; oy < ho; ++oy) {
          const Eigen::Index iy = oy * conv.stride - conv.pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (Eigen::Index ox = 0; ox < wo; ++ox) {
            const Eigen::Index ix = ox * conv.stride - conv.pad + kx;
            if (ix < 0 || ix >= w) continue;
            col(row, oy * wo + ox) = x(c, iy * w + ix);
          }
        }
      }
    }
  }
  return col;
}

/// Adjoint of im2col: scatters patch gradients back onto the C x (H*W) map.
template <typename Scalar>
MatrixX<Scalar> col2im(const MatrixX<Scalar>& col, Eigen::Index h, Eigen::Index w, const Conv2d<Scalar>& conv,
                       Eigen::Index ho, Eigen::Index wo) {
  const int k = conv.kernel;
  MatrixX<Scalar> x = MatrixX<Scalar>::Zero(conv.in_channels, h * w);
  for (Eigen::Index c = 0; c < conv.in_channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (c * k + ky) * k + kx;
        for (Eigen::Index oy = 0; oy < ho; ++oy) {
          const Eigen::Index iy = oy * conv.stride - conv.pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (Eigen::Index ox = 0; ox < wo; ++ox) {
            const Eigen::Index ix = ox * conv.stride - conv.pad + kx;
            if (ix < 0 || ix >= w) continue;
            x(c, iy * w + ix) += col(row, oy * wo + ox);
          }
        }
      }
    }
  }
  return x;
}

template <typename Scalar>
struct ConvTape {
  MatrixX<Scalar> col;
  Eigen::Index in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

template <typename Scalar>
MatrixX<Scalar> conv_forward(const Conv2d<Scalar>& conv, const MatrixX<Scalar>& x, Eigen::Index h, Eigen::Index w,
                             ConvTape<Scalar>& tape) {
  tape.in_h = h;
  tape.in_w = w;
  tape.out_h = conv.out_size(h);
  tape.out_w = conv.out_size(w);
  tape.col = im2col(x, h, w, conv, tape.out_h, tape.out_w);
  MatrixX<Scalar> out = conv.weight * tape.col;
  out.colwise() += conv.bias;
  return out;
}

/// Accumulates weight/bias gradients; returns d input when `need_input_grad`.
template <typename Scalar>
MatrixX<Scalar> conv_backward(const Conv2d<Scalar>& conv, const ConvTape<Scalar>& tape, const MatrixX<Scalar>& d_out,
                              Conv2d<Scalar>& grad, bool need_input_grad) {
  grad.weight.noalias() += d_out * tape.col.transpose();
  grad.bias += d_out.rowwise().sum();
  if (!need_input_grad) return {};
  const MatrixX<Scalar> d_col = conv.weight.transpose() * d_out;
  return col2im(d_col, tape.in_h, tape.in_w, conv, tape.out_h, tape.out_w);
}

template <typename Scalar>
struct BlockTape {
  ConvTape<Scalar> conv1, conv2, proj;
  MatrixX<Scalar> hidden;  // relu(conv1(x))
  MatrixX<Scalar> out;     // relu(conv2(hidden) + proj(x))
};

template <typename Scalar>
MatrixX<Scalar> block_forward(const Conv2d<Scalar>& c1, const Conv2d<Scalar>& c2, const Conv2d<Scalar>& proj,
                              const MatrixX<Scalar>& x, Eigen::Index& h, Eigen::Index& w, BlockTape<Scalar>& tape) {
  tape.hidden = conv_forward(c1, x, h, w, tape.conv1).cwiseMax(Scalar(0));
  const Eigen::Index ho = tape.conv1.out_h, wo = tape.conv1.out_w;
  MatrixX<Scalar> main = conv_forward(c2, tape.hidden, ho, wo, tape.conv2);
  main += conv_forward(proj, x, h, w, tape.proj);
  tape.out = main.cwiseMax(Scalar(0));
  h = ho;
  w = wo;
  return tape.out;
}

template <typename Scalar>
MatrixX<Scalar> block_backward(const Conv2d<Scalar>& c1, const Conv2d<Scalar>& c2, const Conv2d<Scalar>& proj,
                               const BlockTape<Scalar>& tape, const MatrixX<Scalar>& d_out, Conv2d<Scalar>& g1,
                               Conv2d<Scalar>& g2, Conv2d<Scalar>& gproj) {
  const MatrixX<Scalar> d_sum = (tape.out.array() > Scalar(0)).select(d_out, Scalar(0));
  MatrixX<Scalar> d_hidden = conv_backward(c2, tape.conv2, d_sum, g2, true);
  d_hidden = (tape.hidden.array() > Scalar(0)).select(d_hidden, Scalar(0));
  MatrixX<Scalar> d_x = conv_backward(c1, tape.conv1, d_hidden, g1, true);
  d_x += conv_backward(proj, tape.proj, d_sum, gproj, true);
  return d_x;
}

template <typename Scalar>
struct SampleTape {
  ConvTape<Scalar> stem;
  MatrixX<Scalar> stem_out;
  BlockTape<Scalar> block1, block2;
  VectorX<Scalar> pooled;
  VectorX<Scalar> feature;
  VectorX<Scalar> hidden;
};

template <typename Scalar>
void check_batch(std::span<const BasicSignalImage<Scalar>> images) {
  if (images.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  const auto h = images.front().height, w = images.front().width;
  for (const auto& img : images) {
    if (img.height != h || img.width != w || img.pixels.cols() != h * w) {
      throw Error(ErrorCode::ShapeMismatch, "images in a batch must share one H x W");
    }
  }
  if (h < kMinImageSide || w < kMinImageSide) {
    throw Error(ErrorCode::ImageTooSmall,
                std::to_string(h) + "x" + std::to_string(w) + " image, need at least 3x3");
  }
}

template <typename Scalar>
void forward_sample(const ModelParams<Scalar>& p, const BasicSignalImage<Scalar>& img, SampleTape<Scalar>& tape,
                    std::type_identity_t<Eigen::Ref<VectorX<Scalar>>> embedding,
                    std::type_identity_t<Eigen::Ref<VectorX<Scalar>>> logits) {
  Eigen::Index h = img.height, w = img.width;
  const MatrixX<Scalar> x = img.pixels;
  tape.stem_out = conv_forward(p.stem, x, h, w, tape.stem).cwiseMax(Scalar(0));
  MatrixX<Scalar> a = block_forward(p.block1_conv1, p.block1_conv2, p.block1_proj, tape.stem_out, h, w, tape.block1);
  a = block_forward(p.block2_conv1, p.block2_conv2, p.block2_proj, a, h, w, tape.block2);
  tape.pooled = a.rowwise().mean();
  tape.feature = (p.trunk.weight.transpose() * tape.pooled + p.trunk.bias).cwiseMax(Scalar(0));
  tape.hidden = (p.embed_hidden.weight.transpose() * tape.feature + p.embed_hidden.bias).cwiseMax(Scalar(0));
  embedding = p.embed_out.weight.transpose() * tape.hidden + p.embed_out.bias;
  logits = p.classifier.weight.transpose() * tape.feature + p.classifier.bias;
}

template <typename Scalar>
void backward_sample(const ModelParams<Scalar>& p, const BasicSignalImage<Scalar>& img, const SampleTape<Scalar>& tape,
                     const VectorX<Scalar>& d_embedding, const VectorX<Scalar>& d_logits, ModelParams<Scalar>& g) {
  g.embed_out.weight.noalias() += tape.hidden * d_embedding.transpose();
  g.embed_out.bias += d_embedding;
  VectorX<Scalar> d_hidden = p.embed_out.weight * d_embedding;
  d_hidden = (tape.hidden.array() > Scalar(0)).select(d_hidden, Scalar(0));
  g.embed_hidden.weight.noalias() += tape.feature * d_hidden.transpose();
  g.embed_hidden.bias += d_hidden;

  g.classifier.weight.noalias() += tape.feature * d_logits.transpose();
  g.classifier.bias += d_logits;

  VectorX<Scalar> d_feature = p.embed_hidden.weight * d_hidden + p.classifier.weight * d_logits;
  d_feature = (tape.feature.array() > Scalar(0)).select(d_feature, Scalar(0));
  g.trunk.weight.noalias() += tape.pooled * d_feature.transpose();
  g.trunk.bias += d_feature;
  const VectorX<Scalar> d_pooled = p.trunk.weight * d_feature;

  const Eigen::Index spatial = tape.block2.out.cols();
  MatrixX<Scalar> d_map = d_pooled.replicate(1, spatial) / Scalar(spatial);
  d_map = block_backward(p.block2_conv1, p.block2_conv2, p.block2_proj, tape.block2, d_map, g.block2_conv1,
                         g.block2_conv2, g.block2_proj);
  d_map = block_backward(p.block1_conv1, p.block1_conv2, p.block1_proj, tape.block1, d_map, g.block1_conv1,
                         g.block1_conv2, g.block1_proj);
  d_map = (tape.stem_out.array() > Scalar(0)).select(d_map, Scalar(0));
  conv_backward(p.stem, tape.stem, d_map, g.stem, false);
  (void)img;
}

}  // namespace detail

template <typename Scalar>
struct ForwardResult {
  MatrixX<Scalar> embeddings;  // 128 x B
  MatrixX<Scalar> logits;      // num_labels x B
};

/// Runs the batch through the trunk and both heads. `train_mode` is reserved:
/// the micro-net has no dropout or normalization layers.
template <typename Scalar>
ForwardResult<Scalar> forward(const ModelParams<Scalar>& p, std::span<const BasicSignalImage<Scalar>> images,
                              bool train_mode = false) {
  (void)train_mode;
  detail::check_batch(images);
  const auto b = Eigen::Index(images.size());
  ForwardResult<Scalar> out{MatrixX<Scalar>(kEmbeddingDim, b), MatrixX<Scalar>(p.num_labels, b)};
  detail::SampleTape<Scalar> tape;
  for (Eigen::Index i = 0; i < b; ++i) {
    detail::forward_sample(p, images[std::size_t(i)], tape, out.embeddings.col(i), out.logits.col(i));
  }
  return out;
}

template <typename Scalar>
struct LossReport {
  Scalar total = 0;
  Scalar triplet = 0;
  Scalar cross_entropy = 0;
  std::size_t positive_pairs = 0;
  std::size_t negative_pairs = 0;
  std::size_t triplets = 0;
  std::size_t active_triplets = 0;
};

template <typename Scalar>
struct LossAndGrads {
  LossReport<Scalar> loss;
  ModelParams<Scalar> grads;
};

namespace detail {

template <typename Scalar>
void check_labels(std::span<const int> labels, std::size_t batch, int num_labels) {
  if (labels.size() != batch) throw Error(ErrorCode::ShapeMismatch, "labels vs batch size");
  for (int y : labels) {
    if (y < 0 || y >= num_labels) throw Error(ErrorCode::InvalidLabel, "label " + std::to_string(y));
  }
}

template <typename Scalar>
LossReport<Scalar> head_losses(const ForwardResult<Scalar>& fwd, std::span<const int> labels, const TrainConfig& cfg,
                               std::type_identity_t<MatrixX<Scalar>*> d_embeddings,
                               std::type_identity_t<MatrixX<Scalar>*> d_logits) {
  LossReport<Scalar> r;
  const MinedPairs pairs = mine_multi_similarity(fwd.embeddings, labels, cfg.weights.epsilon_mine, cfg.miner_mode);
  r.positive_pairs = pairs.positives.size();
  r.negative_pairs = pairs.negatives.size();
  const auto trip = triplet_margin_loss(fwd.embeddings, pairs, cfg.weights.delta, d_embeddings);
  r.triplet = trip.value;
  r.triplets = trip.triplets;
  r.active_triplets = trip.active;
  r.cross_entropy = cross_entropy_loss(fwd.logits, labels, d_logits);
  r.total = Scalar(cfg.weights.alpha) * r.triplet + Scalar(cfg.weights.beta) * r.cross_entropy;
  if (d_embeddings) *d_embeddings *= Scalar(cfg.weights.alpha);
  if (d_logits) *d_logits *= Scalar(cfg.weights.beta);
  return r;
}

}  // namespace detail

/// Weighted loss alpha * L_triplet + beta * L_ce without gradients.
template <typename Scalar>
LossReport<Scalar> loss_only(const ModelParams<Scalar>& p, std::span<const BasicSignalImage<Scalar>> images,
                             std::span<const int> labels, const TrainConfig& cfg) {
  if (images.size() < 2) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 2");
  detail::check_labels<Scalar>(labels, images.size(), p.num_labels);
  return detail::head_losses(forward(p, images, true), labels, cfg, nullptr, nullptr);
}

/// Loss plus exact reverse-mode gradients with respect to every parameter.
template <typename Scalar>
LossAndGrads<Scalar> loss_and_grads(const ModelParams<Scalar>& p, std::span<const BasicSignalImage<Scalar>> images,
                                    std::span<const int> labels, const TrainConfig& cfg) {
  if (images.size() < 2) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 2");
  detail::check_batch(images);
  detail::check_labels<Scalar>(labels, images.size(), p.num_labels);

  const auto b = Eigen::Index(images.size());
  ForwardResult<Scalar> fwd{MatrixX<Scalar>(kEmbeddingDim, b), MatrixX<Scalar>(p.num_labels, b)};
  std::vector<detail::SampleTape<Scalar>> tapes(images.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    detail::forward_sample(p, images[std::size_t(i)], tapes[std::size_t(i)], fwd.embeddings.col(i), fwd.logits.col(i));
  }

  MatrixX<Scalar> d_embeddings, d_logits;
  LossAndGrads<Scalar> out{detail::head_losses(fwd, labels, cfg, &d_embeddings, &d_logits), p.zero_like()};
  for (Eigen::Index i = 0; i < b; ++i) {
    detail::backward_sample(p, images[std::size_t(i)], tapes[std::size_t(i)], VectorX<Scalar>(d_embeddings.col(i)),
                            VectorX<Scalar>(d_logits.col(i)), out.grads);
  }
  return out;
}

/**
 * Compares analytic gradients against central differences on `samples`
 * uniformly drawn coordinates. Returns max |analytic - numeric| / max(|numeric|, 1e-8).
 */
template <typename Objective>
double finite_difference_check(Objective&& objective, const VectorX<double>& theta, const VectorX<double>& analytic,
                               int samples, double h, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "grad_check needs at least one sample");
  if (!(h > 0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be > 0");
  if (theta.size() != analytic.size() || theta.size() == 0) throw Error(ErrorCode::ShapeMismatch, "gradient size");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, theta.size() - 1);
  VectorX<double> probe = theta;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Eigen::Index k = pick(rng);
    probe(k) = theta(k) + h;
    const double up = objective(probe);
    probe(k) = theta(k) - h;
    const double down = objective(probe);
    probe(k) = theta(k);
    const double numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic(k) - numeric) / std::max(std::abs(numeric), 1e-8));
  }
  return worst;
}

/// Gradient check of loss_and_grads for the full network (64-bit).
inline double grad_check(const ModelParams<double>& p, std::span<const SignalImage> images,
                         std::span<const int> labels, const TrainConfig& cfg, int samples, double h,
                         std::uint64_t seed = 0) {
  if (!(h > 0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be > 0");
  const auto analytic = loss_and_grads(p, images, labels, cfg).grads.flatten();
  ModelParams<double> probe = p;
  auto objective = [&](const VectorX<double>& theta) {
    probe.assign(theta);
    return double(loss_only(probe, images, labels, cfg).total);
  };
  return finite_difference_check(objective, p.flatten(), analytic, samples, h, seed);
}

template <typename Scalar>
struct OptState {
  ModelParams<Scalar> accum;  // running mean of squared gradients
  double decay = 0.9;
  double epsilon = 1e-8;
  std::int64_t steps = 0;
};

template <typename Scalar>
OptState<Scalar> make_opt_state(const ModelParams<Scalar>& p, double decay = 0.9, double epsilon = 1e-8) {
  return {p.zero_like(), decay, epsilon, 0};
}

/// v <- rho v + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(v) + eps).
template <typename Scalar>
void rmsprop_step(ModelParams<Scalar>& p, const ModelParams<Scalar>& grads, OptState<Scalar>& state, double lr) {
  if (!(lr > 0)) throw Error(ErrorCode::InvalidArgument, "lr must be > 0");
  auto ps = p.slots();
  auto gs = const_cast<ModelParams<Scalar>&>(grads).slots();
  auto vs = state.accum.slots();
  if (ps.size() != gs.size() || ps.size() != vs.size()) throw Error(ErrorCode::ShapeMismatch, "optimizer tensors");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].shape != gs[i].shape || ps[i].shape != vs[i].shape) {
      throw Error(ErrorCode::ShapeMismatch, "tensor " + ps[i].name);
    }
    if (!gs[i].flat().allFinite()) throw Error(ErrorCode::NonFiniteGradient, "tensor " + gs[i].name);
  }
  const Scalar rho = Scalar(state.decay);
  const Scalar eps = Scalar(state.epsilon);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto theta = ps[i].flat();
    auto g = gs[i].flat();
    auto v = vs[i].flat();
    v.array() = rho * v.array() + (Scalar(1) - rho) * g.array().square();
    theta.array() -= Scalar(lr) * g.array() / (v.array().sqrt() + eps);
  }
  ++state.steps;
}

}  // namespace sldml

#endif  // SLDML_MICRONET_HPP_
