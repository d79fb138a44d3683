#ifndef SLDML_ENCODER_HPP_
#define SLDML_ENCODER_HPP_

#include <cmath>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "sldml/error.hpp"
#include "sldml/signal_io.hpp"

namespace sldml {

/**
 * H x W x 3 image. Stored channel-major: pixels.row(c) holds channel c with
 * pixel (h, w) at column h * width + w, which is the layout the network
 * consumes directly.
 */
template <typename Scalar>
struct BasicSignalImage {
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> pixels;
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  std::string source_id;

  Scalar at(Eigen::Index h, Eigen::Index w, Eigen::Index c) const { return pixels(c, h * width + w); }
  Scalar& at(Eigen::Index h, Eigen::Index w, Eigen::Index c) { return pixels(c, h * width + w); }
};

using SignalImage = BasicSignalImage<double>;

/// Linear interpolation of `row` at positions j (M-1)/(W-1); endpoints exact.
template <typename Derived>
RowVectorX<typename Derived::Scalar> resize_time(const Eigen::MatrixBase<Derived>& row, Eigen::Index target_width) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m = row.size();
  if (m < 1) throw Error(ErrorCode::EmptyMatrix, "resize_time on empty row");
  if (target_width < 2) throw Error(ErrorCode::InvalidArgument, "target_width must be >= 2");
  RowVectorX<Scalar> out(target_width);
  if (m == 1) {
    out.setConstant(row(0));
    return out;
  }
  if (m == target_width) {
    for (Eigen::Index j = 0; j < m; ++j) out(j) = row(j);
    return out;
  }
  const double step = double(m - 1) / double(target_width - 1);
  for (Eigen::Index j = 0; j < target_width; ++j) {
    const double pos = double(j) * step;
    auto left = static_cast<Eigen::Index>(std::floor(pos));
    if (left >= m - 1) {
      out(j) = row(m - 1);
      continue;
    }
    const Scalar frac = Scalar(pos - double(left));
    out(j) = frac == Scalar(0) ? row(left) : row(left) + frac * (row(left + 1) - row(left));
  }
  out(target_width - 1) = row(m - 1);
  return out;
}

/// Global min-max scaling to [0, 1]; constant input maps to all zeros.
template <typename Derived>
typename Derived::PlainObject normalize_global(const Eigen::DenseBase<Derived>& t) {
  using Scalar = typename Derived::Scalar;
  if (!t.derived().allFinite()) throw Error(ErrorCode::NonFiniteInput, "normalize_global");
  typename Derived::PlainObject out = t;
  if (out.size() == 0) return out;
  const Scalar lo = out.minCoeff();
  const Scalar hi = out.maxCoeff();
  if (!(hi > lo)) {
    out.setZero();
    return out;
  }
  const Scalar range = hi - lo;
  out = (out.array() - lo) / range;
  return out;
}

/**
 * Groups signal rows into consecutive x/y/z triples (zero padding the last
 * group), resizes each to target_width, then normalizes the whole tensor.
 */
template <typename Scalar>
BasicSignalImage<Scalar> encode(const BasicSignalMatrix<Scalar>& s, Eigen::Index target_width,
                                std::string source_id = {}) {
  if (s.values.size() == 0) throw Error(ErrorCode::EmptyMatrix, "encode on empty signal matrix");
  if (target_width < 2) throw Error(ErrorCode::InvalidArgument, "target_width must be >= 2");
  const Eigen::Index n = s.signals();
  BasicSignalImage<Scalar> img;
  img.height = (n + 2) / 3;
  img.width = target_width;
  img.source_id = std::move(source_id);
  img.pixels.setZero(3, img.height * img.width);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index h = i / 3;
    const Eigen::Index c = i % 3;
    img.pixels.row(c).segment(h * img.width, img.width) = resize_time(s.values.row(i), target_width);
  }
  img.pixels = normalize_global(img.pixels);
  return img;
}

/// 8-bit RGB PNG, byte = round(value * 255).
void export_png(const SignalImage& img, const std::filesystem::path& path);

}  // namespace sldml

#endif  // SLDML_ENCODER_HPP_
