#pragma once

#include "effseg/tensor.hpp"

#include <cstdint>
#include <vector>

namespace effseg {

/// Grayscale image, intensities nominally in [0, 1].
using Image = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Binary mask, values exactly 0 or 1.
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Pixel {
  int row = 0;
  int col = 0;
  bool operator==(const Pixel&) const = default;
};

struct Point {
  double row = 0.0;
  double col = 0.0;
  bool operator==(const Point&) const = default;
};

/// Separable Gaussian blur, kernel truncated at 3 sigma, replicated borders.
Image gaussian_blur(const Image& img, double sigma);

/// Count of foreground pixels.
inline Index area(const Mask& m) { return (m != 0).count(); }

/// Column with the most foreground pixels (ties -> lowest column), or -1 when empty.
int deepest_column(const Mask& m);

/// First and last foreground rows of the deepest column; empty for an empty mask.
std::vector<Pixel> deepest_column_endpoints(const Mask& m);

/// Number of 4-connected foreground components.
int count_components(const Mask& m);

/// Keeps only the largest 4-connected foreground component.
Mask largest_component(const Mask& m);

/// Exact squared Euclidean distance to the nearest pixel where `m` is nonzero.
Eigen::ArrayXXd squared_distance_transform(const Mask& m);

/// Signed distance, positive inside the mask, negative outside (pixel units).
Eigen::ArrayXXd signed_distance(const Mask& m);

/// Stacks images into an (N, 1, H, W) tensor.
template <typename Scalar>
Tensor<Scalar> to_batch(const std::vector<Image>& images) {
  if (images.empty()) return Tensor<Scalar>();
  const Index h = images.front().rows();
  const Index w = images.front().cols();
  Tensor<Scalar> t(static_cast<Index>(images.size()), 1, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].rows() != h || images[i].cols() != w) throw ShapeError("to_batch: images differ in size");
    t.plane(static_cast<Index>(i), 0) = images[i].matrix().template cast<Scalar>();
  }
  return t;
}

/// Stacks masks into an (N, 1, H, W) tensor of 0/1 values.
template <typename Scalar>
Tensor<Scalar> to_target(const std::vector<Mask>& masks) {
  if (masks.empty()) return Tensor<Scalar>();
  const Index h = masks.front().rows();
  const Index w = masks.front().cols();
  Tensor<Scalar> t(static_cast<Index>(masks.size()), 1, h, w);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].rows() != h || masks[i].cols() != w) throw ShapeError("to_target: masks differ in size");
    t.plane(static_cast<Index>(i), 0) = masks[i].matrix().template cast<Scalar>();
  }
  return t;
}

}  // namespace effseg
