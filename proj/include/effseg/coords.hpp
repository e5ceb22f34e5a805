#pragma once

#include "effseg/image.hpp"
#include "effseg/tensor.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace effseg {

enum class CoordMode { none, cartesian, radial };

inline std::string to_string(CoordMode m) {
  switch (m) {
    case CoordMode::none: return "none";
    case CoordMode::cartesian: return "cartesian";
    case CoordMode::radial: return "radial";
  }
  return "none";
}

inline CoordMode coord_mode_from_string(const std::string& s) {
  if (s == "none") return CoordMode::none;
  if (s == "cartesian") return CoordMode::cartesian;
  if (s == "radial") return CoordMode::radial;
  throw std::invalid_argument("unknown coord mode '" + s + "' (expected none, cartesian or radial)");
}

/// Network input channels implied by a coordinate mode.
inline int input_channels(CoordMode m) {
  switch (m) {
    case CoordMode::none: return 1;
    case CoordMode::cartesian: return 3;
    case CoordMode::radial: return 2;
  }
  return 1;
}

/// Appends coordinate channels to an (N, 1, H, W) image batch.
///
/// cartesian: channel 1 holds x (column index), channel 2 holds y (row index),
/// raw pixels with the origin at the top-left pixel. radial: channel 1 holds
/// the Euclidean pixel distance to the probe apex; `apexes` has either one
/// entry (shared by the batch) or one per sample. With `normalize` set,
/// cartesian coordinates map to [-1, 1] and radial distance is divided by the
/// image diagonal.
template <typename Scalar>
Tensor<Scalar> add_coord_channels(const Tensor<Scalar>& batch, CoordMode mode, std::span<const Point> apexes = {},
                                  bool normalize = false) {
  const Shape& s = batch.shape();
  if (s.c != 1) throw ShapeError("add_coord_channels: expected a single-channel batch, got " + s.str());
  if (mode == CoordMode::none) throw std::invalid_argument("add_coord_channels: mode is none");
  if (mode == CoordMode::radial && apexes.empty())
    throw std::invalid_argument("add_coord_channels: radial mode requires the probe apex");
  if (mode == CoordMode::radial && apexes.size() != 1 && static_cast<Index>(apexes.size()) != s.n)
    throw std::invalid_argument("add_coord_channels: need one apex or one per sample");

  Tensor<Scalar> out(s.n, input_channels(mode), s.h, s.w);
  const Scalar xs = (normalize && s.w > 1) ? Scalar(2) / Scalar(s.w - 1) : Scalar(1);
  const Scalar ys = (normalize && s.h > 1) ? Scalar(2) / Scalar(s.h - 1) : Scalar(1);
  const Scalar off = normalize ? Scalar(-1) : Scalar(0);
  const Scalar rs = normalize ? Scalar(1) / std::hypot(Scalar(s.h), Scalar(s.w)) : Scalar(1);
  for (Index n = 0; n < s.n; ++n) {
    out.plane(n, 0) = batch.plane(n, 0);
    if (mode == CoordMode::cartesian) {
      auto x = out.plane(n, 1);
      auto y = out.plane(n, 2);
      for (Index r = 0; r < s.h; ++r)
        for (Index c = 0; c < s.w; ++c) {
          x(r, c) = Scalar(c) * xs + off;
          y(r, c) = Scalar(r) * ys + off;
        }
    } else {
      const Point& apex = apexes.size() == 1 ? apexes[0] : apexes[n];
      auto d = out.plane(n, 1);
      for (Index r = 0; r < s.h; ++r)
        for (Index c = 0; c < s.w; ++c)
          d(r, c) = static_cast<Scalar>(std::hypot(double(r) - apex.row, double(c) - apex.col)) * rs;
    }
  }
  return out;
}

}  // namespace effseg
