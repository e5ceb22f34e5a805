#pragma once

#include "effseg/image.hpp"
#include "effseg/phantom.hpp"

#include <optional>
#include <random>

namespace effseg {

/// Probability and magnitude range for every transform of the augmentation menu.
struct AugmentConfig {
  double p_rotation = 0.2;
  Range rotation_deg{-25.0, 25.0};
  double p_scale = 0.2;
  Range scale{0.7, 1.4};
  double p_noise = 0.15;
  Range noise_sigma{0.0, 0.1};
  double p_blur = 0.2;
  Range blur_sigma{0.5, 1.5};
  double p_brightness = 0.15;
  Range brightness{0.7, 1.3};
  double p_contrast = 0.15;
  Range contrast{0.65, 1.5};
  double p_lowres = 0.25;
  Range lowres{1.0, 2.0};
  double p_gamma = 0.3;
  Range gamma{0.7, 1.5};
  double p_mirror = 0.5;  // left-right only

  void validate() const;
  static AugmentConfig none();
};

struct Augmented {
  Image image;
  Mask mask;
  std::optional<Point> apex;  // probe apex carried through the spatial transform
};

/// Applies each transform independently with its probability. Rotation and
/// scaling share one affine resample about the image centre (bilinear for the
/// image, nearest for the mask); positive angles rotate counter-clockwise as
/// displayed. Intensities are clamped to [0, 1] after every intensity transform.
Augmented augment_sample(const Image& image, const Mask& mask, const AugmentConfig& cfg, std::mt19937_64& rng,
                         std::optional<Point> apex = std::nullopt);

}  // namespace effseg
