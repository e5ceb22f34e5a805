#pragma once

// Field-of-view masking, burned-in cross detection (normalized cross-correlation
// plus an edge-density check), harmonic inpainting and the crop/pad pipeline.

#include "effseg/image.hpp"

#include <optional>
#include <vector>

namespace effseg {

struct FovGeometry {
  enum class Kind { rectangle, cone };
  Kind kind = Kind::rectangle;
  // rectangle: half-open row/col bounds
  int row0 = 0, row1 = 0, col0 = 0, col1 = 0;
  // cone: apex may lie outside the image (above the top row)
  Point apex;
  double half_angle_deg = 30.0;
  double rmin = 0.0;
  double rmax = 0.0;

  static FovGeometry rectangle(int row0, int row1, int col0, int col1) {
    FovGeometry g;
    g.kind = Kind::rectangle;
    g.row0 = row0;
    g.row1 = row1;
    g.col0 = col0;
    g.col1 = col1;
    return g;
  }
  static FovGeometry cone(Point apex, double half_angle_deg, double rmin, double rmax) {
    FovGeometry g;
    g.kind = Kind::cone;
    g.apex = apex;
    g.half_angle_deg = half_angle_deg;
    g.rmin = rmin;
    g.rmax = rmax;
    return g;
  }
};

/// Throws std::invalid_argument for degenerate geometry.
void validate(const FovGeometry& g, int height, int width);

/// Per-pixel membership test: rectangle bounds, or cone radius in [rmin, rmax]
/// and angle within +-half_angle of straight down.
bool fov_contains(const FovGeometry& g, int row, int col);

Mask fov_mask(int height, int width, const FovGeometry& g);

/// Cross template: 1 on the arms, 0 on a one-pixel halo around them, 0.5 elsewhere.
Image make_cross_template(int size);

struct DetectOptions {
  double threshold = 0.8;       // minimum normalized cross-correlation
  double edge_gradient = 0.1;   // gradient magnitude counted as an edge pixel
  double min_edge_fraction = 0.15;
};

/// Normalized cross-correlation at every position where the template fits;
/// entries for zero-variance patches (and positions where it does not fit) are 0.
Eigen::ArrayXXd normalized_cross_correlation(const Image& image, const Image& templ);

/// Centers of NCC local maxima >= threshold after non-maximum suppression within
/// one template radius; candidates whose patch has too few edge pixels are dropped.
std::vector<Pixel> detect_crosses(const Image& image, const Image& templ, const DetectOptions& opts = {});

struct InpaintOptions {
  double tolerance = 1e-4;
  int max_iterations = 10000;
};

/// Harmonic fill: Gauss-Seidel 4-neighbour averaging over hole pixels until the
/// largest per-iteration change drops below tolerance. Non-hole pixels are untouched.
Image inpaint(const Image& image, const Mask& hole, const InpaintOptions& opts = {});

/// Union of template-sized boxes centred on the given positions.
Mask footprint_mask(int height, int width, const std::vector<Pixel>& centers, int template_size);

struct CropBounds {
  int row0 = 0, col0 = 0, height = 0, width = 0;  // crop window in the source image
  int pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;

  int out_height() const { return height + pad_top + pad_bottom; }
  int out_width() const { return width + pad_left + pad_right; }
};

/// Bounding box of the FOV mask, padded symmetrically (extra pixel bottom/right)
/// up to multiples of `divisor`.
CropBounds crop_bounds(const Mask& fov, int divisor);

Image apply_crop(const Image& img, const CropBounds& b);
Mask apply_crop(const Mask& m, const CropBounds& b);

struct PreprocResult {
  Image image;
  CropBounds crop;
  std::vector<Pixel> detections;  // in source-image coordinates
  Mask footprint;                 // in source-image coordinates
};

/// FOV masking and inpainting of detected crosses, followed by crop and pad.
PreprocResult preprocess_pipeline(const Image& image, const FovGeometry& geom, const Image& templ,
                                  const DetectOptions& detect = {}, int divisor = 8);

}  // namespace effseg
