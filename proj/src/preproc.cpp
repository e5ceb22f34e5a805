#include "effseg/preproc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace effseg {

void validate(const FovGeometry& g, int height, int width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("fov: empty image");
  if (g.kind == FovGeometry::Kind::rectangle) {
    if (g.row0 < 0 || g.col0 < 0 || g.row1 > height || g.col1 > width || g.row0 >= g.row1 || g.col0 >= g.col1)
      throw std::invalid_argument("fov: rectangle bounds outside the image or empty");
    return;
  }
  if (!(g.half_angle_deg > 0.0 && g.half_angle_deg < 90.0))
    throw std::invalid_argument("fov: cone half-angle must be in (0, 90) degrees");
  if (!(g.rmin >= 0.0 && g.rmin < g.rmax)) throw std::invalid_argument("fov: cone needs 0 <= rmin < rmax");
}

bool fov_contains(const FovGeometry& g, int row, int col) {
  if (g.kind == FovGeometry::Kind::rectangle) return row >= g.row0 && row < g.row1 && col >= g.col0 && col < g.col1;
  const double dr = row - g.apex.row;
  const double dc = col - g.apex.col;
  const double dist = std::hypot(dr, dc);
  if (dist < g.rmin || dist > g.rmax) return false;
  const double angle = std::atan2(dc, dr) * 180.0 / std::numbers::pi;  // 0 = straight down
  return std::abs(angle) <= g.half_angle_deg;
}

Mask fov_mask(int height, int width, const FovGeometry& g) {
  validate(g, height, width);
  Mask m(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) m(r, c) = fov_contains(g, r, c) ? 1 : 0;
  return m;
}

Image make_cross_template(int size) {
  if (size < 3 || size % 2 == 0) throw std::invalid_argument("cross template size must be odd and >= 3");
  const int h = size / 2;
  Image t = Image::Constant(size, size, 0.5f);
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      if (std::abs(r - h) <= 1 || std::abs(c - h) <= 1) t(r, c) = 0.0f;
  t.row(h).setOnes();
  t.col(h).setOnes();
  return t;
}

Eigen::ArrayXXd normalized_cross_correlation(const Image& image, const Image& templ) {
  const int H = static_cast<int>(image.rows());
  const int W = static_cast<int>(image.cols());
  const int th = static_cast<int>(templ.rows());
  const int tw = static_cast<int>(templ.cols());
  Eigen::ArrayXXd ncc = Eigen::ArrayXXd::Zero(H, W);
  if (th > H || tw > W) return ncc;

  const Eigen::ArrayXXd t = templ.cast<double>();
  const Eigen::ArrayXXd tz = t - t.mean();
  const double tnorm = std::sqrt(tz.square().sum());
  if (tnorm <= 0.0) return ncc;
  const double count = double(th) * tw;
  const int ry = th / 2;
  const int rx = tw / 2;

  for (int r = 0; r + th <= H; ++r)
    for (int c = 0; c + tw <= W; ++c) {
      const Eigen::ArrayXXd p = image.block(r, c, th, tw).cast<double>();
      const double mean = p.sum() / count;
      const double var = (p - mean).square().sum();
      if (var < 1e-12) continue;  // flat patch: correlation undefined
      ncc(r + ry, c + rx) = ((p - mean) * tz).sum() / (std::sqrt(var) * tnorm);
    }
  return ncc;
}

namespace {

double edge_fraction(const Image& img, int r0, int c0, int h, int w, double threshold) {
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  int edges = 0;
  for (int r = r0; r < r0 + h; ++r)
    for (int c = c0; c < c0 + w; ++c) {
      const double gx = 0.5 * (img(r, std::min(c + 1, W - 1)) - img(r, std::max(c - 1, 0)));
      const double gy = 0.5 * (img(std::min(r + 1, H - 1), c) - img(std::max(r - 1, 0), c));
      if (std::hypot(gx, gy) > threshold) ++edges;
    }
  return double(edges) / (double(h) * w);
}

}  // namespace

std::vector<Pixel> detect_crosses(const Image& image, const Image& templ, const DetectOptions& opts) {
  const Eigen::ArrayXXd ncc = normalized_cross_correlation(image, templ);
  const int ry = static_cast<int>(templ.rows()) / 2;
  const int rx = static_cast<int>(templ.cols()) / 2;
  const int radius = std::max(ry, rx);

  struct Candidate {
    double score;
    Pixel at;
  };
  std::vector<Candidate> cands;
  for (int r = 0; r < ncc.rows(); ++r)
    for (int c = 0; c < ncc.cols(); ++c)
      if (ncc(r, c) >= opts.threshold) cands.push_back({ncc(r, c), {r, c}});
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

  std::vector<Pixel> kept;
  for (const auto& cand : cands) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Pixel& k) {
      return std::abs(k.row - cand.at.row) <= radius && std::abs(k.col - cand.at.col) <= radius;
    });
    if (suppressed) continue;
    if (edge_fraction(image, cand.at.row - ry, cand.at.col - rx, static_cast<int>(templ.rows()),
                      static_cast<int>(templ.cols()), opts.edge_gradient) < opts.min_edge_fraction)
      continue;
    kept.push_back(cand.at);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Pixel& a, const Pixel& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  return kept;
}

Image inpaint(const Image& image, const Mask& hole, const InpaintOptions& opts) {
  if (hole.rows() != image.rows() || hole.cols() != image.cols())
    throw std::invalid_argument("inpaint: hole mask and image differ in size");
  const Index holes = area(hole);
  if (holes == 0) return image;
  if (holes == hole.size()) throw std::invalid_argument("inpaint: hole covers the entire image");

  const int H = static_cast<int>(image.rows());
  const int W = static_cast<int>(image.cols());
  Eigen::ArrayXXd f = image.cast<double>();
  std::vector<Pixel> pixels;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c)
      if (hole(r, c)) pixels.push_back({r, c});

  // start from the mean of the known pixels bordering the hole
  double ring = 0.0;
  int ring_n = 0;
  for (const auto& p : pixels) {
    constexpr int dr[] = {-1, 1, 0, 0};
    constexpr int dc[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const int rr = p.row + dr[k];
      const int cc = p.col + dc[k];
      if (rr >= 0 && rr < H && cc >= 0 && cc < W && !hole(rr, cc)) {
        ring += f(rr, cc);
        ++ring_n;
      }
    }
  }
  const double init = ring_n ? ring / ring_n : 0.0;
  for (const auto& p : pixels) f(p.row, p.col) = init;

  for (int it = 0; it < opts.max_iterations; ++it) {
    double max_change = 0.0;
    for (const auto& p : pixels) {
      double sum = 0.0;
      int n = 0;
      if (p.row > 0) sum += f(p.row - 1, p.col), ++n;
      if (p.row + 1 < H) sum += f(p.row + 1, p.col), ++n;
      if (p.col > 0) sum += f(p.row, p.col - 1), ++n;
      if (p.col + 1 < W) sum += f(p.row, p.col + 1), ++n;
      const double v = sum / n;
      max_change = std::max(max_change, std::abs(v - f(p.row, p.col)));
      f(p.row, p.col) = v;
    }
    if (max_change < opts.tolerance) break;
  }

  Image out = image;
  for (const auto& p : pixels) out(p.row, p.col) = static_cast<float>(f(p.row, p.col));
  return out;
}

Mask footprint_mask(int height, int width, const std::vector<Pixel>& centers, int template_size) {
  Mask m = Mask::Zero(height, width);
  const int r = template_size / 2;
  for (const auto& p : centers)
    for (int y = std::max(0, p.row - r); y <= std::min(height - 1, p.row + r); ++y)
      for (int x = std::max(0, p.col - r); x <= std::min(width - 1, p.col + r); ++x) m(y, x) = 1;
  return m;
}

CropBounds crop_bounds(const Mask& fov, int divisor) {
  if (divisor < 1) throw std::invalid_argument("crop_bounds: divisor must be >= 1");
  int r0 = static_cast<int>(fov.rows()), r1 = -1, c0 = static_cast<int>(fov.cols()), c1 = -1;
  for (int r = 0; r < fov.rows(); ++r)
    for (int c = 0; c < fov.cols(); ++c)
      if (fov(r, c)) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  if (r1 < 0) throw std::invalid_argument("crop_bounds: empty field of view");
  CropBounds b;
  b.row0 = r0;
  b.col0 = c0;
  b.height = r1 - r0 + 1;
  b.width = c1 - c0 + 1;
  const int ph = (divisor - b.height % divisor) % divisor;
  const int pw = (divisor - b.width % divisor) % divisor;
  b.pad_top = ph / 2;
  b.pad_bottom = ph - ph / 2;
  b.pad_left = pw / 2;
  b.pad_right = pw - pw / 2;
  return b;
}

namespace {

template <typename Arr>
Arr crop_impl(const Arr& a, const CropBounds& b) {
  if (b.row0 < 0 || b.col0 < 0 || b.row0 + b.height > a.rows() || b.col0 + b.width > a.cols())
    throw std::invalid_argument("apply_crop: crop window outside the image");
  Arr out = Arr::Zero(b.out_height(), b.out_width());
  out.block(b.pad_top, b.pad_left, b.height, b.width) = a.block(b.row0, b.col0, b.height, b.width);
  return out;
}

}  // namespace

Image apply_crop(const Image& img, const CropBounds& b) { return crop_impl(img, b); }
Mask apply_crop(const Mask& m, const CropBounds& b) { return crop_impl(m, b); }

PreprocResult preprocess_pipeline(const Image& image, const FovGeometry& geom, const Image& templ,
                                  const DetectOptions& detect, int divisor) {
  const int H = static_cast<int>(image.rows());
  const int W = static_cast<int>(image.cols());
  const Mask fov = fov_mask(H, W, geom);
  Image masked = image * fov.cast<float>();

  PreprocResult out;
  out.detections = detect_crosses(masked, templ, detect);
  out.footprint = footprint_mask(H, W, out.detections, static_cast<int>(templ.rows()));
  if (!out.detections.empty()) {
    masked = inpaint(masked, out.footprint);
    masked *= fov.cast<float>();
  }
  out.crop = crop_bounds(fov, divisor);
  out.image = apply_crop(masked, out.crop);
  return out;
}

}  // namespace effseg
