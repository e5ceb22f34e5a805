#include "effseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace effseg {

void AugmentConfig::validate() const {
  for (double p : {p_rotation, p_scale, p_noise, p_blur, p_brightness, p_contrast, p_lowres, p_gamma, p_mirror})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("augment: probabilities must lie in [0, 1]");
  for (const Range& r : {rotation_deg, scale, noise_sigma, blur_sigma, brightness, contrast, lowres, gamma})
    if (r.lo > r.hi) throw std::invalid_argument("augment: empty magnitude range");
  if (scale.lo <= 0.0 || lowres.lo < 1.0 || gamma.lo <= 0.0 || noise_sigma.lo < 0.0 || blur_sigma.lo < 0.0)
    throw std::invalid_argument("augment: magnitude range out of domain");
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.p_rotation = c.p_scale = c.p_noise = c.p_blur = c.p_brightness = 0.0;
  c.p_contrast = c.p_lowres = c.p_gamma = c.p_mirror = 0.0;
  return c;
}

namespace {

using Rng = std::mt19937_64;

bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

double draw(Rng& rng, const Range& r) {
  return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

double snap(double v) {
  const double k = std::round(v);
  return std::abs(v - k) < 1e-12 ? k : v;
}

void clamp01(Image& img) { img = img.cwiseMax(0.0f).cwiseMin(1.0f); }

float bilinear(const Image& img, double r, double c) {
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  const int r0 = static_cast<int>(std::floor(r));
  const int c0 = static_cast<int>(std::floor(c));
  const double fr = r - r0;
  const double fc = c - c0;
  auto at = [&](int rr, int cc) -> double { return rr < 0 || rr >= H || cc < 0 || cc >= W ? 0.0 : img(rr, cc); };
  const double v = (1 - fr) * ((1 - fc) * at(r0, c0) + fc * at(r0, c0 + 1)) +
                   fr * ((1 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1));
  return static_cast<float>(v);
}

void affine(Augmented& a, double angle_deg, double scale) {
  const int H = static_cast<int>(a.image.rows());
  const int W = static_cast<int>(a.image.cols());
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cs = snap(std::cos(theta));
  const double sn = snap(std::sin(theta));
  const double cy = (H - 1) / 2.0;
  const double cx = (W - 1) / 2.0;

  Image img(H, W);
  Mask msk(H, W);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const double dy = r - cy;
      const double dx = c - cx;
      const double sr = cy + (cs * dy + sn * dx) / scale;
      const double sc = cx + (-sn * dy + cs * dx) / scale;
      img(r, c) = bilinear(a.image, sr, sc);
      const long nr = std::lround(sr);
      const long nc = std::lround(sc);
      msk(r, c) = nr < 0 || nr >= H || nc < 0 || nc >= W ? 0 : a.mask(nr, nc);
    }
  a.image = std::move(img);
  a.mask = std::move(msk);
  if (a.apex) {
    const double dy = a.apex->row - cy;
    const double dx = a.apex->col - cx;
    a.apex = Point{cy + scale * (cs * dy - sn * dx), cx + scale * (sn * dy + cs * dx)};
  }
}

Image low_resolution(const Image& img, double factor) {
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  const int h = std::max(1, static_cast<int>(std::lround(H / factor)));
  const int w = std::max(1, static_cast<int>(std::lround(W / factor)));
  Image low(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      low(i, j) = img(std::min(H - 1, static_cast<int>((i + 0.5) * H / h)),
                      std::min(W - 1, static_cast<int>((j + 0.5) * W / w)));
  Image out(H, W);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) out(r, c) = low(std::min(h - 1, r * h / H), std::min(w - 1, c * w / W));
  return out;
}

}  // namespace

Augmented augment_sample(const Image& image, const Mask& mask, const AugmentConfig& cfg, std::mt19937_64& rng,
                         std::optional<Point> apex) {
  if (image.rows() != mask.rows() || image.cols() != mask.cols())
    throw std::invalid_argument("augment_sample: image and mask differ in size");
  Augmented a{image, mask, apex};

  const bool rotate = coin(rng, cfg.p_rotation);
  const double angle = rotate ? draw(rng, cfg.rotation_deg) : 0.0;
  const bool zoom = coin(rng, cfg.p_scale);
  const double scale = zoom ? draw(rng, cfg.scale) : 1.0;
  if (rotate || zoom) affine(a, angle, scale);

  if (coin(rng, cfg.p_noise)) {
    const double sigma = draw(rng, cfg.noise_sigma);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Index i = 0; i < a.image.size(); ++i) a.image.data()[i] += static_cast<float>(sigma * n(rng));
    clamp01(a.image);
  }
  if (coin(rng, cfg.p_blur)) {
    a.image = gaussian_blur(a.image, draw(rng, cfg.blur_sigma));
    clamp01(a.image);
  }
  if (coin(rng, cfg.p_brightness)) {
    a.image *= static_cast<float>(draw(rng, cfg.brightness));
    clamp01(a.image);
  }
  if (coin(rng, cfg.p_contrast)) {
    const float f = static_cast<float>(draw(rng, cfg.contrast));
    const float m = a.image.mean();
    a.image = (a.image - m) * f + m;
    clamp01(a.image);
  }
  if (coin(rng, cfg.p_lowres)) {
    a.image = low_resolution(a.image, draw(rng, cfg.lowres));
    clamp01(a.image);
  }
  if (coin(rng, cfg.p_gamma)) {
    a.image = a.image.pow(static_cast<float>(draw(rng, cfg.gamma)));
    clamp01(a.image);
  }
  if (coin(rng, cfg.p_mirror)) {
    a.image = a.image.rowwise().reverse().eval();
    a.mask = a.mask.rowwise().reverse().eval();
    if (a.apex) a.apex->col = (image.cols() - 1) - a.apex->col;
  }
  return a;
}

}  // namespace effseg
