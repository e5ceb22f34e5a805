#include "effseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace effseg {

std::string to_string(Probe p) { return p == Probe::linear ? "linear" : "curved"; }

Probe probe_from_string(const std::string& s) {
  if (s == "linear") return Probe::linear;
  if (s == "curved") return Probe::curved;
  throw std::invalid_argument("unknown probe '" + s + "' (expected linear or curved)");
}

void PhantomSpec::validate() const {
  auto range_ok = [](const Range& r) { return r.lo <= r.hi; };
  if (height < 16 || width < 16) throw std::invalid_argument("phantom: image must be at least 16x16");
  if (!range_ok(depth) || !range_ok(thickness) || !range_ok(lateral) || !range_ok(wave_cycles) ||
      !range_ok(rib_shadows) || !range_ok(gate_offset) || gate_offset.lo < 0.0)
    throw std::invalid_argument("phantom: empty geometry range (lo > hi)");
  if (thickness.lo < 1.0) throw std::invalid_argument("phantom: thickness must be at least 1 pixel");
  if (lateral.lo < 3.0) throw std::invalid_argument("phantom: lateral extent must be at least 3 pixels");
  if (rib_shadows.lo < 0.0) throw std::invalid_argument("phantom: negative rib shadow count");
  if (waviness < 0.0 || waviness >= 1.0) throw std::invalid_argument("phantom: waviness must be in [0, 1)");
  if (speckle < 0.0 || speckle >= 1.0) throw std::invalid_argument("phantom: speckle must be in [0, 1)");
  if (cross_size < 3 || cross_size % 2 == 0) throw std::invalid_argument("phantom: cross size must be odd and >= 3");
  if (probe == Probe::linear && 2 * linear_margin >= width) throw std::invalid_argument("phantom: margins too wide");
  effseg::validate(fov_geometry(*this), height, width);
}

PhantomSpec preset_a() { return PhantomSpec{}; }

PhantomSpec preset_b() {
  PhantomSpec s;
  s.probe = Probe::curved;
  s.depth = {22.0, 34.0};
  s.thickness = {16.0, 36.0};
  s.lateral = {44.0, 72.0};
  return s;
}

PhantomSpec preset_gated() {
  PhantomSpec s;
  s.depth_gated = true;
  s.burn_crosses = false;
  s.height = 256;
  s.width = 64;
  s.linear_margin = 4;
  s.gate_row = 128.0;
  s.gate_offset = {40.0, 64.0};
  s.thickness = {14.0, 26.0};
  s.lateral = {24.0, 40.0};
  s.rib_shadows = {0.0, 0.0};
  return s;
}

PhantomSpec preset_by_name(const std::string& name) {
  if (name == "A") return preset_a();
  if (name == "B") return preset_b();
  if (name == "gated") return preset_gated();
  throw std::invalid_argument("unknown phantom preset '" + name + "' (expected A, B or gated)");
}

int preset_size(const std::string& name) {
  if (name == "A") return 51;
  if (name == "B") return 92;
  if (name == "gated") return 100;
  throw std::invalid_argument("unknown phantom preset '" + name + "'");
}

FovGeometry fov_geometry(const PhantomSpec& spec) {
  if (spec.probe == Probe::linear)
    return FovGeometry::rectangle(0, spec.height, spec.linear_margin, spec.width - spec.linear_margin);
  return FovGeometry::cone(spec.apex, spec.cone_half_angle, spec.cone_rmin, spec.cone_rmax);
}

std::string sample_id(int index, int count) {
  const int digits = std::max(3, static_cast<int>(std::to_string(std::max(count - 1, 0)).size()));
  std::string s = std::to_string(index);
  return std::string(static_cast<std::size_t>(std::max(0, digits - static_cast<int>(s.size()))), '0') + s;
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

int int_in(Rng& rng, const Range& r) {
  const int lo = static_cast<int>(std::ceil(r.lo));
  const int hi = static_cast<int>(std::floor(r.hi));
  if (lo > hi) throw std::invalid_argument("phantom: range contains no integer");
  return uniform_int(rng, lo, hi);
}

/// Per-column run of foreground rows relative to an anchor row.
struct Lens {
  int center_col = 0;
  int half = 0;
  std::vector<int> thick;  // indexed by column offset + half

  int thickness_at(int c) const {
    const int k = c - center_col + half;
    return (k < 0 || k >= static_cast<int>(thick.size())) ? 0 : thick[k];
  }
};

Lens make_lens(Rng& rng, const PhantomSpec& spec, int T, double width) {
  Lens lens;
  lens.half = std::max(1, static_cast<int>(std::floor(width / 2.0)));
  const double cycles = uniform(rng, spec.wave_cycles.lo, spec.wave_cycles.hi);
  lens.thick.resize(2 * lens.half + 1);
  for (int k = -lens.half; k <= lens.half; ++k) {
    const double u = double(k) / (lens.half + 1);
    const double p = std::sqrt(std::max(0.0, 1.0 - u * u));
    const double s = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * cycles * k / (2.0 * lens.half + 1));
    lens.thick[k + lens.half] = k == 0 ? T : static_cast<int>(std::floor(T * p * (1.0 - spec.waviness * s)));
  }
  return lens;
}

void burn_cross(Image& img, Pixel at, int size) {
  const int h = size / 2;
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  for (int dr = -h; dr <= h; ++dr)
    for (int dc = -h; dc <= h; ++dc) {
      const int r = at.row + dr;
      const int c = at.col + dc;
      if (r < 0 || r >= H || c < 0 || c >= W) continue;
      if (dr == 0 || dc == 0)
        img(r, c) = 1.0f;
      else if (std::abs(dr) <= 1 || std::abs(dc) <= 1)
        img(r, c) = 0.0f;
    }
}

void draw_rib_shadows(Eigen::ArrayXXd& field, Rng& rng, const PhantomSpec& spec, const std::vector<double>& top,
                      int col0, int col1) {
  const int count = int_in(rng, spec.rib_shadows);
  for (int k = 0; k < count; ++k) {
    const double cc = uniform(rng, col0, col1 - 1);
    const double hw = uniform(rng, 4.0, 7.0);
    const int ci = std::clamp(static_cast<int>(std::lround(cc)), 0, spec.width - 1);
    const double start = top[ci] - spec.pleura_gap - 4.0;
    for (int r = 0; r < spec.height; ++r) {
      const double vertical = std::clamp((r - start) / 3.0, 0.0, 1.0);
      if (vertical <= 0.0) continue;
      const double w = hw + 0.06 * (r - start);
      for (int c = 0; c < spec.width; ++c) {
        const double lateral = std::clamp((w - std::abs(c - cc)) / 2.0, 0.0, 1.0);
        field(r, c) *= 1.0 - (1.0 - spec.rib_shadow_factor) * vertical * lateral;
      }
    }
  }
}

void draw_margin_marks(Image& img, const Mask& fov, const PhantomSpec& spec) {
  // depth ruler and a grey bar outside the imaging region
  for (int r = 4; r < spec.height; r += 16)
    for (int c = 1; c < 5; ++c)
      if (!fov(r, c)) img(r, c) = 0.85f;
  for (int r = 16; r < spec.height - 16; ++r)
    for (int c = spec.width - 4; c < spec.width - 1; ++c)
      if (!fov(r, c)) img(r, c) = static_cast<float>(double(r - 16) / (spec.height - 32));
}

Image finish_texture(Eigen::ArrayXXd field, Rng& rng, const PhantomSpec& spec, const Mask& fov) {
  Image img(spec.height, spec.width);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c) img(r, c) = static_cast<float>(field(r, c) * (1.0 + spec.speckle * u(rng)));
  if (spec.speckle_blur > 0.0) img = gaussian_blur(img, spec.speckle_blur);
  img = (img * fov.cast<float>()).cwiseMax(0.0f).cwiseMin(1.0f);
  draw_margin_marks(img, fov, spec);
  return img;
}

Image blur_field(const Eigen::ArrayXXd& field, double sigma) {
  Image tmp = field.cast<float>();
  return sigma > 0.0 ? gaussian_blur(tmp, sigma) : tmp;
}

Sample layered_sample(const PhantomSpec& spec, Rng& rng, const Mask& fov) {
  const int H = spec.height;
  const int W = spec.width;
  const FovGeometry geom = fov_geometry(spec);

  const int T = int_in(rng, spec.thickness);
  const double d = uniform(rng, spec.depth.lo, spec.depth.hi);
  const double width = uniform(rng, spec.lateral.lo, spec.lateral.hi);
  Lens lens = make_lens(rng, spec, T, width);

  int lo_col, hi_col;
  if (spec.probe == Probe::linear) {
    lo_col = spec.linear_margin + lens.half + 2;
    hi_col = W - spec.linear_margin - lens.half - 3;
  } else {
    const int ac = static_cast<int>(std::lround(spec.apex.col));
    lo_col = ac - 10;
    hi_col = ac + 10;
  }
  if (lo_col > hi_col) throw std::invalid_argument("phantom: effusion wider than the field of view");
  lens.center_col = uniform_int(rng, lo_col, hi_col);
  const int cm = lens.center_col;

  // pleural surface: effusion top per column, equal to d at the deepest column
  std::vector<double> top(W);
  if (spec.probe == Probe::linear) {
    const double amp = uniform(rng, 0.0, 3.0);
    const double period = uniform(rng, 60.0, 160.0);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    auto wave = [&](double c) { return std::sin(2.0 * std::numbers::pi * c / period + phase); };
    for (int c = 0; c < W; ++c) top[c] = d + amp * (wave(c) - wave(cm));
  } else {
    const double R = std::hypot(d - spec.apex.row, cm - spec.apex.col);
    for (int c = 0; c < W; ++c) {
      const double dc = c - spec.apex.col;
      top[c] = dc * dc < R * R ? spec.apex.row + std::sqrt(R * R - dc * dc) : double(H);
    }
  }
  const int top_cm = static_cast<int>(std::lround(top[cm]));
  if (top_cm < 2 || top_cm + T > H - 2) throw std::invalid_argument("phantom: effusion does not fit vertically");

  Sample s;
  s.mask = Mask::Zero(H, W);
  Eigen::ArrayXXd field(H, W);
  for (int c = 0; c < W; ++c) {
    const int t0 = static_cast<int>(std::lround(top[c]));
    const int th = lens.thickness_at(c);
    for (int r = 0; r < H; ++r) {
      const bool fluid = th > 0 && r >= t0 && r < t0 + th;
      if (fluid && fov(r, c)) s.mask(r, c) = 1;
      field(r, c) = fluid ? spec.effusion_mean : (r < t0 ? spec.tissue_mean : spec.lung_mean);
    }
  }
  if (!fov_contains(geom, top_cm, cm) || !fov_contains(geom, top_cm + T - 1, cm))
    throw std::invalid_argument("phantom: deepest column leaves the field of view");

  Image blurred = blur_field(field, spec.edge_softness);
  field = blurred.cast<double>();
  const double ridge_sigma = 1.2;
  for (int c = 0; c < W; ++c) {
    const double centre = top[c] - spec.pleura_gap;
    for (int r = 0; r < H; ++r) {
      const double z = (r - centre) / ridge_sigma;
      field(r, c) += (spec.pleura_peak - spec.tissue_mean) * std::exp(-0.5 * z * z);
    }
  }
  int col0 = 0, col1 = W;
  if (spec.probe == Probe::linear) {
    col0 = spec.linear_margin;
    col1 = W - spec.linear_margin;
  }
  draw_rib_shadows(field, rng, spec, top, col0, col1);
  s.image = finish_texture(std::move(field), rng, spec, fov);
  return s;
}

Sample gated_sample(const PhantomSpec& spec, Rng& rng, const Mask& fov) {
  const int H = spec.height;
  const int W = spec.width;
  const int T = int_in(rng, spec.thickness);
  const double width = uniform(rng, spec.lateral.lo, spec.lateral.hi);
  Lens lens = make_lens(rng, spec, T, width);

  const int col_lo = spec.linear_margin + lens.half + 2;
  const int col_hi = W - spec.linear_margin - lens.half - 3;
  const int gate = static_cast<int>(std::ceil(spec.gate_row));
  const int up = T / 2;         // rows above the anchor
  const int down = T - up - 1;  // rows below the anchor
  // target anchor gate + offset, decoy anchor gate - 1 - offset
  const int off_lo = std::max(static_cast<int>(std::ceil(spec.gate_offset.lo)), up);
  const int off_hi = static_cast<int>(std::floor(spec.gate_offset.hi));
  if (col_lo > col_hi || off_lo > off_hi || gate + off_hi + down >= H || gate - 1 - off_hi - down < 0)
    throw std::invalid_argument("phantom: gated regions do not fit in the image");

  const int target_row = gate + uniform_int(rng, off_lo, off_hi);
  const int decoy_row = gate - 1 - uniform_int(rng, off_lo, off_hi);
  const int target_col = uniform_int(rng, col_lo, col_hi);
  const int decoy_col = uniform_int(rng, col_lo, col_hi);

  Sample s;
  s.mask = Mask::Zero(H, W);
  Eigen::ArrayXXd field = Eigen::ArrayXXd::Constant(H, W, spec.tissue_mean);
  auto stamp = [&](int anchor_row, int centre_col, bool label) {
    for (int k = -lens.half; k <= lens.half; ++k) {
      const int th = lens.thick[k + lens.half];
      const int c = centre_col + k;
      const int r0 = anchor_row - th / 2;
      for (int r = r0; r < r0 + th; ++r) {
        field(r, c) = spec.effusion_mean;
        if (label && fov(r, c)) s.mask(r, c) = 1;
      }
    }
  };
  stamp(decoy_row, decoy_col, false);
  stamp(target_row, target_col, true);

  Image blurred = blur_field(field, spec.edge_softness);
  field = blurred.cast<double>();
  std::vector<double> top(W, double(gate));
  draw_rib_shadows(field, rng, spec, top, spec.linear_margin, W - spec.linear_margin);
  s.image = finish_texture(std::move(field), rng, spec, fov);
  return s;
}

}  // namespace

Sample generate_sample(const PhantomSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const Mask fov = fov_mask(spec.height, spec.width, fov_geometry(spec));
  Sample s = spec.depth_gated ? gated_sample(spec, rng, fov) : layered_sample(spec, rng, fov);
  s.probe = spec.probe;
  if (spec.probe == Probe::curved) s.apex = spec.apex;
  s.crosses = deepest_column_endpoints(s.mask);
  if (spec.burn_crosses)
    for (const auto& p : s.crosses) burn_cross(s.image, p, spec.cross_size);
  return s;
}

std::vector<Sample> generate_dataset(int n, const PhantomSpec& spec, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Sample s = generate_sample(spec, seed + static_cast<std::uint64_t>(i));
    s.id = sample_id(i, n);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> generate_depth_gated_dataset(int n, const PhantomSpec& spec, std::uint64_t seed) {
  if (!spec.depth_gated) throw std::invalid_argument("generate_depth_gated_dataset: spec.depth_gated must be set");
  return generate_dataset(n, spec, seed);
}

Mask simulate_observer(const Mask& mask, double strength, std::uint64_t seed, const Mask* fov) {
  if (strength < 0.0) throw std::invalid_argument("simulate_observer: strength must be >= 0");
  if (fov && (fov->rows() != mask.rows() || fov->cols() != mask.cols()))
    throw std::invalid_argument("simulate_observer: fov and mask differ in size");
  if (area(mask) == 0) return mask;

  const int H = static_cast<int>(mask.rows());
  const int W = static_cast<int>(mask.cols());
  Eigen::ArrayXXd level = signed_distance(mask);
  if (strength > 0.0) {
    Rng rng(seed);
    std::normal_distribution<float> n01(0.0f, 1.0f);
    Image noise(H, W);
    for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = n01(rng);
    const Image smooth = gaussian_blur(noise, 6.0);
    const double mean = smooth.cast<double>().mean();
    const double sd = std::sqrt((smooth.cast<double>() - mean).square().mean());
    if (sd > 0.0) level += strength * (smooth.cast<double>() - mean) / sd;
  }
  Mask out(H, W);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) out(r, c) = level(r, c) > 0.0 ? 1 : 0;
  if (fov) out *= *fov;
  out = largest_component(out);
  return out;
}

}  // namespace effseg
