#include "effseg/phantom.hpp"
#include "effseg/preproc.hpp"

#include <doctest.h>

#include <cmath>
#include <bit>
#include <cstring>
#include <numbers>

using namespace effseg;

namespace {

bool bit_equal(const Image& a, const Image& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * std::size_t(a.size())) == 0;
}

bool brute_cone(const FovGeometry& g, int r, int c) {
  const double dy = r - g.apex.row, dx = c - g.apex.col;
  const double rad = std::sqrt(dy * dy + dx * dx);
  if (rad < g.rmin || rad > g.rmax) return false;
  // angle from the downward axis via the dot product with (1, 0)
  const double ang = std::acos(std::clamp(dy / rad, -1.0, 1.0)) * 180.0 / std::numbers::pi;
  return ang <= g.half_angle_deg;
}

void burn(Image& img, Pixel at, int size) {
  const int h = size / 2;
  for (int dr = -h; dr <= h; ++dr)
    for (int dc = -h; dc <= h; ++dc) {
      const int r = at.row + dr, c = at.col + dc;
      if (r < 0 || c < 0 || r >= img.rows() || c >= img.cols()) continue;
      if (dr == 0 || dc == 0)
        img(r, c) = 1.0f;
      else if (std::abs(dr) <= 1 || std::abs(dc) <= 1)
        img(r, c) = 0.0f;
    }
}

}  // namespace

TEST_CASE("fov_mask examples") {
  CHECK((fov_mask(16, 20, FovGeometry::rectangle(0, 16, 0, 20)) == 1).all());

  const FovGeometry cone = FovGeometry::cone({-10.0, 32.0}, 30.0, 15.0, 70.0);
  CHECK(fov_contains(cone, 40, 32));
  CHECK(!fov_contains(cone, -10, 37));  // beside the apex, distance 5
  CHECK(!fov_contains(cone, -10, 27));
  const Mask m = fov_mask(64, 64, cone);
  CHECK(m(40, 32) == 1);

  const Mask rect = fov_mask(10, 10, FovGeometry::rectangle(2, 5, 3, 7));
  CHECK(area(rect) == 12);
  CHECK(rect(2, 3) == 1);
  CHECK(rect(5, 3) == 0);
}

TEST_CASE("cone fov_mask equals the brute-force geometric test") {
  for (const auto& g : {FovGeometry::cone({-10.0, 32.0}, 30.0, 15.0, 70.0),
                        FovGeometry::cone({-20.0, 64.0}, 36.0, 24.0, 146.0),
                        FovGeometry::cone({5.5, 20.25}, 60.0, 3.0, 40.0)}) {
    const Mask m = fov_mask(128, 128, g);
    for (int r = 0; r < 128; ++r)
      for (int c = 0; c < 128; ++c) CHECK(bool(m(r, c)) == brute_cone(g, r, c));
  }
}

TEST_CASE("degenerate geometry is rejected") {
  CHECK_THROWS_AS(fov_mask(10, 10, FovGeometry::rectangle(0, 11, 0, 10)), std::invalid_argument);
  CHECK_THROWS_AS(fov_mask(10, 10, FovGeometry::rectangle(4, 4, 0, 10)), std::invalid_argument);
  CHECK_THROWS_AS(fov_mask(10, 10, FovGeometry::cone({0, 5}, 90.0, 1, 5)), std::invalid_argument);
  CHECK_THROWS_AS(fov_mask(10, 10, FovGeometry::cone({0, 5}, 30.0, 6, 5)), std::invalid_argument);
}

TEST_CASE("cross template layout") {
  const Image t = make_cross_template(7);
  REQUIRE(t.rows() == 7);
  CHECK(t(3, 0) == 1.0f);
  CHECK(t(0, 3) == 1.0f);
  CHECK(t(2, 2) == 0.0f);
  CHECK(t(0, 0) == 0.5f);
  CHECK_THROWS_AS(make_cross_template(4), std::invalid_argument);
}

TEST_CASE("detect_crosses finds inserted crosses exactly") {
  PhantomSpec spec = preset_a();
  spec.burn_crosses = false;
  const Image templ = make_cross_template(7);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Sample s = generate_sample(spec, seed);
    CHECK(detect_crosses(s.image, templ).empty());
    Image img = s.image;
    const std::vector<Pixel> truth{{30, 40}, {70, 90}};
    for (const auto& p : truth) burn(img, p, 7);
    const auto found = detect_crosses(img, templ);
    REQUIRE(found.size() == truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      CHECK(std::abs(found[i].row - truth[i].row) <= 1);
      CHECK(std::abs(found[i].col - truth[i].col) <= 1);
    }
  }
}

TEST_CASE("detect_crosses on degenerate images") {
  const Image templ = make_cross_template(7);
  CHECK(detect_crosses(Image::Constant(32, 32, 0.4f), templ).empty());
  CHECK(detect_crosses(Image::Zero(32, 32), templ).empty());
  const auto ncc = normalized_cross_correlation(Image::Constant(32, 32, 0.4f), templ);
  CHECK(ncc.allFinite());
  CHECK((ncc == 0.0).all());
  // a smooth blob correlates weakly and carries no edges
  Image blob(32, 32);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) blob(r, c) = float(std::exp(-((r - 16) * (r - 16) + (c - 16) * (c - 16)) / 50.0));
  CHECK(detect_crosses(blob, templ).empty());
}

TEST_CASE("NCC of the template with itself is one") {
  const Image templ = make_cross_template(7);
  Image img = Image::Constant(21, 21, 0.5f);
  img.block(7, 7, 7, 7) = templ;
  const auto ncc = normalized_cross_correlation(img, templ);
  CHECK(ncc(10, 10) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("inpaint restores constant and linear images") {
  Mask hole = Mask::Zero(20, 20);
  hole.block(6, 7, 5, 4).setOnes();
  const Image flat = Image::Constant(20, 20, 0.3f);
  Image broken = flat;
  broken.block(6, 7, 5, 4).setConstant(1.0f);
  CHECK(bit_equal(inpaint(broken, hole), flat));

  Image ramp(20, 20);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c) ramp(r, c) = 0.02f * r + 0.03f * c;
  Image damaged = ramp;
  damaged.block(6, 7, 5, 4).setZero();
  const Image fixed = inpaint(damaged, hole);
  CHECK((fixed - ramp).abs().maxCoeff() < 1e-3f);
  for (int r = 0; r < 20; ++r)
    for (int c = 0; c < 20; ++c)
      if (!hole(r, c)) CHECK(std::bit_cast<std::uint32_t>(fixed(r, c)) == std::bit_cast<std::uint32_t>(damaged(r, c)));
}

TEST_CASE("inpaint is idempotent and handles edge cases") {
  const Sample s = generate_sample(preset_a(), 4);
  const Mask hole = footprint_mask(128, 128, s.crosses, 7);
  const Image once = inpaint(s.image, hole);
  const Image twice = inpaint(once, hole);
  CHECK((once - twice).abs().maxCoeff() < 1e-3f);
  CHECK(bit_equal(inpaint(s.image, Mask::Zero(128, 128)), s.image));
  CHECK_THROWS_AS(inpaint(s.image, Mask::Ones(128, 128)), std::invalid_argument);
  CHECK_THROWS_AS(inpaint(s.image, Mask::Zero(10, 10)), std::invalid_argument);
}

TEST_CASE("footprint_mask clips at the border") {
  const Mask m = footprint_mask(10, 10, {{0, 0}, {5, 5}}, 3);
  CHECK(area(m) == 4 + 9);
}

TEST_CASE("crop_bounds pads to the divisor with the extra pixel at the bottom and right") {
  const Mask fov = fov_mask(128, 128, FovGeometry::rectangle(0, 128, 8, 120));
  const CropBounds b = crop_bounds(fov, 8);
  CHECK(b.col0 == 8);
  CHECK(b.width == 112);
  CHECK(b.out_width() == 112);
  CHECK(b.out_height() == 128);

  const Mask odd = fov_mask(40, 40, FovGeometry::rectangle(3, 20, 5, 36));
  const CropBounds o = crop_bounds(odd, 8);
  CHECK(o.height == 17);
  CHECK(o.width == 31);
  CHECK(o.out_height() == 24);
  CHECK(o.out_width() == 32);
  CHECK(o.pad_top == 3);
  CHECK(o.pad_bottom == 4);
  CHECK(o.pad_left == 0);
  CHECK(o.pad_right == 1);

  Image img = Image::Constant(40, 40, 0.7f);
  const Image cropped = apply_crop(img, o);
  CHECK(cropped.rows() == 24);
  CHECK(cropped(0, 0) == 0.0f);
  CHECK(cropped(3, 0) == 0.7f);
  CHECK_THROWS_AS(crop_bounds(Mask::Zero(8, 8), 8), std::invalid_argument);
}

TEST_CASE("pipeline on cross-free samples only masks, crops and pads") {
  for (const char* p : {"A", "B"}) {
    PhantomSpec spec = preset_by_name(p);
    spec.burn_crosses = false;
    const FovGeometry g = fov_geometry(spec);
    const Mask fov = fov_mask(spec.height, spec.width, g);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Sample s = generate_sample(spec, seed);
      const PreprocResult r = preprocess_pipeline(s.image, g, make_cross_template(7));
      CHECK(r.detections.empty());
      const Image expect = apply_crop(Image(s.image * fov.cast<float>()), r.crop);
      CHECK(bit_equal(r.image, expect));
      CHECK(r.image.rows() % 8 == 0);
      CHECK(r.image.cols() % 8 == 0);
    }
  }
}

TEST_CASE("pipeline changes pixels only inside detected footprints") {
  const PhantomSpec spec = preset_a();
  const FovGeometry g = fov_geometry(spec);
  const Mask fov = fov_mask(spec.height, spec.width, g);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Sample s = generate_sample(spec, seed);
    const PreprocResult r = preprocess_pipeline(s.image, g, make_cross_template(7));
    CHECK(r.detections.size() == 2);
    const Image masked = s.image * fov.cast<float>();
    const Image ref = apply_crop(masked, r.crop);
    const Mask fp = apply_crop(r.footprint, r.crop);
    for (int i = 0; i < ref.size(); ++i)
      if (!fp.data()[i]) CHECK(ref.data()[i] == r.image.data()[i]);
    CHECK(r.image.minCoeff() >= 0.0f);
    CHECK(r.image.maxCoeff() <= 1.0f);
  }
}

TEST_CASE("inpainted crosses are close to the cross-free image") {
  PhantomSpec with = preset_a();
  PhantomSpec without = preset_a();
  without.burn_crosses = false;
  const FovGeometry g = fov_geometry(with);
  const Image templ = make_cross_template(7);
  double total = 0.0;
  long count = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Sample a = generate_sample(with, seed);
    const Sample b = generate_sample(without, seed);
    const PreprocResult ra = preprocess_pipeline(a.image, g, templ);
    const PreprocResult rb = preprocess_pipeline(b.image, g, templ);
    const Mask fp = apply_crop(footprint_mask(128, 128, a.crosses, 7), ra.crop);
    for (int i = 0; i < fp.size(); ++i)
      if (fp.data()[i]) {
        total += std::abs(ra.image.data()[i] - rb.image.data()[i]);
        ++count;
      }
  }
  CHECK(total / double(count) < 0.02);
}
