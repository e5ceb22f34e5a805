#pragma once

// Synthetic ultrasound-like phantoms built from layered tissue over a pleural
// effusion, with speckle and burned-in annotation crosses. A simulated second
// observer perturbs ground-truth masks.

#include "effseg/preproc.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace effseg {

enum class Probe { linear, curved };

std::string to_string(Probe p);
Probe probe_from_string(const std::string& s);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct PhantomSpec {
  Probe probe = Probe::linear;
  int height = 128;
  int width = 128;

  // effusion geometry, pixels
  Range depth{24.0, 36.0};       // row of the effusion top at the deepest column
  Range thickness{18.0, 40.0};   // foreground pixels in the deepest column
  Range lateral{52.0, 88.0};     // effusion width
  double waviness = 0.25;        // relative thickness modulation along the effusion
  Range wave_cycles{1.0, 3.0};

  Range rib_shadows{0.0, 1.0};   // integer count range
  double rib_shadow_factor = 0.6;

  // region intensities and texture
  double tissue_mean = 0.45;
  double pleura_peak = 0.9;
  double effusion_mean = 0.06;
  double lung_mean = 0.5;
  double speckle = 0.2;          // half-width of the multiplicative uniform noise
  double speckle_blur = 1.0;
  double edge_softness = 3.0;    // blur applied to the region map
  int pleura_gap = 7;            // rows between pleural ridge and effusion top

  bool burn_crosses = true;
  int cross_size = 7;

  // linear probe: imaging columns [margin, width - margin)
  int linear_margin = 8;
  // curved probe fan
  Point apex{-20.0, 64.0};
  double cone_half_angle = 36.0;
  double cone_rmin = 24.0;
  double cone_rmax = 146.0;

  bool depth_gated = false;
  double gate_row = 64.0;        // decoy above, labelled target below
  Range gate_offset{40.0, 64.0}; // anchor distance of both regions from the gate row

  void validate() const;
};

PhantomSpec preset_a();
PhantomSpec preset_b();
PhantomSpec preset_gated();
/// "A", "B" or "gated".
PhantomSpec preset_by_name(const std::string& name);
int preset_size(const std::string& name);

FovGeometry fov_geometry(const PhantomSpec& spec);

struct Sample {
  std::string id;
  Image image;
  Mask mask;
  Probe probe = Probe::linear;
  std::optional<Point> apex;
  std::vector<Pixel> crosses;  // top then bottom of the deepest column
};

Sample generate_sample(const PhantomSpec& spec, std::uint64_t seed);

/// n samples with per-sample seeds seed + i and zero-padded ids.
std::vector<Sample> generate_dataset(int n, const PhantomSpec& spec, std::uint64_t seed);

/// Same as generate_dataset but requires spec.depth_gated.
std::vector<Sample> generate_depth_gated_dataset(int n, const PhantomSpec& spec, std::uint64_t seed);

std::string sample_id(int index, int count);

/// Perturbs the mask boundary by a smooth random displacement of about `strength`
/// pixels and keeps the largest component, clipped to `fov` when given.
Mask simulate_observer(const Mask& mask, double strength, std::uint64_t seed, const Mask* fov = nullptr);

/// Observer strength used by the report pipeline.
inline constexpr double kDefaultObserverStrength = 6.0;

}  // namespace effseg
