#pragma once

#include "effseg/phantom.hpp"
#include "effseg/preproc.hpp"
#include "effseg/train.hpp"
#include "effseg/unet.hpp"

#include <cstdint>
#include <string>

namespace effseg {

struct PreprocConfig {
  DetectOptions detect;
  int template_size = 7;
};

struct EvalConfig {
  int k = 5;
  CoordMode coordconv_mode = CoordMode::cartesian;  // the mode used by the coordconv variant
  double observer_strength = kDefaultObserverStrength;
  int histogram_bins = 10;
  int fold_workers = 1;
};

/// Every option of a run. The global seed drives phantom generation, the fold
/// split and training (fold f trains with seed + f).
struct RunConfig {
  std::uint64_t seed = 0;
  std::string preset = "A";
  int count = 0;  // samples to generate; 0 means the preset's size
  PhantomSpec phantom = preset_a();
  PreprocConfig preprocess;
  UNetConfig unet;
  TrainConfig train;
  EvalConfig eval;

  int sample_count() const { return count > 0 ? count : preset_size(preset); }
  void validate() const;
};

/// Parses a JSON document. Missing fields keep their defaults (phantom fields
/// default to the chosen preset); unknown fields are rejected.
RunConfig parse_run_config(const std::string& json_text);

/// Fully materialized JSON rendering.
std::string dump_run_config(const RunConfig& cfg);

}  // namespace effseg
