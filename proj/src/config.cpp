#include "effseg/config.hpp"

#include <json.hpp>

#include <set>
#include <stdexcept>

namespace effseg {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw std::invalid_argument("config: unknown field '" + where + "." + key + "'");
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void get_range(const json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const json& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw std::invalid_argument(std::string("config: '") + key + "' must be [lo, hi]");
  r = {a[0].get<double>(), a[1].get<double>()};
}

json range(const Range& r) { return json::array({r.lo, r.hi}); }

json to_json(const PhantomSpec& s) {
  json j;
  j["probe"] = to_string(s.probe);
  j["height"] = s.height;
  j["width"] = s.width;
  j["depth"] = range(s.depth);
  j["thickness"] = range(s.thickness);
  j["lateral"] = range(s.lateral);
  j["waviness"] = s.waviness;
  j["wave_cycles"] = range(s.wave_cycles);
  j["rib_shadows"] = range(s.rib_shadows);
  j["rib_shadow_factor"] = s.rib_shadow_factor;
  j["tissue_mean"] = s.tissue_mean;
  j["pleura_peak"] = s.pleura_peak;
  j["effusion_mean"] = s.effusion_mean;
  j["lung_mean"] = s.lung_mean;
  j["speckle"] = s.speckle;
  j["speckle_blur"] = s.speckle_blur;
  j["edge_softness"] = s.edge_softness;
  j["pleura_gap"] = s.pleura_gap;
  j["burn_crosses"] = s.burn_crosses;
  j["cross_size"] = s.cross_size;
  j["linear_margin"] = s.linear_margin;
  j["apex"] = json::array({s.apex.row, s.apex.col});
  j["cone_half_angle"] = s.cone_half_angle;
  j["cone_rmin"] = s.cone_rmin;
  j["cone_rmax"] = s.cone_rmax;
  j["depth_gated"] = s.depth_gated;
  j["gate_row"] = s.gate_row;
  j["gate_offset"] = range(s.gate_offset);
  return j;
}

void from_json(const json& j, PhantomSpec& s) {
  check_keys(j,
             {"probe", "height", "width", "depth", "thickness", "lateral", "waviness", "wave_cycles", "rib_shadows",
              "rib_shadow_factor", "tissue_mean", "pleura_peak", "effusion_mean", "lung_mean", "speckle",
              "speckle_blur", "edge_softness", "pleura_gap", "burn_crosses", "cross_size", "linear_margin", "apex",
              "cone_half_angle", "cone_rmin", "cone_rmax", "depth_gated", "gate_row", "gate_offset"},
             "phantom");
  if (j.contains("probe")) s.probe = probe_from_string(j.at("probe").get<std::string>());
  get(j, "height", s.height);
  get(j, "width", s.width);
  get_range(j, "depth", s.depth);
  get_range(j, "thickness", s.thickness);
  get_range(j, "lateral", s.lateral);
  get(j, "waviness", s.waviness);
  get_range(j, "wave_cycles", s.wave_cycles);
  get_range(j, "rib_shadows", s.rib_shadows);
  get(j, "rib_shadow_factor", s.rib_shadow_factor);
  get(j, "tissue_mean", s.tissue_mean);
  get(j, "pleura_peak", s.pleura_peak);
  get(j, "effusion_mean", s.effusion_mean);
  get(j, "lung_mean", s.lung_mean);
  get(j, "speckle", s.speckle);
  get(j, "speckle_blur", s.speckle_blur);
  get(j, "edge_softness", s.edge_softness);
  get(j, "pleura_gap", s.pleura_gap);
  get(j, "burn_crosses", s.burn_crosses);
  get(j, "cross_size", s.cross_size);
  get(j, "linear_margin", s.linear_margin);
  if (j.contains("apex")) {
    Range r;
    get_range(j, "apex", r);
    s.apex = {r.lo, r.hi};
  }
  get(j, "cone_half_angle", s.cone_half_angle);
  get(j, "cone_rmin", s.cone_rmin);
  get(j, "cone_rmax", s.cone_rmax);
  get(j, "depth_gated", s.depth_gated);
  get(j, "gate_row", s.gate_row);
  get_range(j, "gate_offset", s.gate_offset);
}

json to_json(const UNetConfig& c) {
  json j;
  j["depth"] = c.depth;
  j["base_channels"] = c.base_channels;
  j["max_channels"] = c.max_channels;
  j["coord_mode"] = to_string(c.coord_mode);
  j["normalize_coords"] = c.normalize_coords;
  j["leaky_slope"] = c.leaky_slope;
  j["norm_eps"] = c.norm_eps;
  return j;
}

void from_json(const json& j, UNetConfig& c) {
  check_keys(j, {"depth", "base_channels", "max_channels", "coord_mode", "normalize_coords", "leaky_slope", "norm_eps"},
             "unet");
  get(j, "depth", c.depth);
  get(j, "base_channels", c.base_channels);
  get(j, "max_channels", c.max_channels);
  if (j.contains("coord_mode")) c.coord_mode = coord_mode_from_string(j.at("coord_mode").get<std::string>());
  get(j, "normalize_coords", c.normalize_coords);
  get(j, "leaky_slope", c.leaky_slope);
  get(j, "norm_eps", c.norm_eps);
}

json to_json(const AugmentConfig& a) {
  json j;
  j["p_rotation"] = a.p_rotation;
  j["rotation_deg"] = range(a.rotation_deg);
  j["p_scale"] = a.p_scale;
  j["scale"] = range(a.scale);
  j["p_noise"] = a.p_noise;
  j["noise_sigma"] = range(a.noise_sigma);
  j["p_blur"] = a.p_blur;
  j["blur_sigma"] = range(a.blur_sigma);
  j["p_brightness"] = a.p_brightness;
  j["brightness"] = range(a.brightness);
  j["p_contrast"] = a.p_contrast;
  j["contrast"] = range(a.contrast);
  j["p_lowres"] = a.p_lowres;
  j["lowres"] = range(a.lowres);
  j["p_gamma"] = a.p_gamma;
  j["gamma"] = range(a.gamma);
  j["p_mirror"] = a.p_mirror;
  return j;
}

void from_json(const json& j, AugmentConfig& a) {
  check_keys(j,
             {"p_rotation", "rotation_deg", "p_scale", "scale", "p_noise", "noise_sigma", "p_blur", "blur_sigma",
              "p_brightness", "brightness", "p_contrast", "contrast", "p_lowres", "lowres", "p_gamma", "gamma",
              "p_mirror"},
             "train.augment");
  get(j, "p_rotation", a.p_rotation);
  get_range(j, "rotation_deg", a.rotation_deg);
  get(j, "p_scale", a.p_scale);
  get_range(j, "scale", a.scale);
  get(j, "p_noise", a.p_noise);
  get_range(j, "noise_sigma", a.noise_sigma);
  get(j, "p_blur", a.p_blur);
  get_range(j, "blur_sigma", a.blur_sigma);
  get(j, "p_brightness", a.p_brightness);
  get_range(j, "brightness", a.brightness);
  get(j, "p_contrast", a.p_contrast);
  get_range(j, "contrast", a.contrast);
  get(j, "p_lowres", a.p_lowres);
  get_range(j, "lowres", a.lowres);
  get(j, "p_gamma", a.p_gamma);
  get_range(j, "gamma", a.gamma);
  get(j, "p_mirror", a.p_mirror);
}

json to_json(const TrainConfig& t) {
  json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["lr0"] = t.lr0;
  j["momentum"] = t.momentum;
  j["poly_exponent"] = t.poly_exponent;
  j["steps_per_epoch"] = t.steps_per_epoch;
  j["grad_clip"] = t.grad_clip;
  j["workers"] = t.workers;
  j["augment"] = to_json(t.augment);
  return j;
}

void from_json(const json& j, TrainConfig& t) {
  check_keys(j,
             {"epochs", "batch_size", "lr0", "momentum", "poly_exponent", "steps_per_epoch", "grad_clip", "workers",
              "augment"},
             "train");
  get(j, "epochs", t.epochs);
  get(j, "batch_size", t.batch_size);
  get(j, "lr0", t.lr0);
  get(j, "momentum", t.momentum);
  get(j, "poly_exponent", t.poly_exponent);
  get(j, "steps_per_epoch", t.steps_per_epoch);
  get(j, "grad_clip", t.grad_clip);
  get(j, "workers", t.workers);
  if (j.contains("augment")) from_json(j.at("augment"), t.augment);
}

json to_json(const PreprocConfig& p) {
  json j;
  j["threshold"] = p.detect.threshold;
  j["edge_gradient"] = p.detect.edge_gradient;
  j["min_edge_fraction"] = p.detect.min_edge_fraction;
  j["template_size"] = p.template_size;
  return j;
}

void from_json(const json& j, PreprocConfig& p) {
  check_keys(j, {"threshold", "edge_gradient", "min_edge_fraction", "template_size"}, "preprocess");
  get(j, "threshold", p.detect.threshold);
  get(j, "edge_gradient", p.detect.edge_gradient);
  get(j, "min_edge_fraction", p.detect.min_edge_fraction);
  get(j, "template_size", p.template_size);
}

json to_json(const EvalConfig& e) {
  json j;
  j["k"] = e.k;
  j["coordconv_mode"] = to_string(e.coordconv_mode);
  j["observer_strength"] = e.observer_strength;
  j["histogram_bins"] = e.histogram_bins;
  j["fold_workers"] = e.fold_workers;
  return j;
}

void from_json(const json& j, EvalConfig& e) {
  check_keys(j, {"k", "coordconv_mode", "observer_strength", "histogram_bins", "fold_workers"}, "eval");
  get(j, "k", e.k);
  if (j.contains("coordconv_mode")) e.coordconv_mode = coord_mode_from_string(j.at("coordconv_mode").get<std::string>());
  get(j, "observer_strength", e.observer_strength);
  get(j, "histogram_bins", e.histogram_bins);
  get(j, "fold_workers", e.fold_workers);
}

}  // namespace

void RunConfig::validate() const {
  phantom.validate();
  unet.validate();
  train.validate();
  if (count < 0) throw std::invalid_argument("config: count must be >= 0");
  if (eval.k < 2) throw std::invalid_argument("config: eval.k must be >= 2");
  if (eval.coordconv_mode == CoordMode::none) throw std::invalid_argument("config: eval.coordconv_mode cannot be none");
  if (eval.observer_strength < 0.0) throw std::invalid_argument("config: eval.observer_strength must be >= 0");
  if (eval.histogram_bins < 1) throw std::invalid_argument("config: eval.histogram_bins must be >= 1");
  if (eval.fold_workers < 1) throw std::invalid_argument("config: eval.fold_workers must be >= 1");
  if (preprocess.template_size < 3 || preprocess.template_size % 2 == 0)
    throw std::invalid_argument("config: preprocess.template_size must be odd and >= 3");
  if (!(preprocess.detect.threshold > 0.0 && preprocess.detect.threshold <= 1.0))
    throw std::invalid_argument("config: preprocess.threshold must be in (0, 1]");
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    check_keys(j, {"seed", "preset", "count", "phantom", "preprocess", "unet", "train", "eval"}, "config");
    get(j, "seed", c.seed);
    get(j, "preset", c.preset);
    get(j, "count", c.count);
    c.phantom = preset_by_name(c.preset);
    if (j.contains("phantom")) from_json(j.at("phantom"), c.phantom);
    if (j.contains("preprocess")) from_json(j.at("preprocess"), c.preprocess);
    if (j.contains("unet")) from_json(j.at("unet"), c.unet);
    if (j.contains("train")) from_json(j.at("train"), c.train);
    if (j.contains("eval")) from_json(j.at("eval"), c.eval);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.train.seed = c.seed;
  c.validate();
  return c;
}

std::string dump_run_config(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["preset"] = c.preset;
  j["count"] = c.sample_count();
  j["phantom"] = to_json(c.phantom);
  j["preprocess"] = to_json(c.preprocess);
  j["unet"] = to_json(c.unet);
  j["train"] = to_json(c.train);
  j["eval"] = to_json(c.eval);
  return j.dump(2) + "\n";
}

}  // namespace effseg
