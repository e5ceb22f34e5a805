#include "effseg/commands.hpp"

#include "effseg/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace effseg {

namespace {

void write_config(const RunConfig& cfg, const fs::path& out) {
  write_text(out / "resolved_config.json", dump_run_config(cfg));
}

FovGeometry geometry_for(const RunConfig& cfg, const Sample& s) {
  PhantomSpec spec = cfg.phantom;
  spec.probe = s.probe;
  if (s.apex) spec.apex = *s.apex;
  return fov_geometry(spec);
}

std::vector<std::string> ids_of(const std::vector<Sample>& data) {
  std::vector<std::string> ids;
  for (const auto& s : data) ids.push_back(s.id);
  return ids;
}

UNetConfig variant_net(const RunConfig& cfg, bool coordconv) {
  UNetConfig net = cfg.unet;
  net.coord_mode = coordconv ? cfg.eval.coordconv_mode : CoordMode::none;
  return net;
}

}  // namespace

int cmd_phantom(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const int n = cfg.sample_count();
  const auto samples = cfg.phantom.depth_gated ? generate_depth_gated_dataset(n, cfg.phantom, cfg.seed)
                                               : generate_dataset(n, cfg.phantom, cfg.seed);
  write_dataset(out, samples);
  write_config(cfg, out);
  log << "wrote " << samples.size() << " samples to " << out.string() << "\n";
  return kExitOk;
}

CleanedSample preprocess_sample(const Sample& s, const RunConfig& cfg, const Image& templ) {
  CleanedSample out;
  out.result = preprocess_pipeline(s.image, geometry_for(cfg, s), templ, cfg.preprocess.detect, cfg.unet.divisor());
  const CropBounds& crop = out.result.crop;
  Sample& c = out.sample;
  c.id = s.id;
  c.probe = s.probe;
  c.image = out.result.image;
  c.mask = apply_crop(s.mask, crop);
  const int dr = crop.row0 - crop.pad_top;
  const int dc = crop.col0 - crop.pad_left;
  if (s.apex) c.apex = Point{s.apex->row - dr, s.apex->col - dc};
  for (const auto& p : s.crosses) c.crosses.push_back({p.row - dr, p.col - dc});
  return out;
}

int cmd_preprocess(const fs::path& in, const fs::path& out, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  DatasetLoad load = load_dataset(in);
  for (const auto& e : load.errors) log << "error: " << e << "\n";

  const Image templ = make_cross_template(cfg.preprocess.template_size);
  std::vector<Sample> cleaned;
  std::string csv =
      "id,detections,image_crop_row,image_crop_col,mask_crop_row,mask_crop_col,crop_height,crop_width,pad_top,"
      "pad_bottom,pad_left,pad_right,footprint_pixels,inpaint_mean_abs_change\n";
  int failures = static_cast<int>(load.errors.size());
  for (const auto& s : load.samples) {
    try {
      CleanedSample cs = preprocess_sample(s, cfg, templ);
      const PreprocResult& r = cs.result;
      Sample& c = cs.sample;

      // mean absolute change inside the inpainted footprints (after FOV masking)
      double change = 0.0;
      const Index fp = area(r.footprint);
      if (fp > 0) {
        const Image cropped_src = apply_crop(s.image, r.crop);
        const Mask cropped_fp = apply_crop(r.footprint, r.crop);
        for (Index k = 0; k < cropped_fp.size(); ++k)
          if (cropped_fp.data()[k]) change += std::abs(cropped_src.data()[k] - c.image.data()[k]);
        change /= std::max<Index>(1, area(cropped_fp));
      }
      csv += s.id + "," + std::to_string(r.detections.size()) + "," + std::to_string(r.crop.row0) + "," +
             std::to_string(r.crop.col0) + "," + std::to_string(r.crop.row0) + "," + std::to_string(r.crop.col0) +
             "," + std::to_string(r.crop.height) + "," + std::to_string(r.crop.width) + "," +
             std::to_string(r.crop.pad_top) + "," + std::to_string(r.crop.pad_bottom) + "," +
             std::to_string(r.crop.pad_left) + "," + std::to_string(r.crop.pad_right) + "," + std::to_string(fp) +
             "," + format_double(change) + "\n";
      cleaned.push_back(std::move(c));
    } catch (const std::exception& e) {
      log << "error: " << s.id << ": " << e.what() << "\n";
      ++failures;
    }
  }
  write_dataset(out, cleaned);
  write_text(out / "preproc_log.csv", csv);
  write_config(cfg, out);
  log << "preprocessed " << cleaned.size() << " samples into " << out.string();
  if (failures) log << " (" << failures << " failed)";
  log << "\n";
  return failures ? kExitData : kExitOk;
}

int cmd_train(const fs::path& dataset, const RunConfig& cfg, bool coordconv, int fold, const fs::path& out,
              std::ostream& log) {
  cfg.validate();
  if (fold < 0 || fold >= cfg.eval.k)
    throw std::invalid_argument("fold index " + std::to_string(fold) + " outside [0, " + std::to_string(cfg.eval.k) +
                                ")");
  const std::vector<Sample> data = read_dataset(dataset);
  const FoldSplit split = kfold_split(ids_of(data), cfg.eval.k, cfg.seed);
  const auto& held = split.folds[fold];
  std::vector<Sample> train_set, test_set;
  for (const auto& s : data)
    (std::find(held.begin(), held.end(), s.id) != held.end() ? test_set : train_set).push_back(s);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed + static_cast<std::uint64_t>(fold);
  const UNetConfig net = variant_net(cfg, coordconv);
  const std::string variant = coordconv ? "coordconv" : "baseline";
  log << "training " << variant << " fold " << fold << " on " << train_set.size() << " samples\n";
  TrainResult r = train_fold(train_set, tc, net, [&](const EpochRecord& e) {
    log << "  epoch " << e.epoch << " loss " << format_double(e.mean_loss) << " lr " << format_double(e.lr) << "\n";
  });

  std::vector<MetricsRecord> records;
  const std::vector<Mask> preds = predict(r.model, test_set, tc.batch_size);
  for (std::size_t i = 0; i < test_set.size(); ++i)
    records.push_back(evaluate(test_set[i].id, variant, fold, preds[i], test_set[i].mask));

  save_weights(out / "weights.bin", r.model);
  write_text(out / "train_log.csv", train_log_csv(r.log));
  write_text(out / "fold_metrics.csv", metrics_csv(records));
  write_config(cfg, out);
  log << "wrote " << (out / "weights.bin").string() << "\n";
  return kExitOk;
}

std::vector<double> parse_interobserver_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw DataError("interobserver CSV is empty");
  const auto& h = rows.front();
  const auto it = std::find(h.begin(), h.end(), "dsc");
  if (it == h.end()) throw DataError("interobserver CSV: missing column 'dsc'");
  const std::size_t c = static_cast<std::size_t>(it - h.begin());
  std::vector<double> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != h.size()) throw DataError("interobserver CSV: ragged row " + std::to_string(r + 1));
    out.push_back(parse_double(rows[r][c]));
  }
  return out;
}

void write_report(const std::vector<MetricsRecord>& records, const std::vector<double>& interobserver, int bins,
                  const fs::path& out) {
  std::map<std::string, std::vector<MetricsRecord>> by_variant;
  for (const auto& r : records) by_variant[r.variant].push_back(r);
  for (const char* v : {"baseline", "coordconv"})
    if (!by_variant.count(v)) throw DataError(std::string("metrics: no records for variant '") + v + "'");
  for (const auto& [v, recs] : by_variant)
    if (v != "baseline" && v != "coordconv") throw DataError("metrics: unknown variant '" + v + "'");

  const CVReport rep =
      summarize_report(by_variant["baseline"], by_variant["coordconv"], interobserver, "Cross-validation summary");
  write_text(out / "report.txt", rep.text);
  for (const auto& [v, recs] : by_variant) {
    std::vector<double> d;
    for (const auto& r : recs) d.push_back(r.dsc);
    write_text(out / ("hist_" + v + ".csv"), histogram_csv(d, bins));
  }
}

int cmd_cv(const fs::path& dataset, const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  cfg.validate();
  const std::vector<Sample> data = read_dataset(dataset);
  fs::create_directories(out);
  write_config(cfg, out);

  std::vector<MetricsRecord> all;
  CVResult last;
  for (bool coordconv : {false, true}) {
    CVOptions opts;
    opts.k = cfg.eval.k;
    opts.split_seed = cfg.seed;
    opts.variant = coordconv ? "coordconv" : "baseline";
    opts.fold_workers = cfg.eval.fold_workers;
    opts.on_epoch = [&](int f, const EpochRecord& e) {
      if (cfg.eval.fold_workers == 1)
        log << "  " << opts.variant << " fold " << f << " epoch " << e.epoch << " loss " << format_double(e.mean_loss)
            << "\n";
    };
    log << "cross-validating " << opts.variant << " (" << opts.k << " folds, " << data.size() << " images)\n";
    CVResult r = cross_validate(data, cfg.train, variant_net(cfg, coordconv), opts);
    for (int f = 0; f < opts.k; ++f)
      write_text(out / ("train_log_" + opts.variant + "_fold" + std::to_string(f) + ".csv"), train_log_csv(r.logs[f]));
    all.insert(all.end(), r.records.begin(), r.records.end());
    last = std::move(r);
  }
  write_text(out / "folds.csv", folds_csv(last));
  write_text(out / "metrics.csv", metrics_csv(all));

  std::string inter_csv = "id,dsc\n";
  std::vector<double> inter;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data[i];
    Mask fov;
    const bool native = s.image.rows() == cfg.phantom.height && s.image.cols() == cfg.phantom.width;
    if (native) fov = fov_mask(cfg.phantom.height, cfg.phantom.width, geometry_for(cfg, s));
    const Mask second = simulate_observer(s.mask, cfg.eval.observer_strength, cfg.seed + 7919u * (i + 1),
                                          native ? &fov : nullptr);
    const double d = dsc(second, s.mask);
    inter.push_back(d);
    inter_csv += s.id + "," + format_double(d) + "\n";
  }
  write_text(out / "interobserver.csv", inter_csv);

  // render from the serialized records so `report` reproduces these files exactly
  write_report(parse_metrics_csv(read_text(out / "metrics.csv")), parse_interobserver_csv(inter_csv),
               cfg.eval.histogram_bins, out);
  log << "wrote " << (out / "report.txt").string() << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<fs::path>& metrics, const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  if (metrics.empty()) throw std::invalid_argument("report: no metrics files given");
  std::vector<MetricsRecord> all;
  for (const auto& p : metrics) {
    try {
      const auto recs = parse_metrics_csv(read_text(p));
      all.insert(all.end(), recs.begin(), recs.end());
    } catch (const DataError& e) {
      throw DataError(p.string() + ": " + e.what());
    }
  }
  std::vector<double> inter;
  const fs::path inter_path = metrics.front().parent_path() / "interobserver.csv";
  if (fs::exists(inter_path)) inter = parse_interobserver_csv(read_text(inter_path));
  fs::create_directories(out);
  write_report(all, inter, cfg.eval.histogram_bins, out);
  log << "wrote " << (out / "report.txt").string() << "\n";
  return kExitOk;
}

}  // namespace effseg
