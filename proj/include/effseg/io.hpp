#pragma once

#include "effseg/cv.hpp"
#include "effseg/metrics.hpp"
#include "effseg/phantom.hpp"
#include "effseg/preproc.hpp"
#include "effseg/train.hpp"
#include "effseg/unet.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace effseg {

namespace fs = std::filesystem;

/// Malformed or missing input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// Shortest round-trip decimal rendering; "nan" for NaN.
std::string format_double(double v);
double parse_double(const std::string& s);

// ---- PGM (P5, maxval <= 255) ----
Image decode_pgm(const std::string& bytes);
std::string encode_pgm(const Image& img);  // quantized to 8 bits
Image read_pgm(const fs::path& path);
void write_pgm(const fs::path& path, const Image& img);
Mask read_mask_pgm(const fs::path& path);  // > 127 is foreground
void write_mask_pgm(const fs::path& path, const Mask& mask);

// ---- dataset layout: images/<id>.pgm, masks/<id>.pgm, meta.csv ----
void write_dataset(const fs::path& dir, const std::vector<Sample>& samples);

struct DatasetLoad {
  std::vector<Sample> samples;
  std::vector<std::string> errors;  // one entry per unreadable sample
};

/// Reads every sample listed in meta.csv; per-sample failures are collected
/// rather than thrown. A missing or malformed meta.csv throws DataError.
DatasetLoad load_dataset(const fs::path& dir);

/// Throws DataError on any failure.
std::vector<Sample> read_dataset(const fs::path& dir);

// ---- weights file ----
struct NamedTensor {
  std::string name;
  Tensorf tensor;
};

std::string encode_weights(const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> decode_weights(const std::string& bytes);
void save_weights(const fs::path& path, const Model<float>& model);
std::vector<NamedTensor> read_weights(const fs::path& path);
/// Copies stored tensors into a model with matching names and shapes.
void load_weights(const fs::path& path, Model<float>& model);

// ---- CSV ----
/// Splits a CSV document into rows of fields (no quoting; blank lines skipped).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

std::string metrics_csv(std::span<const MetricsRecord> records);
/// Columns are looked up by name; a missing column is reported by name.
std::vector<MetricsRecord> parse_metrics_csv(const std::string& text);

std::string train_log_csv(const TrainLog& log);
std::string folds_csv(const CVResult& cv);

}  // namespace effseg
