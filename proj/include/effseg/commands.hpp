#pragma once

#include "effseg/config.hpp"
#include "effseg/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace effseg {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Generates the configured phantom dataset into `out`.
int cmd_phantom(const RunConfig& cfg, const fs::path& out, std::ostream& log);

struct CleanedSample {
  Sample sample;  // cropped image, mask, apex and cross positions
  PreprocResult result;
};

/// Runs the preprocessing pipeline on one sample with the geometry of its probe.
CleanedSample preprocess_sample(const Sample& s, const RunConfig& cfg, const Image& templ);

/// Cleans every image of the dataset at `in` and writes the cropped dataset plus
/// preproc_log.csv to `out`. Unreadable samples are reported and yield kExitData.
int cmd_preprocess(const fs::path& in, const fs::path& out, const RunConfig& cfg, std::ostream& log);

/// Trains the model for one cross-validation fold and writes weights.bin and train_log.csv.
int cmd_train(const fs::path& dataset, const RunConfig& cfg, bool coordconv, int fold, const fs::path& out,
              std::ostream& log);

/// Cross-validates both variants and writes every evaluation artifact.
int cmd_cv(const fs::path& dataset, const RunConfig& cfg, const fs::path& out, std::ostream& log);

/// Re-renders report.txt and the histograms from stored metrics CSVs. An
/// interobserver.csv next to the first input is picked up when present.
int cmd_report(const std::vector<fs::path>& metrics, const RunConfig& cfg, const fs::path& out, std::ostream& log);

/// Writes report.txt and hist_<variant>.csv for merged records.
void write_report(const std::vector<MetricsRecord>& records, const std::vector<double>& interobserver, int bins,
                  const fs::path& out);

/// Parses interobserver.csv (id,dsc).
std::vector<double> parse_interobserver_csv(const std::string& text);

}  // namespace effseg
