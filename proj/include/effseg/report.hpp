#pragma once

#include "effseg/metrics.hpp"
#include "effseg/stats.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace effseg {

/// Locale-independent fixed-point rendering ("nan" for NaN).
std::string format_fixed(double v, int decimals);

/// "median (q1, q3)" with the given number of decimals.
std::string format_quartiles(const Quartiles& q, int decimals);

struct VariantSummary {
  std::string variant;
  int n = 0;
  Quartiles dsc;
  std::optional<Quartiles> abs_area_error;
  std::optional<Quartiles> area_bias;
  int undefined_area = 0;  // records with empty ground truth
};

VariantSummary summarize_variant(std::span<const MetricsRecord> records);

struct CVReport {
  VariantSummary baseline;
  VariantSummary coordconv;
  std::optional<Quartiles> interobserver;
  std::optional<WilcoxonResult> wilcoxon;
  std::string text;
};

/// Table-shaped summary of both variants plus the inter-observer column and the
/// paired Wilcoxon test on DSC. Both record sets must cover the same ids.
CVReport summarize_report(std::span<const MetricsRecord> baseline, std::span<const MetricsRecord> coordconv,
                          std::span<const double> interobserver_dsc, const std::string& title = "");

/// CSV with columns bin_left,bin_right,count.
std::string histogram_csv(std::span<const double> values, int bins = 10, double lo = 0.0, double hi = 1.0);

}  // namespace effseg
