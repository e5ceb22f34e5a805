#pragma once

#include "effseg/image.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace effseg {

/// 2|X n Y| / (|X| + |Y|); two empty masks score 1.
double dsc(const Mask& pred, const Mask& gt);

/// |(|X| - |Y|)| / |Y| * 100, or nullopt when the ground truth is empty.
std::optional<double> area_error_pct(const Mask& pred, const Mask& gt);

/// (|X| - |Y|) / |Y| * 100, or nullopt when the ground truth is empty.
std::optional<double> area_bias_pct(const Mask& pred, const Mask& gt);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Quantile q of the values with linear interpolation at position (n - 1) q.
double quantile(std::span<const double> values, double q);

Quartiles median_quartiles(std::span<const double> values);

/// Equal-width bins over [lo, hi]; the last bin includes hi; out-of-range values are skipped.
std::vector<int> histogram_counts(std::span<const double> values, int bins = 10, double lo = 0.0, double hi = 1.0);

struct MetricsRecord {
  std::string id;
  std::string variant;  // "baseline" or "coordconv"
  int fold = 0;
  double dsc = 0.0;
  std::optional<double> abs_area_error_pct;
  std::optional<double> area_bias_pct;
};

MetricsRecord evaluate(const std::string& id, const std::string& variant, int fold, const Mask& pred,
                       const Mask& gt);

}  // namespace effseg
