#include "effseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace effseg {

namespace {

void check_pair(const Mask& a, const Mask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("mask dims differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

}  // namespace

double dsc(const Mask& pred, const Mask& gt) {
  check_pair(pred, gt);
  const Index x = area(pred);
  const Index y = area(gt);
  if (x + y == 0) return 1.0;
  const Index inter = ((pred != 0) && (gt != 0)).count();
  return 2.0 * double(inter) / double(x + y);
}

std::optional<double> area_bias_pct(const Mask& pred, const Mask& gt) {
  check_pair(pred, gt);
  const Index y = area(gt);
  if (y == 0) return std::nullopt;
  return double(area(pred) - y) / double(y) * 100.0;
}

std::optional<double> area_error_pct(const Mask& pred, const Mask& gt) {
  const auto bias = area_bias_pct(pred, gt);
  if (!bias) return std::nullopt;
  return std::abs(*bias);
}

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must be in [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = (v.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - lo;
  return v[lo] + frac * (v[hi] - v[lo]);
}

Quartiles median_quartiles(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median_quartiles: empty list");
  return {quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75)};
}

std::vector<int> histogram_counts(std::span<const double> values, int bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram_counts: bins must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("histogram_counts: empty range");
  std::vector<int> counts(bins, 0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    const int k = std::min(bins - 1, static_cast<int>(std::floor((v - lo) / width)));
    ++counts[k];
  }
  return counts;
}

MetricsRecord evaluate(const std::string& id, const std::string& variant, int fold, const Mask& pred,
                       const Mask& gt) {
  return {id, variant, fold, dsc(pred, gt), area_error_pct(pred, gt), area_bias_pct(pred, gt)};
}

}  // namespace effseg
