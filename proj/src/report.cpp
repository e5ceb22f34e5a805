#include "effseg/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <locale>
#include <map>
#include <sstream>
#include <stdexcept>

namespace effseg {

std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  std::string s(buf, res.ptr);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);  // no "-0.00"
  return s;
}

std::string format_quartiles(const Quartiles& q, int decimals) {
  return format_fixed(q.median, decimals) + " (" + format_fixed(q.q1, decimals) + ", " +
         format_fixed(q.q3, decimals) + ")";
}

VariantSummary summarize_variant(std::span<const MetricsRecord> records) {
  if (records.empty()) throw std::invalid_argument("summarize_variant: no records");
  VariantSummary s;
  s.variant = records.front().variant;
  s.n = static_cast<int>(records.size());
  std::vector<double> d, err, bias;
  for (const auto& r : records) {
    d.push_back(r.dsc);
    if (r.abs_area_error_pct && r.area_bias_pct) {
      err.push_back(*r.abs_area_error_pct);
      bias.push_back(*r.area_bias_pct);
    } else {
      ++s.undefined_area;
    }
  }
  s.dsc = median_quartiles(d);
  if (!err.empty()) {
    s.abs_area_error = median_quartiles(err);
    s.area_bias = median_quartiles(bias);
  }
  return s;
}

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string quartiles_or_na(const std::optional<Quartiles>& q, int decimals) {
  return q ? format_quartiles(*q, decimals) : "n/a";
}

std::string format_p(double p) {
  if (p >= 1e-4) return format_fixed(p, 4);
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, p, std::chars_format::scientific, 2);
  return std::string(buf, res.ptr);
}

}  // namespace

CVReport summarize_report(std::span<const MetricsRecord> baseline, std::span<const MetricsRecord> coordconv,
                          std::span<const double> interobserver_dsc, const std::string& title) {
  if (baseline.empty() || coordconv.empty()) throw std::invalid_argument("summarize_report: empty record set");
  std::map<std::string, double> base_by_id, coord_by_id;
  for (const auto& r : baseline)
    if (!base_by_id.emplace(r.id, r.dsc).second)
      throw std::invalid_argument("summarize_report: duplicate baseline id '" + r.id + "'");
  for (const auto& r : coordconv)
    if (!coord_by_id.emplace(r.id, r.dsc).second)
      throw std::invalid_argument("summarize_report: duplicate coordconv id '" + r.id + "'");
  for (const auto& [id, v] : base_by_id)
    if (!coord_by_id.count(id)) throw std::invalid_argument("summarize_report: id '" + id + "' missing from coordconv");
  for (const auto& [id, v] : coord_by_id)
    if (!base_by_id.count(id)) throw std::invalid_argument("summarize_report: id '" + id + "' missing from baseline");

  CVReport rep;
  rep.baseline = summarize_variant(baseline);
  rep.coordconv = summarize_variant(coordconv);
  if (!interobserver_dsc.empty()) rep.interobserver = median_quartiles(interobserver_dsc);

  std::vector<double> a, b;
  for (const auto& [id, v] : base_by_id) {
    a.push_back(v);
    b.push_back(coord_by_id.at(id));
  }
  try {
    rep.wilcoxon = wilcoxon_signed_rank(a, b);
  } catch (const NoNonzeroPairs&) {
    rep.wilcoxon.reset();
  }

  constexpr std::size_t c0 = 24, c1 = 24, c2 = 24;
  std::ostringstream os;
  os.imbue(std::locale::classic());
  if (!title.empty()) os << title << "\n\n";
  os << "Dice similarity coefficient, median (lower, upper quartiles)\n";
  os << pad("", c0) << pad("Baseline", c1) << pad("Coord. conv.", c2) << "Inter-observer var.\n";
  os << pad("DSC", c0) << pad(format_quartiles(rep.baseline.dsc, 2), c1)
     << pad(format_quartiles(rep.coordconv.dsc, 2), c2) << quartiles_or_na(rep.interobserver, 2) << "\n\n";

  os << "Area statistics, median (lower, upper quartiles)\n";
  os << pad("", c0) << pad("Baseline", c1) << "Coord. conv.\n";
  os << pad("Abs. area error %", c0) << pad(quartiles_or_na(rep.baseline.abs_area_error, 1), c1)
     << quartiles_or_na(rep.coordconv.abs_area_error, 1) << "\n";
  os << pad("Area bias %", c0) << pad(quartiles_or_na(rep.baseline.area_bias, 1), c1)
     << quartiles_or_na(rep.coordconv.area_bias, 1) << "\n\n";

  os << "Images per variant: " << rep.baseline.n << "\n";
  os << "Empty ground truth (area metrics undefined): baseline " << rep.baseline.undefined_area << ", coord. conv. "
     << rep.coordconv.undefined_area << "\n";
  os << "Inter-observer pairs: " << interobserver_dsc.size() << "\n";
  os << "Wilcoxon signed-rank test on DSC (baseline vs coord. conv., two-tailed): ";
  if (rep.wilcoxon) {
    const auto& w = *rep.wilcoxon;
    os << "W = " << format_fixed(w.w, 1) << ", n = " << w.n_effective << ", p = " << format_p(w.p) << " ("
       << to_string(w.method) << "), " << (w.p < 0.05 ? "significant" : "not significant") << " at 0.05\n";
  } else {
    os << "p = n/a (no nonzero pairs)\n";
  }
  rep.text = os.str();
  return rep;
}

std::string histogram_csv(std::span<const double> values, int bins, double lo, double hi) {
  const std::vector<int> counts = histogram_counts(values, bins, lo, hi);
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "bin_left,bin_right,count\n";
  const double width = (hi - lo) / bins;
  for (int k = 0; k < bins; ++k)
    os << format_fixed(lo + k * width, 4) << ',' << format_fixed(k + 1 == bins ? hi : lo + (k + 1) * width, 4) << ','
       << counts[k] << '\n';
  return os.str();
}

}  // namespace effseg
