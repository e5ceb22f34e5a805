#include "effseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace effseg {

std::string to_string(WilcoxonMethod m) {
  switch (m) {
    case WilcoxonMethod::automatic: return "automatic";
    case WilcoxonMethod::exact: return "exact";
    case WilcoxonMethod::normal: return "normal";
  }
  return "automatic";
}

namespace {

struct Ranked {
  std::vector<int> doubled_rank;  // 2 * average rank, always an integer
  std::vector<bool> positive;
  double tie_term = 0.0;          // sum over tie groups of t^3 - t
};

Ranked rank_differences(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  Ranked r;
  r.doubled_rank.assign(n, 0);
  r.positive.assign(n, false);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    // ranks i+1 .. j+1 share their average; doubled: (i+1) + (j+1)
    const int doubled = static_cast<int>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) r.doubled_rank[order[k]] = doubled;
    const double t = double(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  for (std::size_t i = 0; i < n; ++i) r.positive[i] = d[i] > 0.0;
  return r;
}

double exact_p(const Ranked& r, int w2) {
  const int total = std::accumulate(r.doubled_rank.begin(), r.doubled_rank.end(), 0);
  // counts[s]: number of sign assignments whose positive doubled ranks sum to s
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  int reach = 0;
  for (int rk : r.doubled_rank) {
    for (int s = reach; s >= 0; --s)
      if (counts[s] != 0.0) counts[s + rk] += counts[s];
    reach += rk;
  }
  const double all = std::ldexp(1.0, static_cast<int>(r.doubled_rank.size()));
  double upper = 0.0, lower = 0.0;
  for (int s = 0; s <= total; ++s) {
    if (s >= w2) upper += counts[s];
    if (s <= w2) lower += counts[s];
  }
  return std::min(1.0, 2.0 * std::min(upper, lower) / all);
}

double normal_p(const Ranked& r, double w) {
  const double n = double(r.doubled_rank.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - r.tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon_signed_rank: samples differ in length");
  if (a.empty()) throw std::invalid_argument("wilcoxon_signed_rank: empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  if (d.empty()) throw NoNonzeroPairs();

  const Ranked r = rank_differences(d);
  int w2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (r.positive[i]) w2 += r.doubled_rank[i];

  WilcoxonResult out;
  out.n_effective = static_cast<int>(d.size());
  out.w = w2 / 2.0;
  out.method = method == WilcoxonMethod::automatic
                   ? (out.n_effective <= kWilcoxonExactLimit ? WilcoxonMethod::exact : WilcoxonMethod::normal)
                   : method;
  out.p = out.method == WilcoxonMethod::exact ? exact_p(r, w2) : normal_p(r, out.w);
  return out;
}

}  // namespace effseg
