#include "effseg/cv.hpp"
#include "effseg/metrics.hpp"
#include "effseg/phantom.hpp"
#include "effseg/report.hpp"
#include "effseg/stats.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace effseg;

namespace {

Mask random_mask(std::mt19937_64& rng, int rows, int cols, double fill) {
  std::bernoulli_distribution on(fill);
  Mask m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = on(rng) ? 1 : 0;
  return m;
}

Mask mask_with_area(int rows, int cols, int count) {
  Mask m = Mask::Zero(rows, cols);
  for (int i = 0; i < count; ++i) m.data()[i] = 1;
  return m;
}

std::vector<std::string> make_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back(sample_id(i, n));
  return ids;
}

void check_partition(const FoldSplit& s, const std::vector<std::string>& ids, int k) {
  REQUIRE(s.k() == k);
  std::multiset<std::string> all;
  std::size_t lo = ids.size(), hi = 0;
  for (const auto& f : s.folds) {
    all.insert(f.begin(), f.end());
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
  }
  CHECK(all == std::multiset<std::string>(ids.begin(), ids.end()));
  CHECK(hi - lo <= 1);
}

MetricsRecord record(const std::string& id, const std::string& variant, double d, std::optional<double> bias) {
  MetricsRecord r;
  r.id = id;
  r.variant = variant;
  r.dsc = d;
  r.area_bias_pct = bias;
  if (bias) r.abs_area_error_pct = std::abs(*bias);
  return r;
}

}  // namespace

TEST_CASE("dsc examples") {
  const Mask a = mask_with_area(4, 4, 5);
  CHECK(dsc(a, a) == 1.0);
  Mask b = Mask::Zero(4, 4);
  b(3, 3) = 1;
  CHECK(dsc(a, b) == 0.0);
  CHECK(dsc(Mask::Zero(4, 4), Mask::Zero(4, 4)) == 1.0);
  CHECK(dsc(Mask::Zero(4, 4), a) == 0.0);
  const Mask x = mask_with_area(4, 4, 2);
  const Mask y = mask_with_area(4, 4, 4);
  CHECK(dsc(x, y) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(dsc(Mask::Zero(4, 4), Mask::Zero(4, 5)), std::invalid_argument);
}

TEST_CASE("dsc matches the pixel-count oracle on random mask pairs") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> fill(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Mask x = random_mask(rng, 16, 16, fill(rng));
    const Mask y = random_mask(rng, 16, 16, fill(rng));
    CHECK(dsc(x, y) == oracle::dsc(x, y));
    CHECK(dsc(x, y) == dsc(y, x));
    const auto err = area_error_pct(x, y);
    const auto bias = area_bias_pct(x, y);
    REQUIRE(err.has_value() == bias.has_value());
    if (err) CHECK(*err == std::abs(*bias));
  }
}

TEST_CASE("area statistics examples") {
  const Mask gt = mask_with_area(20, 20, 100);
  const Mask over = mask_with_area(20, 20, 110);
  CHECK(*area_error_pct(over, gt) == doctest::Approx(10.0));
  CHECK(*area_bias_pct(over, gt) == doctest::Approx(10.0));
  const Mask under = mask_with_area(20, 20, 75);
  CHECK(*area_bias_pct(under, gt) == doctest::Approx(-25.0));
  CHECK(*area_error_pct(under, gt) == doctest::Approx(25.0));
  CHECK(*area_error_pct(gt, gt) == 0.0);
  CHECK(*area_bias_pct(gt, gt) == 0.0);
  CHECK(!area_error_pct(gt, Mask::Zero(20, 20)));
  CHECK(!area_bias_pct(gt, Mask::Zero(20, 20)));

  const MetricsRecord r = evaluate("007", "baseline", 2, under, gt);
  CHECK(r.id == "007");
  CHECK(r.fold == 2);
  CHECK(r.dsc == doctest::Approx(2.0 * 75 / 175));
}

TEST_CASE("median_quartiles examples and permutation invariance") {
  const std::vector<double> five{1, 2, 3, 4, 5};
  const Quartiles q5 = median_quartiles(five);
  CHECK(q5.q1 == 2.0);
  CHECK(q5.median == 3.0);
  CHECK(q5.q3 == 4.0);
  const std::vector<double> four{1, 2, 3, 4};
  const Quartiles q4 = median_quartiles(four);
  CHECK(q4.q1 == doctest::Approx(1.75));
  CHECK(q4.median == doctest::Approx(2.5));
  CHECK(q4.q3 == doctest::Approx(3.25));
  const std::vector<double> one{0.42};
  const Quartiles q1 = median_quartiles(one);
  CHECK(q1.q1 == 0.42);
  CHECK(q1.median == 0.42);
  CHECK(q1.q3 == 0.42);
  CHECK_THROWS_AS(median_quartiles(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(quantile(five, 1.5), std::invalid_argument);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(1 + t % 17);
    for (auto& x : v) x = u(rng);
    const Quartiles ref = median_quartiles(v);
    std::shuffle(v.begin(), v.end(), rng);
    const Quartiles q = median_quartiles(v);
    CHECK(q.q1 == ref.q1);
    CHECK(q.median == ref.median);
    CHECK(q.q3 == ref.q3);
    CHECK(q.q1 <= q.median);
    CHECK(q.median <= q.q3);
  }
}

TEST_CASE("histogram bins") {
  const std::vector<double> two{0.05, 0.15};
  CHECK(histogram_counts(two) == std::vector<int>{1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
  const std::vector<double> edge{1.0, 0.0};
  CHECK(histogram_counts(edge) == std::vector<int>{1, 0, 0, 0, 0, 0, 0, 0, 0, 1});
  CHECK(histogram_counts(std::vector<double>{}) == std::vector<int>(10, 0));
  const std::vector<double> outside{-0.1, 1.1, 0.5};
  const auto c = histogram_counts(outside);
  CHECK(std::accumulate(c.begin(), c.end(), 0) == 1);
  CHECK_THROWS_AS(histogram_counts(two, 0), std::invalid_argument);

  const std::string csv = histogram_csv(two, 4);
  CHECK(csv ==
        "bin_left,bin_right,count\n"
        "0.0000,0.2500,2\n"
        "0.2500,0.5000,0\n"
        "0.5000,0.7500,0\n"
        "0.7500,1.0000,0\n");
}

TEST_CASE("wilcoxon canonical cases") {
  const std::vector<double> a6{1.1, 2.2, 3.3, 4.4, 5.5, 6.6}, z6(6, 0.0);
  const WilcoxonResult r6 = wilcoxon_signed_rank(a6, z6);
  CHECK(r6.n_effective == 6);
  CHECK(r6.w == 21.0);
  CHECK(r6.p == 0.03125);
  CHECK(r6.method == WilcoxonMethod::exact);

  const std::vector<double> a5{-1, -2, -3, -4, -5}, z5(5, 0.0);
  const WilcoxonResult r5 = wilcoxon_signed_rank(a5, z5);
  CHECK(r5.w == 0.0);
  CHECK(r5.p == 0.0625);

  CHECK_THROWS_AS(wilcoxon_signed_rank(a6, a6), NoNonzeroPairs);
  CHECK_THROWS_AS(wilcoxon_signed_rank(a6, z5), std::invalid_argument);

  // zero differences are dropped before ranking
  const std::vector<double> az{1, 2, 3, 4, 5, 6, 7}, bz{0, 0, 0, 0, 0, 0, 7};
  const WilcoxonResult rz = wilcoxon_signed_rank(az, bz);
  CHECK(rz.n_effective == 6);
  CHECK(rz.p == 0.03125);
}

TEST_CASE("wilcoxon exact path matches full sign enumeration") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size(1, 10);
  std::uniform_int_distribution<int> level(-4, 4);
  for (int t = 0; t < 100; ++t) {
    const int n = size(rng);
    std::vector<double> a(n), b(n);
    // coarse integer levels produce ties and zero differences
    for (int i = 0; i < n; ++i) {
      a[i] = level(rng);
      b[i] = level(rng);
    }
    double expected = 0.0;
    bool all_zero = true;
    for (int i = 0; i < n; ++i) all_zero = all_zero && a[i] == b[i];
    if (all_zero) {
      CHECK_THROWS_AS(wilcoxon_signed_rank(a, b), NoNonzeroPairs);
      continue;
    }
    expected = oracle::wilcoxon_enumeration(a, b);
    const WilcoxonResult r = wilcoxon_signed_rank(a, b, WilcoxonMethod::exact);
    INFO("trial " << t << " n " << n);
    CHECK(r.p == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.p > 0.0);
    CHECK(r.p <= 1.0);
    CHECK(r.w >= 0.0);
    CHECK(r.w <= r.n_effective * (r.n_effective + 1) / 2.0);
  }
}

TEST_CASE("wilcoxon normal approximation tracks the exact path at n = 25") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double shift : {0.0, 0.2, 0.4, 0.6}) {
    for (int t = 0; t < 10; ++t) {
      std::vector<double> a(25), b(25);
      for (int i = 0; i < 25; ++i) {
        a[i] = noise(rng) + shift;
        b[i] = noise(rng);
      }
      const double exact = wilcoxon_signed_rank(a, b, WilcoxonMethod::exact).p;
      const WilcoxonResult approx = wilcoxon_signed_rank(a, b, WilcoxonMethod::normal);
      CHECK(approx.method == WilcoxonMethod::normal);
      CHECK(std::abs(approx.p - exact) <= 0.01);
      CHECK(wilcoxon_signed_rank(a, b).method == WilcoxonMethod::exact);
    }
  }
  std::vector<double> a(26), b(26, 0.0);
  std::iota(a.begin(), a.end(), 1.0);
  CHECK(wilcoxon_signed_rank(a, b).method == WilcoxonMethod::normal);
}

TEST_CASE("kfold_split partition properties") {
  const auto ids51 = make_ids(51);
  const FoldSplit s51 = kfold_split(ids51, 5, 0);
  check_partition(s51, ids51, 5);
  std::vector<std::size_t> sizes;
  for (const auto& f : s51.folds) sizes.push_back(f.size());
  CHECK(sizes == std::vector<std::size_t>{11, 10, 10, 10, 10});

  const auto ids92 = make_ids(92);
  const FoldSplit s92 = kfold_split(ids92, 5, 3);
  check_partition(s92, ids92, 5);
  sizes.clear();
  for (const auto& f : s92.folds) sizes.push_back(f.size());
  CHECK(sizes == std::vector<std::size_t>{19, 19, 18, 18, 18});

  CHECK(kfold_split(ids51, 5, 0).folds == s51.folds);
  CHECK(kfold_split(ids51, 5, 1).folds != s51.folds);
  CHECK(s51.fold_of(ids51[7]) >= 0);
  CHECK(s51.fold_of("missing") == -1);

  for (int n = 2; n <= 30; ++n)
    for (int k = 2; k <= std::min(n, 7); ++k)
      for (std::uint64_t seed = 0; seed < 3; ++seed) check_partition(kfold_split(make_ids(n), k, seed), make_ids(n), k);

  CHECK_THROWS_AS(kfold_split(make_ids(4), 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(kfold_split(make_ids(10), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(kfold_split({"a", "b", "a"}, 2, 0), std::invalid_argument);
}

TEST_CASE("cross_validate bookkeeping and reproducibility") {
  const std::vector<Sample> data = generate_dataset(12, preset_a(), 50);
  TrainConfig train;
  train.epochs = 1;
  train.steps_per_epoch = 2;
  train.batch_size = 2;
  train.seed = 9;
  UNetConfig net;
  net.depth = 1;
  net.base_channels = 2;
  CVOptions opts;
  opts.k = 3;
  opts.split_seed = 4;
  int epoch_calls = 0;
  opts.on_epoch = [&](int, const EpochRecord&) { ++epoch_calls; };

  const CVResult r = cross_validate(data, train, net, opts);
  CHECK(epoch_calls == 3);
  REQUIRE(r.records.size() == data.size());
  std::set<std::string> seen;
  for (const auto& rec : r.records) {
    seen.insert(rec.id);
    CHECK(rec.variant == "baseline");
    CHECK(rec.fold == r.split.fold_of(rec.id));
    CHECK(rec.dsc >= 0.0);
    CHECK(rec.dsc <= 1.0);
  }
  CHECK(seen.size() == data.size());
  CHECK(std::is_sorted(r.records.begin(), r.records.end(),
                       [](const MetricsRecord& a, const MetricsRecord& b) { return a.id < b.id; }));
  for (const auto& a : r.audit) {
    const std::set<std::string> tr(a.train_ids.begin(), a.train_ids.end());
    for (const auto& id : a.test_ids) CHECK(!tr.count(id));
    CHECK(a.train_ids.size() + a.test_ids.size() == data.size());
    CHECK(a.test_ids.size() == r.split.folds[a.fold].size());
  }

  opts.on_epoch = nullptr;
  opts.fold_workers = 3;
  const CVResult again = cross_validate(data, train, net, opts);
  REQUIRE(again.records.size() == r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    CHECK(again.records[i].id == r.records[i].id);
    CHECK(again.records[i].dsc == r.records[i].dsc);
    CHECK(again.records[i].area_bias_pct == r.records[i].area_bias_pct);
  }
  for (int f = 0; f < opts.k; ++f)
    CHECK(again.logs[f].epochs.front().mean_loss == r.logs[f].epochs.front().mean_loss);
}

TEST_CASE("format helpers") {
  CHECK(format_quartiles({0.70, 0.82, 0.89}, 2) == "0.82 (0.70, 0.89)");
  CHECK(format_fixed(-0.0001, 2) == "0.00");
  CHECK(format_fixed(std::nan(""), 2) == "nan");
  CHECK(format_fixed(12.345, 1) == "12.3");
}

TEST_CASE("report layout and significance") {
  std::vector<MetricsRecord> base, coord;
  for (int i = 0; i < 8; ++i) {
    const std::string id = sample_id(i, 8);
    base.push_back(record(id, "baseline", 0.5 + 0.01 * i, 10.0 - i));
    coord.push_back(record(id, "coordconv", 0.8 + 0.01 * i, i % 2 ? 2.0 : -2.0));
  }
  base[3].abs_area_error_pct.reset();
  base[3].area_bias_pct.reset();
  const std::vector<double> inter{0.7, 0.75, 0.8};
  const CVReport rep = summarize_report(base, coord, inter, "Dataset X");
  CHECK(rep.text.starts_with("Dataset X\n\n"));
  CHECK(rep.text.find("Baseline") != std::string::npos);
  CHECK(rep.text.find("Coord. conv.") != std::string::npos);
  CHECK(rep.text.find("Inter-observer var.") != std::string::npos);
  CHECK(rep.text.find(format_quartiles(rep.baseline.dsc, 2)) != std::string::npos);
  CHECK(rep.text.find(format_quartiles(rep.coordconv.dsc, 2)) != std::string::npos);
  CHECK(rep.text.find(format_quartiles(*rep.interobserver, 2) + "\n") != std::string::npos);
  CHECK(rep.text.find("Abs. area error %") != std::string::npos);
  CHECK(rep.text.find("Area bias %") != std::string::npos);
  CHECK(rep.text.find("baseline 1, coord. conv. 0") != std::string::npos);
  CHECK(rep.baseline.undefined_area == 1);
  REQUIRE(rep.wilcoxon.has_value());
  CHECK(rep.wilcoxon->p == 2.0 / 256.0);
  CHECK(rep.text.find("p = 0.0078 (exact), significant at 0.05") != std::string::npos);
  CHECK(rep.interobserver->median == doctest::Approx(0.75));

  const CVReport same = summarize_report(base, base, {});
  CHECK(!same.wilcoxon.has_value());
  CHECK(same.text.find("p = n/a") != std::string::npos);
  CHECK(same.text.find("Inter-observer var.\n") != std::string::npos);

  std::vector<MetricsRecord> short_coord(coord.begin(), coord.end() - 1);
  CHECK_THROWS_AS(summarize_report(base, short_coord, {}), std::invalid_argument);
  CHECK_THROWS_AS(summarize_report({}, coord, {}), std::invalid_argument);
}
