#include "effseg/cv.hpp"

#include <algorithm>
#include <exception>
#include <random>
#include <set>
#include <thread>

namespace effseg {

int FoldSplit::fold_of(const std::string& id) const {
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (std::find(folds[f].begin(), folds[f].end(), id) != folds[f].end()) return static_cast<int>(f);
  return -1;
}

FoldSplit kfold_split(const std::vector<std::string>& ids, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (static_cast<int>(ids.size()) < k)
    throw std::invalid_argument("kfold_split: " + std::to_string(ids.size()) + " ids cannot fill " +
                                std::to_string(k) + " folds");
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
    throw std::invalid_argument("kfold_split: duplicate ids");
  std::vector<std::string> order = ids;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldSplit split;
  split.folds.resize(k);
  for (std::size_t i = 0; i < order.size(); ++i) split.folds[i % k].push_back(order[i]);
  return split;
}

CVResult cross_validate(const std::vector<Sample>& dataset, const TrainConfig& train, const UNetConfig& net,
                        const CVOptions& opts) {
  train.validate();
  net.validate();
  std::vector<std::string> ids;
  for (const auto& s : dataset) ids.push_back(s.id);

  CVResult result;
  result.split = kfold_split(ids, opts.k, opts.split_seed);
  result.audit.resize(opts.k);
  result.logs.resize(opts.k);
  std::vector<std::vector<MetricsRecord>> per_fold(opts.k);
  std::vector<std::exception_ptr> errors(opts.k);

  auto run_fold = [&](int f) {
    try {
      const auto& held = result.split.folds[f];
      const std::set<std::string> held_set(held.begin(), held.end());
      std::vector<Sample> train_set, test_set;
      for (const auto& s : dataset) (held_set.count(s.id) ? test_set : train_set).push_back(s);

      FoldAudit& audit = result.audit[f];
      audit.fold = f;
      for (const auto& s : train_set) audit.train_ids.push_back(s.id);
      for (const auto& s : test_set) audit.test_ids.push_back(s.id);

      TrainConfig cfg = train;
      cfg.seed = train.seed + static_cast<std::uint64_t>(f);
      EpochCallback cb;
      if (opts.on_epoch) cb = [&, f](const EpochRecord& r) { opts.on_epoch(f, r); };
      TrainResult trained = train_fold(train_set, cfg, net, cb);
      result.logs[f] = std::move(trained.log);

      const std::vector<Mask> preds = predict(trained.model, test_set, train.batch_size);
      for (std::size_t i = 0; i < test_set.size(); ++i)
        per_fold[f].push_back(evaluate(test_set[i].id, opts.variant, f, preds[i], test_set[i].mask));
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };

  const int workers = std::clamp(opts.fold_workers, 1, opts.k);
  if (workers == 1) {
    for (int f = 0; f < opts.k; ++f) run_fold(f);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int f = w; f < opts.k; f += workers) run_fold(f);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (auto& recs : per_fold)
    for (auto& r : recs) result.records.push_back(std::move(r));
  std::sort(result.records.begin(), result.records.end(),
            [](const MetricsRecord& a, const MetricsRecord& b) { return a.id < b.id; });
  return result;
}

}  // namespace effseg
