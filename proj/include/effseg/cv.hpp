#pragma once

#include "effseg/metrics.hpp"
#include "effseg/train.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace effseg {

struct FoldSplit {
  std::vector<std::vector<std::string>> folds;

  int k() const { return static_cast<int>(folds.size()); }
  /// Fold holding `id`, or -1.
  int fold_of(const std::string& id) const;
};

/// Seeded shuffle of the ids, then dealt round-robin into k folds.
FoldSplit kfold_split(const std::vector<std::string>& ids, int k, std::uint64_t seed);

struct CVOptions {
  int k = 5;
  std::uint64_t split_seed = 0;
  std::string variant = "baseline";
  int fold_workers = 1;  // folds trained concurrently
  std::function<void(int fold, const EpochRecord&)> on_epoch;
};

struct FoldAudit {
  int fold = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct CVResult {
  std::vector<MetricsRecord> records;  // sorted by id
  FoldSplit split;
  std::vector<FoldAudit> audit;
  std::vector<TrainLog> logs;
};

/// Image-level k-fold cross-validation. Fold f trains on the other folds with
/// seed train.seed + f and predicts each of its held-out images once.
CVResult cross_validate(const std::vector<Sample>& dataset, const TrainConfig& train, const UNetConfig& net,
                        const CVOptions& opts = {});

}  // namespace effseg
