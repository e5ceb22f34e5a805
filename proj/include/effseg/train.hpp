#pragma once

#include "effseg/augment.hpp"
#include "effseg/coords.hpp"
#include "effseg/loss.hpp"
#include "effseg/optim.hpp"
#include "effseg/phantom.hpp"
#include "effseg/unet.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace effseg {

/// Raised when a loss or gradient stops being finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 4;
  double lr0 = 0.01;
  double momentum = 0.99;
  double poly_exponent = 0.9;
  int steps_per_epoch = 50;
  std::uint64_t seed = 0;
  double grad_clip = 12.0;  // global gradient-norm cap, 0 disables
  int workers = 1;          // threads preparing batch slots
  AugmentConfig augment;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

/// lr0 * (1 - epoch / epochs) ^ poly_exponent, for 0 <= epoch < epochs.
double lr_poly(int epoch, const TrainConfig& cfg);

struct Batch {
  Tensorf input;   // (N, in_channels, H, W)
  Tensorf target;  // (N, 1, H, W)
  std::vector<int> indices;
};

/// Draws batch_size samples with replacement and augments them. Slot k uses its
/// own RNG seeded from (seed, epoch, step, k), so the result does not depend on
/// the worker count. Coordinate channels are appended after augmentation.
Batch prepare_batch(std::span<const Sample> samples, const TrainConfig& cfg, const UNetConfig& net, int epoch,
                    int step);

/// Network input for un-augmented images (inference).
Tensorf network_input(std::span<const Sample> samples, const UNetConfig& net);

struct TrainResult {
  Model<float> model;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains for cfg.epochs epochs and returns the final-epoch model.
TrainResult train_fold(std::span<const Sample> samples, const TrainConfig& cfg, const UNetConfig& net,
                       const EpochCallback& on_epoch = {});

/// Predicted masks for each sample, evaluated in minibatches of `batch_size`.
std::vector<Mask> predict(const Model<float>& model, std::span<const Sample> samples, int batch_size = 4);

/// Raises the glibc mmap/trim thresholds so per-step tensor buffers are reused
/// instead of being returned to the kernel. No-op elsewhere; safe to call repeatedly.
void tune_allocator();

}  // namespace effseg
