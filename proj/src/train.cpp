#include "effseg/train.hpp"

#include <cmath>
#include <mutex>
#include <thread>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace effseg {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (steps_per_epoch < 1) throw std::invalid_argument("train: steps_per_epoch must be >= 1");
  if (!(lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (poly_exponent < 0.0) throw std::invalid_argument("train: poly_exponent must be >= 0");
  if (grad_clip < 0.0) throw std::invalid_argument("train: grad_clip must be >= 0");
  if (workers < 1) throw std::invalid_argument("train: workers must be >= 1");
  augment.validate();
}

double lr_poly(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs)
    throw std::out_of_range("lr_poly: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(cfg.epochs) + ")");
  return cfg.lr0 * std::pow(1.0 - double(epoch) / cfg.epochs, cfg.poly_exponent);
}

void tune_allocator() {
#ifdef __GLIBC__
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 512 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

namespace {

void check_uniform_dims(std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("empty sample set");
  const Index h = samples.front().image.rows();
  const Index w = samples.front().image.cols();
  for (const auto& s : samples)
    if (s.image.rows() != h || s.image.cols() != w || s.mask.rows() != h || s.mask.cols() != w)
      throw std::invalid_argument("sample '" + s.id + "' differs in size from the rest of the set");
}

Tensorf with_coords(const std::vector<Image>& images, const std::vector<std::optional<Point>>& apexes,
                    const UNetConfig& net) {
  Tensorf batch = to_batch<float>(images);
  if (net.coord_mode == CoordMode::none) return batch;
  std::vector<Point> pts;
  if (net.coord_mode == CoordMode::radial) {
    for (std::size_t i = 0; i < apexes.size(); ++i) {
      if (!apexes[i]) throw std::invalid_argument("radial coordinates need a probe apex for every sample");
      pts.push_back(*apexes[i]);
    }
  }
  return add_coord_channels<float>(batch, net.coord_mode, pts, net.normalize_coords);
}

}  // namespace

Batch prepare_batch(std::span<const Sample> samples, const TrainConfig& cfg, const UNetConfig& net, int epoch,
                    int step) {
  const int B = cfg.batch_size;
  std::vector<Image> images(B);
  std::vector<Mask> masks(B);
  std::vector<std::optional<Point>> apexes(B);
  Batch out;
  out.indices.assign(B, 0);

  auto slot = [&](int k) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(step),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    const int idx = std::uniform_int_distribution<int>(0, static_cast<int>(samples.size()) - 1)(rng);
    const Sample& s = samples[idx];
    Augmented a = augment_sample(s.image, s.mask, cfg.augment, rng, s.apex);
    images[k] = std::move(a.image);
    masks[k] = std::move(a.mask);
    apexes[k] = a.apex;
    out.indices[k] = idx;
  };

  const int workers = std::min(cfg.workers, B);
  if (workers <= 1) {
    for (int k = 0; k < B; ++k) slot(k);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int k = w; k < B; k += workers) slot(k);
      });
    for (auto& t : pool) t.join();
  }

  out.input = with_coords(images, apexes, net);
  out.target = to_target<float>(masks);
  return out;
}

Tensorf network_input(std::span<const Sample> samples, const UNetConfig& net) {
  std::vector<Image> images;
  std::vector<std::optional<Point>> apexes;
  for (const auto& s : samples) {
    images.push_back(s.image);
    apexes.push_back(s.apex);
  }
  return with_coords(images, apexes, net);
}

TrainResult train_fold(std::span<const Sample> samples, const TrainConfig& cfg, const UNetConfig& net,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  net.validate();
  if (samples.empty()) throw std::invalid_argument("train_fold: empty training set");
  if (static_cast<int>(samples.size()) < cfg.batch_size)
    throw std::invalid_argument("train_fold: " + std::to_string(samples.size()) + " samples, fewer than batch_size " +
                                std::to_string(cfg.batch_size));
  check_uniform_dims(samples);
  tune_allocator();

  TrainResult result{build_model<float>(net, cfg.seed), {}};
  Model<float>& model = result.model;
  OptimizerState<float> opt(model.params(), static_cast<float>(cfg.momentum), static_cast<float>(cfg.lr0));
  ForwardTape<float> tape;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.lr = static_cast<float>(lr_poly(epoch, cfg));
    double loss_sum = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const Batch batch = prepare_batch(samples, cfg, net, epoch, step);
      const Tensorf logits = forward(model, batch.input, &tape);
      LossResult<float> loss = dice_ce_loss(logits, batch.target);
      if (!std::isfinite(loss.loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
      backward(model, tape, loss.grad);

      if (cfg.grad_clip > 0.0) {
        double sq = 0.0;
        for (const auto& g : model.grads()) sq += g.data().template cast<double>().squaredNorm();
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm)) throw NumericError("non-finite gradient at epoch " + std::to_string(epoch));
        if (norm > cfg.grad_clip) {
          const float f = static_cast<float>(cfg.grad_clip / norm);
          for (auto& g : model.grads()) g.data() *= f;
        }
      }
      sgd_nesterov_step(model.params(), model.grads(), opt);
      loss_sum += loss.loss;
    }
    const EpochRecord rec{epoch, loss_sum / cfg.steps_per_epoch, lr_poly(epoch, cfg)};
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::vector<Mask> predict(const Model<float>& model, std::span<const Sample> samples, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("predict: batch_size must be >= 1");
  check_uniform_dims(samples);
  std::vector<Mask> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); i += batch_size) {
    const auto chunk = samples.subspan(i, std::min<std::size_t>(batch_size, samples.size() - i));
    const Tensorf logits = forward(model, network_input(chunk, model.config()));
    for (auto& m : predict_mask(logits)) out.push_back(std::move(m));
  }
  return out;
}

}  // namespace effseg
