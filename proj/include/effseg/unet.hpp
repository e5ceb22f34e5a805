#pragma once

// Encoder-decoder segmentation network (2-D U-Net) built from the layer
// primitives in layers.hpp, with an explicit forward tape for backprop.

#include "effseg/coords.hpp"
#include "effseg/image.hpp"
#include "effseg/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace effseg {

struct UNetConfig {
  int depth = 3;          // number of down/upsampling stages
  int base_channels = 8;  // width of the first stage; doubles per stage
  int max_channels = 256;
  CoordMode coord_mode = CoordMode::none;
  bool normalize_coords = false;
  double leaky_slope = 0.01;
  double norm_eps = 1e-5;

  static constexpr int num_classes = 2;

  int in_channels() const { return input_channels(coord_mode); }
  int width(int level) const {
    long w = base_channels;
    for (int i = 0; i < level && w < max_channels; ++i) w *= 2;
    return static_cast<int>(std::min<long>(w, max_channels));
  }
  /// Channel widths of the full-resolution-and-below encoder stages (excludes the bottleneck).
  std::vector<int> encoder_widths() const {
    std::vector<int> w;
    for (int l = 0; l < depth; ++l) w.push_back(width(l));
    return w;
  }
  int bottleneck_width() const { return width(depth); }
  int divisor() const { return 1 << depth; }

  void validate() const {
    if (depth < 1 || depth > 8) throw std::invalid_argument("UNetConfig: depth must be in [1, 8]");
    if (base_channels < 1) throw std::invalid_argument("UNetConfig: base_channels must be >= 1");
    if (max_channels < base_channels) throw std::invalid_argument("UNetConfig: max_channels < base_channels");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw std::invalid_argument("UNetConfig: slope not in [0,1)");
    if (!(norm_eps > 0.0)) throw std::invalid_argument("UNetConfig: norm_eps must be > 0");
  }
};

namespace detail {

struct ConvUnit {
  Index weight = -1;
  Index bias = -1;
  Index gamma = -1;  // -1: plain convolution, no norm/activation
  Index beta = -1;
  Index stride = 1;
  Index pad = 1;
  bool normalized() const { return gamma >= 0; }
};

struct UNetLayout {
  std::vector<std::array<ConvUnit, 2>> enc;  // levels 0..depth (last is the bottleneck)
  std::vector<ConvUnit> up;                  // per decoder level 0..depth-1
  std::vector<std::array<ConvUnit, 2>> dec;  // per decoder level 0..depth-1
  ConvUnit head;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  enum class Init { he, zero, one } init;
};

// Walks the topology once; both build_model and the forward pass use it so the
// parameter order is a pure function of the config.
inline UNetLayout make_layout(const UNetConfig& cfg, std::vector<ParamSpec>* specs) {
  UNetLayout layout;
  Index next = 0;
  auto add = [&](const std::string& name, Shape shape, ParamSpec::Init init) {
    if (specs) specs->push_back({name, shape, init});
    return next++;
  };
  auto unit = [&](const std::string& prefix, int cin, int cout, int k, int stride, bool norm) {
    ConvUnit u;
    u.stride = stride;
    u.pad = k / 2;
    u.weight = add(prefix + ".weight", {cout, cin, k, k}, ParamSpec::Init::he);
    u.bias = add(prefix + ".bias", {cout, 1, 1, 1}, ParamSpec::Init::zero);
    if (norm) {
      u.gamma = add(prefix + ".norm.gamma", {cout, 1, 1, 1}, ParamSpec::Init::one);
      u.beta = add(prefix + ".norm.beta", {cout, 1, 1, 1}, ParamSpec::Init::zero);
    }
    return u;
  };

  for (int l = 0; l <= cfg.depth; ++l) {
    const std::string p = "enc" + std::to_string(l);
    const int cin = l == 0 ? cfg.in_channels() : cfg.width(l - 1);
    const int w = cfg.width(l);
    layout.enc.push_back({unit(p + ".conv0", cin, w, 3, l == 0 ? 1 : 2, true), unit(p + ".conv1", w, w, 3, 1, true)});
  }
  layout.up.resize(cfg.depth);
  layout.dec.resize(cfg.depth);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    const int w = cfg.width(l);
    layout.up[l] = unit("up" + std::to_string(l), cfg.width(l + 1), w, 1, 1, false);
    const std::string p = "dec" + std::to_string(l);
    layout.dec[l] = {unit(p + ".conv0", 2 * w, w, 3, 1, true), unit(p + ".conv1", w, w, 3, 1, true)};
  }
  layout.head = unit("head", cfg.width(0), UNetConfig::num_classes, 1, 1, false);
  return layout;
}

template <typename Scalar>
struct UnitTape {
  Conv2dCache<Scalar> conv;
  InstanceNormCache<Scalar> norm;
  Tensor<Scalar> pre_activation;
};

}  // namespace detail

template <typename Scalar>
class Model {
 public:
  Model() = default;
  Model(UNetConfig cfg, std::vector<std::string> names, std::vector<Tensor<Scalar>> params)
      : config_(cfg), names_(std::move(names)), params_(std::move(params)) {
    layout_ = detail::make_layout(config_, nullptr);
    zero_grad();
  }

  const UNetConfig& config() const { return config_; }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor<Scalar>>& params() { return params_; }
  const std::vector<Tensor<Scalar>>& params() const { return params_; }
  std::vector<Tensor<Scalar>>& grads() { return grads_; }
  const std::vector<Tensor<Scalar>>& grads() const { return grads_; }
  const detail::UNetLayout& layout() const { return layout_; }

  Index index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::out_of_range("model has no parameter '" + name + "'");
    return it - names_.begin();
  }
  Tensor<Scalar>& param(const std::string& name) { return params_[index_of(name)]; }
  const Tensor<Scalar>& param(const std::string& name) const { return params_[index_of(name)]; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  void zero_grad() {
    grads_.clear();
    for (const auto& p : params_) grads_.emplace_back(p.shape());
  }

  template <typename Other>
  Model<Other> cast() const {
    std::vector<Tensor<Other>> ps;
    for (const auto& p : params_) ps.push_back(p.template cast<Other>());
    return Model<Other>(config_, names_, std::move(ps));
  }

 private:
  UNetConfig config_;
  std::vector<std::string> names_;
  std::vector<Tensor<Scalar>> params_;
  std::vector<Tensor<Scalar>> grads_;
  detail::UNetLayout layout_;
};

/// Deterministic He-initialized model: (config, seed) -> parameters is a pure function.
template <typename Scalar>
Model<Scalar> build_model(const UNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<detail::ParamSpec> specs;
  detail::make_layout(cfg, &specs);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double gain = 2.0 / (1.0 + cfg.leaky_slope * cfg.leaky_slope);
  std::vector<std::string> names;
  std::vector<Tensor<Scalar>> params;
  for (const auto& s : specs) {
    Tensor<Scalar> t(s.shape);
    switch (s.init) {
      case detail::ParamSpec::Init::he: {
        const double sd = std::sqrt(gain / double(s.shape.c * s.shape.h * s.shape.w));
        for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(sd * normal(rng));
        break;
      }
      case detail::ParamSpec::Init::zero: break;
      case detail::ParamSpec::Init::one: t.data().setOnes(); break;
    }
    names.push_back(s.name);
    params.push_back(std::move(t));
  }
  return Model<Scalar>(cfg, std::move(names), std::move(params));
}

/// Activations recorded by a training forward pass.
template <typename Scalar>
struct ForwardTape {
  std::vector<std::array<detail::UnitTape<Scalar>, 2>> enc;
  std::vector<detail::UnitTape<Scalar>> up;
  std::vector<std::array<detail::UnitTape<Scalar>, 2>> dec;
  detail::UnitTape<Scalar> head;
  bool recorded = false;
};

namespace detail {

template <typename Scalar>
Tensor<Scalar> unit_forward(const Model<Scalar>& m, const ConvUnit& u, Tensor<Scalar> x, UnitTape<Scalar>* tape) {
  const auto& p = m.params();
  Tensor<Scalar> y = tape ? conv2d(std::move(x), p[u.weight], p[u.bias].data(), u.stride, u.pad, tape->conv)
                          : conv2d(x, p[u.weight], p[u.bias].data(), u.stride, u.pad);
  if (!u.normalized()) return y;
  y = instance_norm(y, static_cast<Scalar>(m.config().norm_eps), tape ? &tape->norm : nullptr);
  y = channel_affine(y, p[u.gamma].data(), p[u.beta].data());
  Tensor<Scalar> out = leaky_relu(y, static_cast<Scalar>(m.config().leaky_slope));
  if (tape) tape->pre_activation = std::move(y);
  return out;
}

template <typename Scalar>
Tensor<Scalar> unit_backward(Model<Scalar>& m, const ConvUnit& u, const Tensor<Scalar>& upstream,
                             const UnitTape<Scalar>& tape, bool need_input_grad) {
  auto& p = m.params();
  auto& g = m.grads();
  Tensor<Scalar> dy = upstream;
  if (u.normalized()) {
    dy = leaky_relu_backward(dy, tape.pre_activation, static_cast<Scalar>(m.config().leaky_slope));
    auto ag = channel_affine_backward(dy, tape.norm.normalized, p[u.gamma].data());
    g[u.gamma].data() = ag.gamma;
    g[u.beta].data() = ag.beta;
    dy = instance_norm_backward(ag.input, tape.norm);
  }
  auto cg = conv2d_backward(dy, tape.conv, p[u.weight], need_input_grad);
  g[u.weight] = std::move(cg.kernel);
  g[u.bias].data() = cg.bias;
  return std::move(cg.input);
}

}  // namespace detail

/// Logits (N, 2, H, W). Pass a tape to record activations for `backward`.
template <typename Scalar>
Tensor<Scalar> forward(const Model<Scalar>& model, const Tensor<Scalar>& batch, ForwardTape<Scalar>* tape = nullptr) {
  const UNetConfig& cfg = model.config();
  const Shape& s = batch.shape();
  if (s.c != cfg.in_channels())
    throw ShapeError("forward: model expects " + std::to_string(cfg.in_channels()) + " input channels, batch is " +
                     s.str());
  if (s.h % cfg.divisor() != 0 || s.w % cfg.divisor() != 0 || s.h == 0 || s.w == 0)
    throw ShapeError("forward: spatial dims " + s.str() + " not divisible by " + std::to_string(cfg.divisor()));
  const auto& L = model.layout();
  if (tape) {
    tape->enc.assign(L.enc.size(), {});
    tape->up.assign(L.up.size(), {});
    tape->dec.assign(L.dec.size(), {});
  }

  std::vector<Tensor<Scalar>> skips;
  Tensor<Scalar> x = batch;
  for (std::size_t l = 0; l < L.enc.size(); ++l) {
    x = detail::unit_forward(model, L.enc[l][0], std::move(x), tape ? &tape->enc[l][0] : nullptr);
    x = detail::unit_forward(model, L.enc[l][1], std::move(x), tape ? &tape->enc[l][1] : nullptr);
    if (l + 1 < L.enc.size()) skips.push_back(x);
  }
  for (int l = cfg.depth - 1; l >= 0; --l) {
    Tensor<Scalar> u = detail::unit_forward(model, L.up[l], upsample2x(x), tape ? &tape->up[l] : nullptr);
    x = concat_channels(u, skips[l]);
    x = detail::unit_forward(model, L.dec[l][0], std::move(x), tape ? &tape->dec[l][0] : nullptr);
    x = detail::unit_forward(model, L.dec[l][1], std::move(x), tape ? &tape->dec[l][1] : nullptr);
  }
  Tensor<Scalar> logits = detail::unit_forward(model, L.head, std::move(x), tape ? &tape->head : nullptr);
  if (tape) tape->recorded = true;
  return logits;
}

/// Backpropagates dL/dlogits through a recorded forward pass into model.grads().
template <typename Scalar>
void backward(Model<Scalar>& model, const ForwardTape<Scalar>& tape, const Tensor<Scalar>& dlogits) {
  if (!tape.recorded) throw std::logic_error("backward: forward tape was not recorded");
  const UNetConfig& cfg = model.config();
  const auto& L = model.layout();
  model.zero_grad();

  Tensor<Scalar> g = detail::unit_backward(model, L.head, dlogits, tape.head, true);
  std::vector<Tensor<Scalar>> skip_grads(cfg.depth);
  for (int l = 0; l < cfg.depth; ++l) {
    g = detail::unit_backward(model, L.dec[l][1], g, tape.dec[l][1], true);
    g = detail::unit_backward(model, L.dec[l][0], g, tape.dec[l][0], true);
    auto [gu, gskip] = split_channels(g, cfg.width(l));
    skip_grads[l] = std::move(gskip);
    g = upsample2x_backward(detail::unit_backward(model, L.up[l], gu, tape.up[l], true));
  }
  for (int l = cfg.depth; l >= 0; --l) {
    if (l < cfg.depth) g.data() += skip_grads[l].data();
    g = detail::unit_backward(model, L.enc[l][1], g, tape.enc[l][1], true);
    g = detail::unit_backward(model, L.enc[l][0], g, tape.enc[l][0], l > 0);
  }
}

/// Argmax decoding: foreground iff effusion logit > background logit (ties -> background).
template <typename Scalar>
std::vector<Mask> predict_mask(const Tensor<Scalar>& logits) {
  const Shape& s = logits.shape();
  if (s.c != 2) throw ShapeError("predict_mask: expected 2 logit channels, got " + s.str());
  std::vector<Mask> masks;
  for (Index n = 0; n < s.n; ++n) {
    masks.push_back((logits.plane(n, 1).array() > logits.plane(n, 0).array()).template cast<std::uint8_t>());
  }
  return masks;
}

}  // namespace effseg
