#pragma once

#include "effseg/layers.hpp"

#include <cmath>

namespace effseg {

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Scalar cross_entropy = 0;
  Scalar dice = 0;
  Tensor<Scalar> grad;  // dL/dlogits
};

/// Sum of pixel-mean cross entropy and batch-level soft Dice loss on the
/// foreground channel:  1 - (2 sum(p*t) + eps) / (sum(p) + sum(t) + eps).
/// target is (N, 1, H, W) with values in {0, 1}.
template <typename Scalar>
LossResult<Scalar> dice_ce_loss(const Tensor<Scalar>& logits, const Tensor<Scalar>& target,
                                Scalar eps = Scalar(1e-5)) {
  const Shape& s = logits.shape();
  const Shape& t = target.shape();
  if (s.c != 2) throw ShapeError("dice_ce_loss: expected 2 logit channels, got " + s.str());
  if (t != Shape{s.n, 1, s.h, s.w})
    throw ShapeError("dice_ce_loss: target " + t.str() + " does not match logits " + s.str());
  for (Index i = 0; i < target.size(); ++i) {
    const Scalar v = target.data()[i];
    if (v != Scalar(0) && v != Scalar(1)) throw std::invalid_argument("dice_ce_loss: target is not binary");
  }

  const Index m = s.plane();
  const Scalar count = static_cast<Scalar>(s.n * m);
  const Tensor<Scalar> prob = softmax_channel(logits);

  Scalar ce = 0;
  Scalar inter = 0;
  Scalar psum = 0;
  Scalar tsum = 0;
  for (Index n = 0; n < s.n; ++n) {
    const auto zb = logits.plane(n, 0);
    const auto zf = logits.plane(n, 1);
    const auto pf = prob.plane(n, 1);
    const auto tg = target.plane(n, 0);
    for (Index r = 0; r < s.h; ++r)
      for (Index c = 0; c < s.w; ++c) {
        const Scalar zmax = std::max(zb(r, c), zf(r, c));
        const Scalar lse = zmax + std::log(std::exp(zb(r, c) - zmax) + std::exp(zf(r, c) - zmax));
        ce += lse - (tg(r, c) != Scalar(0) ? zf(r, c) : zb(r, c));
        inter += pf(r, c) * tg(r, c);
        psum += pf(r, c);
        tsum += tg(r, c);
      }
  }
  ce /= count;
  const Scalar num = Scalar(2) * inter + eps;
  const Scalar den = psum + tsum + eps;
  const Scalar dice = Scalar(1) - num / den;

  LossResult<Scalar> out;
  out.cross_entropy = ce;
  out.dice = dice;
  out.loss = ce + dice;
  out.grad = Tensor<Scalar>(s);
  for (Index n = 0; n < s.n; ++n) {
    const auto pb = prob.plane(n, 0);
    const auto pf = prob.plane(n, 1);
    const auto tg = target.plane(n, 0);
    auto gb = out.grad.plane(n, 0);
    auto gf = out.grad.plane(n, 1);
    for (Index r = 0; r < s.h; ++r)
      for (Index c = 0; c < s.w; ++c) {
        const Scalar tv = tg(r, c);
        // d(dice)/d(p_fg), then chain through the 2-class softmax
        const Scalar dd_dp = -(Scalar(2) * tv * den - num) / (den * den);
        const Scalar dp = pf(r, c) * pb(r, c) * dd_dp;
        gf(r, c) = (pf(r, c) - tv) / count + dp;
        gb(r, c) = (pb(r, c) - (Scalar(1) - tv)) / count - dp;
      }
  }
  return out;
}

}  // namespace effseg
