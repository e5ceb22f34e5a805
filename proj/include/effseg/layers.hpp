#pragma once

// Layer primitives with hand-written backward passes. Each forward is a pure
// function; the backward takes whatever the forward cached.

#include "effseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace effseg {

namespace detail {

inline Index conv_out(Index in, Index k, Index stride, Index pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// cols is (C*kh*kw) x (Ho*Wo); row index (c*kh + i)*kw + j matches the kernel layout.
template <typename Scalar>
void im2col(const Scalar* img, Index C, Index H, Index W, Index kh, Index kw, Index stride, Index pad,
            Index Ho, Index Wo, MatrixRM<Scalar>& cols) {
  cols.resize(C * kh * kw, Ho * Wo);
  for (Index c = 0; c < C; ++c) {
    const Scalar* src = img + c * H * W;
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        Scalar* dst = cols.data() + ((c * kh + i) * kw + j) * Ho * Wo;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index y = oy * stride - pad + i;
          Scalar* row = dst + oy * Wo;
          if (y < 0 || y >= H) {
            std::fill(row, row + Wo, Scalar(0));
            continue;
          }
          const Scalar* srow = src + y * W;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index x = ox * stride - pad + j;
            row[ox] = (x >= 0 && x < W) ? srow[x] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const MatrixRM<Scalar>& cols, Index C, Index H, Index W, Index kh, Index kw, Index stride,
                Index pad, Index Ho, Index Wo, Scalar* img) {
  for (Index c = 0; c < C; ++c) {
    Scalar* dst = img + c * H * W;
    for (Index i = 0; i < kh; ++i) {
      for (Index j = 0; j < kw; ++j) {
        const Scalar* src = cols.data() + ((c * kh + i) * kw + j) * Ho * Wo;
        for (Index oy = 0; oy < Ho; ++oy) {
          const Index y = oy * stride - pad + i;
          if (y < 0 || y >= H) continue;
          const Scalar* row = src + oy * Wo;
          Scalar* drow = dst + y * W;
          for (Index ox = 0; ox < Wo; ++ox) {
            const Index x = ox * stride - pad + j;
            if (x >= 0 && x < W) drow[x] += row[ox];
          }
        }
      }
    }
  }
}

inline bool is_pointwise(const Shape& k, Index stride, Index pad) {
  return k.h == 1 && k.w == 1 && stride == 1 && pad == 0;
}

// Stride-1 convolution as one small GEMM per kernel tap over a zero-padded copy
// of the input. Output is computed on the padded row pitch; the trailing
// (kw - 1) columns of every output row are scratch and get discarded.
struct ShiftedGeometry {
  Index Hp, Wp, Ho, Wo, span, buffer;
  ShiftedGeometry(const Shape& s, const Shape& k, Index pad)
      : Hp(s.h + 2 * pad), Wp(s.w + 2 * pad), Ho(Hp - k.h + 1), Wo(Wp - k.w + 1), span(Ho * Wp),
        buffer(Hp * Wp + k.w) {}
};

template <typename Scalar>
void pad_sample(const Scalar* img, Index C, Index H, Index W, Index pad, const ShiftedGeometry& g,
                MatrixRM<Scalar>& padded) {
  padded.setZero(C, g.buffer);
  for (Index c = 0; c < C; ++c)
    for (Index r = 0; r < H; ++r)
      std::copy(img + (c * H + r) * W, img + (c * H + r + 1) * W, padded.data() + c * g.buffer + (r + pad) * g.Wp + pad);
}

// Per-tap (K x C) weight slices of a (K, C, kh, kw) kernel.
template <typename Scalar>
std::vector<MatrixRM<Scalar>> tap_weights(const Tensor<Scalar>& kernel) {
  const Shape& k = kernel.shape();
  std::vector<MatrixRM<Scalar>> taps(k.h * k.w, MatrixRM<Scalar>(k.n, k.c));
  for (Index o = 0; o < k.n; ++o)
    for (Index c = 0; c < k.c; ++c)
      for (Index t = 0; t < k.h * k.w; ++t) taps[t](o, c) = kernel.data()[(o * k.c + c) * k.h * k.w + t];
  return taps;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d

template <typename Scalar>
struct Conv2dCache {
  std::optional<Tensor<Scalar>> input;
  Index stride = 1;
  Index pad = 0;
};

/// Zero-padded cross-correlation. kernel is (K, C, kh, kw), bias has length K.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& kernel,
                      const VectorRef<Scalar>& bias, Index stride, Index pad,
                      Conv2dCache<Scalar>* cache = nullptr) {
  const Shape& s = input.shape();
  const Shape& k = kernel.shape();
  if (k.c != s.c)
    throw ShapeError("conv2d: kernel " + k.str() + " expects " + std::to_string(k.c) +
                     " input channels, input is " + s.str());
  if (bias.size() != k.n)
    throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) + " != kernel count " +
                     std::to_string(k.n));
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: stride must be >= 1 and pad >= 0");
  if (s.h + 2 * pad < k.h || s.w + 2 * pad < k.w)
    throw ShapeError("conv2d: kernel " + k.str() + " larger than padded input " + s.str());

  const Index Ho = detail::conv_out(s.h, k.h, stride, pad);
  const Index Wo = detail::conv_out(s.w, k.w, stride, pad);
  auto out = Tensor<Scalar>::uninitialized({s.n, k.n, Ho, Wo});
  Eigen::Map<const MatrixRM<Scalar>> wmat(kernel.data().data(), k.n, k.c * k.h * k.w);

  MatrixRM<Scalar> cols;
  if (stride == 1 && !detail::is_pointwise(k, stride, pad)) {
    const detail::ShiftedGeometry geo(s, k, pad);
    const auto taps = detail::tap_weights(kernel);
    MatrixRM<Scalar> padded;
    MatrixRM<Scalar> acc(k.n, geo.span);
    for (Index n = 0; n < s.n; ++n) {
      detail::pad_sample(input.data().data() + n * s.c * s.plane(), s.c, s.h, s.w, pad, geo, padded);
      acc.setZero();
      for (Index i = 0; i < k.h; ++i)
        for (Index j = 0; j < k.w; ++j)
          acc.noalias() += taps[i * k.w + j] * padded.middleCols(i * geo.Wp + j, geo.span);
      auto y = out.sample(n);
      for (Index o = 0; o < k.n; ++o)
        for (Index r = 0; r < Ho; ++r)
          y.row(o).segment(r * Wo, Wo) = acc.row(o).segment(r * geo.Wp, Wo).array() + bias[o];
    }
  } else {
    for (Index n = 0; n < s.n; ++n) {
      auto y = out.sample(n);
      if (detail::is_pointwise(k, stride, pad)) {
        y.noalias() = wmat * input.sample(n);
      } else {
      detail::im2col(input.data().data() + n * s.c * s.plane(), s.c, s.h, s.w, k.h, k.w, stride, pad, Ho,
                     Wo, cols);
        y.noalias() = wmat * cols;
      }
      y.colwise() += bias;
    }
  }
  if (cache) {
    cache->input = input;
    cache->stride = stride;
    cache->pad = pad;
  }
  return out;
}

/// conv2d that takes ownership of its input and parks it in the cache.
template <typename Scalar>
Tensor<Scalar> conv2d(Tensor<Scalar>&& input, const Tensor<Scalar>& kernel, const VectorRef<Scalar>& bias,
                      Index stride, Index pad, Conv2dCache<Scalar>& cache) {
  Tensor<Scalar> out = conv2d(input, kernel, bias, stride, pad);
  cache.input = std::move(input);
  cache.stride = stride;
  cache.pad = pad;
  return out;
}

template <typename Scalar>
struct Conv2dGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernel;
  Vector<Scalar> bias;
};

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& upstream, const Conv2dCache<Scalar>& cache,
                                    const Tensor<Scalar>& kernel, bool need_input_grad = true) {
  if (!cache.input) throw std::logic_error("conv2d_backward: no forward cache (run conv2d with a cache first)");
  const Tensor<Scalar>& input = *cache.input;
  const Shape& s = input.shape();
  const Shape& k = kernel.shape();
  const Index Ho = detail::conv_out(s.h, k.h, cache.stride, cache.pad);
  const Index Wo = detail::conv_out(s.w, k.w, cache.stride, cache.pad);
  if (upstream.shape() != Shape{s.n, k.n, Ho, Wo})
    throw ShapeError("conv2d_backward: upstream " + upstream.shape().str() + " inconsistent with forward output " +
                     Shape{s.n, k.n, Ho, Wo}.str());

  Conv2dGrads<Scalar> g;
  g.kernel = Tensor<Scalar>(k);
  g.bias = Vector<Scalar>::Zero(k.n);
  if (need_input_grad)
    g.input = (cache.stride == 1 && !detail::is_pointwise(k, cache.stride, cache.pad)) ? Tensor<Scalar>::uninitialized(s)
                                                                                        : Tensor<Scalar>(s);

  Eigen::Map<const MatrixRM<Scalar>> wmat(kernel.data().data(), k.n, k.c * k.h * k.w);
  Eigen::Map<MatrixRM<Scalar>> dw(g.kernel.data().data(), k.n, k.c * k.h * k.w);
  const bool pointwise = detail::is_pointwise(k, cache.stride, cache.pad);

  if (cache.stride == 1 && !pointwise) {
    const detail::ShiftedGeometry geo(s, k, cache.pad);
    const auto taps = detail::tap_weights(kernel);
    std::vector<MatrixRM<Scalar>> dtaps(taps.size(), MatrixRM<Scalar>::Zero(k.n, k.c));
    MatrixRM<Scalar> padded;
    MatrixRM<Scalar> dy_ext(k.n, geo.span);
    MatrixRM<Scalar> dpadded;
    for (Index n = 0; n < s.n; ++n) {
      auto dy = upstream.sample(n);
      g.bias += dy.rowwise().sum();
      dy_ext.setZero();
      for (Index o = 0; o < k.n; ++o)
        for (Index r = 0; r < Ho; ++r) dy_ext.row(o).segment(r * geo.Wp, Wo) = dy.row(o).segment(r * Wo, Wo);
      detail::pad_sample(input.data().data() + n * s.c * s.plane(), s.c, s.h, s.w, cache.pad, geo, padded);
      if (need_input_grad) dpadded.setZero(s.c, geo.buffer);
      for (Index i = 0; i < k.h; ++i)
        for (Index j = 0; j < k.w; ++j) {
          const Index off = i * geo.Wp + j;
          dtaps[i * k.w + j].noalias() += dy_ext * padded.middleCols(off, geo.span).transpose();
          if (need_input_grad)
            dpadded.middleCols(off, geo.span).noalias() += taps[i * k.w + j].transpose() * dy_ext;
        }
      if (need_input_grad) {
        Scalar* dst = g.input.data().data() + n * s.c * s.plane();
        for (Index c = 0; c < s.c; ++c)
          for (Index r = 0; r < s.h; ++r) {
            const Scalar* src = dpadded.data() + c * geo.buffer + (r + cache.pad) * geo.Wp + cache.pad;
            std::copy(src, src + s.w, dst + (c * s.h + r) * s.w);
          }
      }
    }
    for (Index o = 0; o < k.n; ++o)
      for (Index c = 0; c < k.c; ++c)
        for (Index t = 0; t < k.h * k.w; ++t) g.kernel.data()[(o * k.c + c) * k.h * k.w + t] = dtaps[t](o, c);
    return g;
  }

  MatrixRM<Scalar> cols;
  MatrixRM<Scalar> dcols;
  for (Index n = 0; n < s.n; ++n) {
    auto dy = upstream.sample(n);
    g.bias += dy.rowwise().sum();
    if (pointwise) {
      dw.noalias() += dy * input.sample(n).transpose();
      if (need_input_grad) g.input.sample(n).noalias() = wmat.transpose() * dy;
      continue;
    }
    detail::im2col(input.data().data() + n * s.c * s.plane(), s.c, s.h, s.w, k.h, k.w, cache.stride, cache.pad,
                   Ho, Wo, cols);
    dw.noalias() += dy * cols.transpose();
    if (need_input_grad) {
      dcols.noalias() = wmat.transpose() * dy;
      detail::col2im_add(dcols, s.c, s.h, s.w, k.h, k.w, cache.stride, cache.pad, Ho, Wo,
                         g.input.data().data() + n * s.c * s.plane());
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// elementwise / normalization

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope) {
  auto y = Tensor<Scalar>::uninitialized(x.shape());
  y.data() = x.data().array().max(slope * x.data().array()).matrix();
  return y;
}

/// dL/dx given dL/dy and the forward input x.
template <typename Scalar>
Tensor<Scalar> leaky_relu_backward(const Tensor<Scalar>& upstream, const Tensor<Scalar>& x, Scalar slope) {
  if (upstream.shape() != x.shape()) throw ShapeError("leaky_relu_backward: shape mismatch");
  auto dx = Tensor<Scalar>::uninitialized(x.shape());
  const Scalar* xv = x.data().data();
  const Scalar* gv = upstream.data().data();
  Scalar* out = dx.data().data();
  // branch-free select: m is exactly 0 or 1, so the result is g or slope*g bit-exactly
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar m = static_cast<Scalar>(xv[i] >= Scalar(0));
    out[i] = m * gv[i] + (Scalar(1) - m) * (slope * gv[i]);
  }
  return dx;
}

template <typename Scalar>
struct InstanceNormCache {
  Tensor<Scalar> normalized;
  Vector<Scalar> inv_std;  // one entry per (n, c) plane
};

/// Per (sample, channel) plane: (x - mean) / sqrt(var + eps), population variance.
template <typename Scalar>
Tensor<Scalar> instance_norm(const Tensor<Scalar>& x, Scalar eps, InstanceNormCache<Scalar>* cache = nullptr) {
  const Shape& s = x.shape();
  if (s.plane() < 1) throw ShapeError("instance_norm: empty plane");
  auto y = Tensor<Scalar>::uninitialized(s);
  Vector<Scalar> inv_std(s.n * s.c);
  const Index m = s.plane();
  for (Index n = 0; n < s.n; ++n) {
    for (Index c = 0; c < s.c; ++c) {
      const auto xin = x.data().segment((n * s.c + c) * m, m);
      const Scalar mean = xin.mean();
      const Scalar var = (xin.array() - mean).square().mean();
      const Scalar is = Scalar(1) / std::sqrt(var + eps);
      y.data().segment((n * s.c + c) * m, m) = ((xin.array() - mean) * is).matrix();
      inv_std[n * s.c + c] = is;
    }
  }
  if (cache) {
    cache->normalized = y;
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> instance_norm_backward(const Tensor<Scalar>& upstream, const InstanceNormCache<Scalar>& cache) {
  const Shape& s = cache.normalized.shape();
  if (upstream.shape() != s) throw ShapeError("instance_norm_backward: shape mismatch");
  auto dx = Tensor<Scalar>::uninitialized(s);
  const Index m = s.plane();
  for (Index p = 0; p < s.n * s.c; ++p) {
    const auto dy = upstream.data().segment(p * m, m).array();
    const auto xh = cache.normalized.data().segment(p * m, m).array();
    const Scalar mean_dy = dy.mean();
    const Scalar mean_dy_xh = (dy * xh).mean();
    dx.data().segment(p * m, m) = (cache.inv_std[p] * (dy - mean_dy - xh * mean_dy_xh)).matrix();
  }
  return dx;
}

/// y = gamma[c] * x + beta[c]; the learnable scale/shift that follows instance_norm.
template <typename Scalar>
Tensor<Scalar> channel_affine(const Tensor<Scalar>& x, const VectorRef<Scalar>& gamma,
                              const VectorRef<Scalar>& beta) {
  const Shape& s = x.shape();
  if (gamma.size() != s.c || beta.size() != s.c) throw ShapeError("channel_affine: parameter length != channels");
  auto y = Tensor<Scalar>::uninitialized(s);
  for (Index n = 0; n < s.n; ++n) {
    auto out = y.sample(n);
    out = (x.sample(n).array().colwise() * gamma.array()).matrix();
    out.colwise() += beta;
  }
  return y;
}

template <typename Scalar>
struct AffineGrads {
  Tensor<Scalar> input;
  Vector<Scalar> gamma;
  Vector<Scalar> beta;
};

template <typename Scalar>
AffineGrads<Scalar> channel_affine_backward(const Tensor<Scalar>& upstream, const Tensor<Scalar>& x,
                                            const VectorRef<Scalar>& gamma) {
  const Shape& s = x.shape();
  if (upstream.shape() != s) throw ShapeError("channel_affine_backward: shape mismatch");
  AffineGrads<Scalar> g{Tensor<Scalar>::uninitialized(s), Vector<Scalar>::Zero(s.c), Vector<Scalar>::Zero(s.c)};
  for (Index n = 0; n < s.n; ++n) {
    auto dy = upstream.sample(n);
    g.gamma += (dy.array() * x.sample(n).array()).rowwise().sum().matrix();
    g.beta += dy.rowwise().sum();
    g.input.sample(n) = (dy.array().colwise() * gamma.array()).matrix();
  }
  return g;
}

// ---------------------------------------------------------------------------
// resampling / channel plumbing

/// Nearest-neighbour 2x upsampling: every pixel becomes a 2x2 block.
template <typename Scalar>
Tensor<Scalar> upsample2x(const Tensor<Scalar>& x) {
  const Shape& s = x.shape();
  auto y = Tensor<Scalar>::uninitialized({s.n, s.c, 2 * s.h, 2 * s.w});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      auto in = x.plane(n, c);
      auto out = y.plane(n, c);
      for (Index i = 0; i < s.h; ++i)
        for (Index j = 0; j < s.w; ++j) out.template block<2, 2>(2 * i, 2 * j).setConstant(in(i, j));
    }
  return y;
}

/// Adjoint of upsample2x: each 2x2 block of the upstream gradient sums into one pixel.
template <typename Scalar>
Tensor<Scalar> upsample2x_backward(const Tensor<Scalar>& upstream) {
  const Shape& s = upstream.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("upsample2x_backward: odd spatial dims " + s.str());
  auto dx = Tensor<Scalar>::uninitialized({s.n, s.c, s.h / 2, s.w / 2});
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c) {
      auto in = upstream.plane(n, c);
      auto out = dx.plane(n, c);
      for (Index i = 0; i < s.h / 2; ++i)
        for (Index j = 0; j < s.w / 2; ++j) out(i, j) = in.template block<2, 2>(2 * i, 2 * j).sum();
    }
  return dx;
}

/// Concatenate along the channel axis.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  auto y = Tensor<Scalar>::uninitialized({sa.n, sa.c + sb.c, sa.h, sa.w});
  for (Index n = 0; n < sa.n; ++n) {
    y.sample(n).topRows(sa.c) = a.sample(n);
    y.sample(n).bottomRows(sb.c) = b.sample(n);
  }
  return y;
}

/// Splits a channel-concatenated gradient back into its first `channels` and the rest.
template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> split_channels(const Tensor<Scalar>& x, Index channels) {
  const Shape& s = x.shape();
  if (channels < 0 || channels > s.c) throw ShapeError("split_channels: bad split point");
  auto a = Tensor<Scalar>::uninitialized({s.n, channels, s.h, s.w});
  auto b = Tensor<Scalar>::uninitialized({s.n, s.c - channels, s.h, s.w});
  for (Index n = 0; n < s.n; ++n) {
    a.sample(n) = x.sample(n).topRows(channels);
    b.sample(n) = x.sample(n).bottomRows(s.c - channels);
  }
  return {std::move(a), std::move(b)};
}

/// Per-pixel softmax over channels, stabilized by subtracting the per-pixel max.
template <typename Scalar>
Tensor<Scalar> softmax_channel(const Tensor<Scalar>& logits) {
  const Shape& s = logits.shape();
  if (s.c < 2) throw ShapeError("softmax_channel: need at least 2 channels, got " + s.str());
  auto p = Tensor<Scalar>::uninitialized(s);
  for (Index n = 0; n < s.n; ++n) {
    const auto z = logits.sample(n);
    auto out = p.sample(n);
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> zmax = z.colwise().maxCoeff().array();
    out.array() = (z.array().rowwise() - zmax).exp();
    const Eigen::Array<Scalar, 1, Eigen::Dynamic> denom = out.colwise().sum().array();
    out.array().rowwise() /= denom;
  }
  return p;
}

}  // namespace effseg
