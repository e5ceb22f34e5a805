#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance runner. Nothing here calls into the code under test except for
// the data types.

#include "effseg/image.hpp"
#include "effseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using effseg::Index;
using effseg::Shape;
using effseg::Tensor;

template <typename S>
Tensor<S> random_tensor(const Shape& s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<S> t(s);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(u(rng));
  return t;
}

/// Quadruple-loop zero-padded cross-correlation.
template <typename S>
Tensor<S> naive_conv2d(const Tensor<S>& x, const Tensor<S>& k, const std::vector<S>& bias, Index stride, Index pad) {
  const Shape& s = x.shape();
  const Shape& ks = k.shape();
  const Index ho = (s.h + 2 * pad - ks.h) / stride + 1;
  const Index wo = (s.w + 2 * pad - ks.w) / stride + 1;
  Tensor<S> y(s.n, ks.n, ho, wo);
  for (Index n = 0; n < s.n; ++n)
    for (Index o = 0; o < ks.n; ++o)
      for (Index r = 0; r < ho; ++r)
        for (Index c = 0; c < wo; ++c) {
          S acc = bias[o];
          for (Index ci = 0; ci < s.c; ++ci)
            for (Index i = 0; i < ks.h; ++i)
              for (Index j = 0; j < ks.w; ++j) {
                const Index rr = r * stride - pad + i;
                const Index cc = c * stride - pad + j;
                if (rr < 0 || cc < 0 || rr >= s.h || cc >= s.w) continue;
                acc += x(n, ci, rr, cc) * k(o, ci, i, j);
              }
          y(n, o, r, c) = acc;
        }
  return y;
}

/// Central finite differences of a scalar function of a flat parameter vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double step = 1e-3) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double fp = f(x);
    x[i] = keep - step;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||), with 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

inline std::vector<double> flat(const Tensor<double>& t) { return {t.data().data(), t.data().data() + t.size()}; }

inline Tensor<double> unflat(const Shape& s, const std::vector<double>& v) {
  Tensor<double> t(s);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = v[static_cast<std::size_t>(i)];
  return t;
}

/// Projection of a tensor onto fixed random weights; turns a tensor map into a scalar loss.
inline double project(const Tensor<double>& y, const Tensor<double>& w) { return y.data().dot(w.data()); }

/// DSC by explicit pixel counting.
inline double dsc(const effseg::Mask& a, const effseg::Mask& b) {
  long inter = 0, na = 0, nb = 0;
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) {
      const bool x = a(r, c) != 0, y = b(r, c) != 0;
      inter += x && y;
      na += x;
      nb += y;
    }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(inter) / double(na + nb);
}

/// Two-sided exact Wilcoxon p-value by enumerating all 2^n sign assignments of
/// the (average-ranked) absolute differences. Zero differences are dropped.
inline double wilcoxon_enumeration(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    ranks[i] = less + (equal + 1.0) / 2.0;
  }
  double w_plus = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += ranks[i];
    if (d[i] > 0) w_plus += ranks[i];
  }
  const double mean = total / 2.0;
  const double observed = std::abs(w_plus - mean);
  std::uint64_t extreme = 0;
  const std::uint64_t count = std::uint64_t{1} << n;
  for (std::uint64_t m = 0; m < count; ++m) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (m >> i & 1u) w += ranks[i];
    if (std::abs(w - mean) >= observed - 1e-9) ++extreme;
  }
  return std::min(1.0, double(extreme) / double(count));
}

}  // namespace oracle
