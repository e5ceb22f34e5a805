#include "effseg/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace effseg {

namespace {

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  return k;
}

// Felzenszwalb-Huttenlocher lower envelope of parabolas.
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = 0;
  // skip leading infinite samples so the envelope starts from a finite parabola
  int first = 0;
  while (first < n && !std::isfinite(f[first])) ++first;
  if (first == n) {
    for (int q = 0; q < n; ++q) d[q] = inf;
    return;
  }
  v[0] = first;
  z[0] = -inf;
  z[1] = inf;
  for (int q = first + 1; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * double(q - v[k]) + f[v[k]];
  }
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());
  Image tmp(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * img(y, std::clamp(x + i, 0, w - 1));
      tmp(y, x) = acc;
    }
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(std::clamp(y + i, 0, h - 1), x);
      out(y, x) = acc;
    }
  return out;
}

int deepest_column(const Mask& m) {
  int best = -1;
  Index best_count = 0;
  for (Index c = 0; c < m.cols(); ++c) {
    const Index cnt = (m.col(c) != 0).count();
    if (cnt > best_count) {
      best_count = cnt;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<Pixel> deepest_column_endpoints(const Mask& m) {
  const int c = deepest_column(m);
  if (c < 0) return {};
  int top = -1;
  int bottom = -1;
  for (int r = 0; r < m.rows(); ++r) {
    if (m(r, c)) {
      if (top < 0) top = r;
      bottom = r;
    }
  }
  return {Pixel{top, c}, Pixel{bottom, c}};
}

namespace {

// Labels 4-connected components; returns per-label sizes (label k -> sizes[k-1]).
std::vector<Index> label_components(const Mask& m, Eigen::ArrayXXi& labels) {
  const int h = static_cast<int>(m.rows());
  const int w = static_cast<int>(m.cols());
  labels = Eigen::ArrayXXi::Zero(h, w);
  std::vector<Index> sizes;
  std::vector<Pixel> stack;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!m(r, c) || labels(r, c)) continue;
      const int label = static_cast<int>(sizes.size()) + 1;
      Index size = 0;
      stack.push_back({r, c});
      labels(r, c) = label;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        ++size;
        constexpr int dr[] = {-1, 1, 0, 0};
        constexpr int dc[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int rr = p.row + dr[k];
          const int cc = p.col + dc[k];
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          if (!m(rr, cc) || labels(rr, cc)) continue;
          labels(rr, cc) = label;
          stack.push_back({rr, cc});
        }
      }
      sizes.push_back(size);
    }
  return sizes;
}

}  // namespace

int count_components(const Mask& m) {
  Eigen::ArrayXXi labels;
  return static_cast<int>(label_components(m, labels).size());
}

Mask largest_component(const Mask& m) {
  Eigen::ArrayXXi labels;
  const auto sizes = label_components(m, labels);
  Mask out = Mask::Zero(m.rows(), m.cols());
  if (sizes.empty()) return out;
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin()) + 1;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out(r, c) = labels(r, c) == keep ? 1 : 0;
  return out;
}

Eigen::ArrayXXd squared_distance_transform(const Mask& m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int h = static_cast<int>(m.rows());
  const int w = static_cast<int>(m.cols());
  Eigen::ArrayXXd d(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) d(r, c) = m(r, c) ? 0.0 : inf;

  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(std::max(h, w));
  std::vector<double> out(std::max(h, w));
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) f[r] = d(r, c);
    edt_1d(f.data(), out.data(), h, v, z);
    for (int r = 0; r < h; ++r) d(r, c) = out[r];
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = d(r, c);
    edt_1d(f.data(), out.data(), w, v, z);
    for (int c = 0; c < w; ++c) d(r, c) = out[c];
  }
  return d;
}

Eigen::ArrayXXd signed_distance(const Mask& m) {
  const Mask inverse = (m == 0).cast<std::uint8_t>();
  // distance of inside pixels to the background, of outside pixels to the foreground
  const Eigen::ArrayXXd to_bg = squared_distance_transform(inverse).sqrt();
  const Eigen::ArrayXXd to_fg = squared_distance_transform(m).sqrt();
  Eigen::ArrayXXd sd(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) sd(r, c) = m(r, c) ? to_bg(r, c) - 0.5 : -(to_fg(r, c) - 0.5);
  return sd;
}

}  // namespace effseg
