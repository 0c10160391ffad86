#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dwa/tensor.hpp"

namespace dwa {

// Keys cubic convolution kernel with a = -0.5 (Catmull-Rom).
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

struct ResampleTap {
  std::size_t index;
  double weight;
};

// Taps for one axis. Half-pixel centers: src = (dst + 0.5) / scale - 0.5.
// When shrinking, the kernel is stretched by 1/scale (antialiasing), as in
// the usual bicubic degradation used to make LR training images. Weights are
// normalized to sum to one; out-of-range taps clamp to the edge sample.
inline std::vector<std::vector<ResampleTap>> bicubic_taps(std::size_t in_size, std::size_t out_size,
                                                          double scale) {
  const double stretch = scale < 1.0 ? scale : 1.0;
  const double support = 2.0 / stretch;
  std::vector<std::vector<ResampleTap>> taps(out_size);
  const auto last = static_cast<std::ptrdiff_t>(in_size) - 1;
  for (std::size_t o = 0; o < out_size; ++o) {
    const double center = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const auto lo = static_cast<std::ptrdiff_t>(std::floor(center - support)) + 1;
    const auto hi = static_cast<std::ptrdiff_t>(std::ceil(center + support)) - 1;
    double total = 0.0;
    std::vector<ResampleTap> row;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      const double w = stretch * cubic_kernel(stretch * (center - static_cast<double>(j)));
      if (w == 0.0) continue;
      const auto idx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, last));
      row.push_back({idx, w});
      total += w;
    }
    for (auto& t : row) t.weight /= total;
    taps[o] = std::move(row);
  }
  return taps;
}

inline std::size_t resized_extent(std::size_t extent, double scale) {
  return static_cast<std::size_t>(std::llround(scale * static_cast<double>(extent)));
}

// Separable bicubic resize of every (batch, channel) plane. Not differentiable:
// the result is a constant tensor.
template <typename T>
Tensor<T> bicubic_resize(const Tensor<T>& img, double scale) {
  const Shape s = img.shape();
  if (!(scale > 0.0)) fail(ErrorCode::DegenerateOutput, "bicubic scale must be positive");
  const std::size_t oh = resized_extent(s.h, scale);
  const std::size_t ow = resized_extent(s.w, scale);
  if (oh == 0 || ow == 0 || s.h == 0 || s.w == 0) {
    fail(ErrorCode::DegenerateOutput, "bicubic resize of " + to_string(s) + " by " + std::to_string(scale));
  }
  const auto row_taps = bicubic_taps(s.h, oh, scale);
  const auto col_taps = bicubic_taps(s.w, ow, scale);

  const Shape out_shape{s.n, s.c, oh, ow};
  std::vector<T> out(out_shape.size());
  std::vector<double> tmp(s.h * ow);
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const T* src = img.data().data() + p * s.plane();
    for (std::size_t i = 0; i < s.h; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (const auto& t : col_taps[j]) acc += t.weight * static_cast<double>(src[i * s.w + t.index]);
        tmp[i * ow + j] = acc;
      }
    }
    T* dst = out.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (const auto& t : row_taps[i]) acc += t.weight * tmp[t.index * ow + j];
        dst[i * ow + j] = static_cast<T>(acc);
      }
    }
  }
  return Tensor<T>::create(out_shape, std::move(out));
}

}  // namespace dwa
