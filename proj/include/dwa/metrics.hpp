#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "dwa/tensor.hpp"

namespace dwa {

enum class MetricChannel { rgb, y };

struct MetricOptions {
  MetricChannel channel = MetricChannel::rgb;
  // Pixels removed from each border before scoring.
  std::size_t crop_border = 0;
};

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// Rec.601 luma of a 3-channel image, one output channel.
template <typename T>
Tensor<T> to_luma(const Tensor<T>& img) {
  const Shape s = img.shape();
  if (s.c != 3) fail(ErrorCode::ChannelMismatch, "to_luma needs 3 channels, got " + to_string(s));
  const std::size_t plane = s.plane();
  std::vector<T> out(s.n * plane);
  for (std::size_t b = 0; b < s.n; ++b) {
    const T* r = img.data().data() + b * 3 * plane;
    const T* g = r + plane;
    const T* bl = g + plane;
    for (std::size_t q = 0; q < plane; ++q) {
      out[b * plane + q] = static_cast<T>(0.299 * r[q] + 0.587 * g[q] + 0.114 * bl[q]);
    }
  }
  return Tensor<T>::create(Shape{s.n, 1, s.h, s.w}, std::move(out));
}

namespace detail {

// Clamped, optionally luma-converted and border-cropped planes in double.
template <typename T>
std::vector<double> metric_planes(const Tensor<T>& img, const MetricOptions& opt, Shape& out_shape) {
  const Tensor<T> src = opt.channel == MetricChannel::y ? to_luma(img) : img;
  const Shape s = src.shape();
  const std::size_t crop = opt.crop_border;
  if (2 * crop >= s.h || 2 * crop >= s.w) fail(ErrorCode::TooSmall, "border crop leaves no pixels");
  out_shape = Shape{s.n, s.c, s.h - 2 * crop, s.w - 2 * crop};
  std::vector<double> out;
  out.reserve(out_shape.size());
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    for (std::size_t i = crop; i < s.h - crop; ++i) {
      for (std::size_t j = crop; j < s.w - crop; ++j) {
        out.push_back(std::clamp(static_cast<double>(src[p * s.plane() + i * s.w + j]), 0.0, 1.0));
      }
    }
  }
  return out;
}

template <typename T>
void require_equal_shapes(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    fail(ErrorCode::ShapeMismatch, std::string(what) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

}  // namespace detail

template <typename T>
double mse(const Tensor<T>& a, const Tensor<T>& b, const MetricOptions& opt = {}) {
  detail::require_equal_shapes(a, b, "mse");
  Shape s;
  const auto pa = detail::metric_planes(a, opt, s);
  const auto pb = detail::metric_planes(b, opt, s);
  double acc = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return acc / static_cast<double>(pa.size());
}

// 10 log10(peak^2 / MSE); +infinity when the images are identical.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0, const MetricOptions& opt = {}) {
  const double m = mse(a, b, opt);
  if (m == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(peak * peak / m);
}

inline std::vector<double> gaussian_window(std::size_t size = 11, double sigma = 1.5) {
  std::vector<double> w(size);
  const double center = static_cast<double>(size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

namespace detail {

// Separable "valid" filtering of one h x w plane.
inline std::vector<double> filter_valid(const double* plane, std::size_t h, std::size_t w,
                                        const std::vector<double>& win) {
  const std::size_t k = win.size();
  const std::size_t oh = h - k + 1;
  const std::size_t ow = w - k + 1;
  std::vector<double> tmp(h * ow);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += win[t] * plane[i * w + j + t];
      tmp[i * ow + j] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += win[t] * tmp[(i + t) * ow + j];
      out[i * ow + j] = acc;
    }
  return out;
}

}  // namespace detail

// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5), per channel,
// averaged over channels. Constants C1 = 0.01^2, C2 = 0.03^2 for peak 1.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const MetricOptions& opt = {}) {
  detail::require_equal_shapes(a, b, "ssim");
  constexpr std::size_t kWindow = 11;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  Shape s;
  const auto pa = detail::metric_planes(a, opt, s);
  const auto pb = detail::metric_planes(b, opt, s);
  if (s.h < kWindow || s.w < kWindow) fail(ErrorCode::TooSmall, "ssim needs at least 11x11, got " + to_string(s));
  const auto win = gaussian_window(kWindow, 1.5);
  const std::size_t plane = s.plane();
  std::vector<double> aa(plane), bb(plane), ab(plane);
  double total = 0.0;
  const std::size_t planes = s.n * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* x = pa.data() + p * plane;
    const double* y = pb.data() + p * plane;
    for (std::size_t q = 0; q < plane; ++q) {
      aa[q] = x[q] * x[q];
      bb[q] = y[q] * y[q];
      ab[q] = x[q] * y[q];
    }
    const auto mu_x = detail::filter_valid(x, s.h, s.w, win);
    const auto mu_y = detail::filter_valid(y, s.h, s.w, win);
    const auto e_xx = detail::filter_valid(aa.data(), s.h, s.w, win);
    const auto e_yy = detail::filter_valid(bb.data(), s.h, s.w, win);
    const auto e_xy = detail::filter_valid(ab.data(), s.h, s.w, win);
    double acc = 0.0;
    for (std::size_t q = 0; q < mu_x.size(); ++q) {
      const double mx = mu_x[q], my = mu_y[q];
      const double vx = e_xx[q] - mx * mx;
      const double vy = e_yy[q] - my * my;
      const double cxy = e_xy[q] - mx * my;
      acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mu_x.size());
  }
  return total / static_cast<double>(planes);
}

}  // namespace dwa
