#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dwa/ops.hpp"
#include "dwa/random.hpp"
#include "dwa/tensor.hpp"

namespace dwa {

// Weight (c_out, c_in, k, k) and bias stored as (1, c_out, 1, 1).
template <typename T>
struct ConvParams {
  Tensor<T> weight;
  Tensor<T> bias;
  PaddingMode padding = PaddingMode::replicate;

  std::size_t c_out() const { return weight.shape().n; }
  std::size_t c_in() const { return weight.shape().c; }
  std::size_t kernel() const { return weight.shape().h; }

  static ConvParams make(Tensor<T> weight, Tensor<T> bias, PaddingMode padding = PaddingMode::replicate) {
    const Shape ws = weight.shape();
    if (ws.h != ws.w || ws.h % 2 == 0) {
      fail(ErrorCode::InvalidConfig, "conv kernel must be square with odd size, got " + to_string(ws));
    }
    if (!(bias.shape() == Shape{1, ws.n, 1, 1})) {
      fail(ErrorCode::ShapeMismatch, "bias shape " + to_string(bias.shape()) + " for weight " + to_string(ws));
    }
    return ConvParams{std::move(weight), std::move(bias), padding};
  }

  std::size_t param_count() const { return weight.size() + bias.size(); }
};

inline Shape conv_weight_shape(std::size_t c_in, std::size_t c_out, std::size_t k) { return {c_out, c_in, k, k}; }
inline Shape conv_bias_shape(std::size_t c_out) { return {1, c_out, 1, 1}; }

// Fan-in uniform init in +-sqrt(1 / (c_in k k)), weights drawn before bias.
template <typename T>
ConvParams<T> init_conv(std::size_t c_in, std::size_t c_out, std::size_t k, Rng& rng,
                        PaddingMode padding = PaddingMode::replicate) {
  if (c_in == 0 || c_out == 0 || k % 2 == 0) {
    fail(ErrorCode::InvalidConfig, "conv " + std::to_string(c_in) + "->" + std::to_string(c_out) + " k=" +
                                       std::to_string(k));
  }
  const double bound = std::sqrt(1.0 / static_cast<double>(c_in * k * k));
  const Shape ws = conv_weight_shape(c_in, c_out, k);
  std::vector<T> w(ws.size());
  for (auto& v : w) v = static_cast<T>(rng.uniform(-bound, bound));
  std::vector<T> b(c_out);
  for (auto& v : b) v = static_cast<T>(rng.uniform(-bound, bound));
  return ConvParams<T>::make(Tensor<T>::parameter(ws, std::move(w)),
                             Tensor<T>::parameter(conv_bias_shape(c_out), std::move(b)), padding);
}

template <typename T>
ConvParams<T> zero_conv(std::size_t c_in, std::size_t c_out, std::size_t k,
                        PaddingMode padding = PaddingMode::replicate) {
  return ConvParams<T>::make(Tensor<T>::parameter(conv_weight_shape(c_in, c_out, k),
                                                  std::vector<T>(c_out * c_in * k * k, T(0))),
                             Tensor<T>::parameter(conv_bias_shape(c_out), std::vector<T>(c_out, T(0))), padding);
}

namespace detail {

// Patch matrix (c k k, h w) for one image; out-of-range taps resolved by `mode`.
template <typename T>
void im2col(const T* image, std::size_t c, std::size_t h, std::size_t w, std::size_t k, PaddingMode mode,
            T* cols) {
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto hh = static_cast<std::ptrdiff_t>(h);
  const auto ww = static_cast<std::ptrdiff_t>(w);
  std::size_t row = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* plane = image + ch * h * w;
    for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(k); ++ky) {
      for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(k); ++kx, ++row) {
        T* dst = cols + row * h * w;
        for (std::ptrdiff_t i = 0; i < hh; ++i) {
          const auto si = resolve(i + ky - r, hh, mode);
          for (std::ptrdiff_t j = 0; j < ww; ++j) {
            const auto sj = resolve(j + kx - r, ww, mode);
            *dst++ = (si < 0 || sj < 0) ? T(0) : plane[si * ww + sj];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch-matrix gradients back onto the image.
template <typename T>
void col2im(const T* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k, PaddingMode mode,
            T* image) {
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto hh = static_cast<std::ptrdiff_t>(h);
  const auto ww = static_cast<std::ptrdiff_t>(w);
  std::size_t row = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    T* plane = image + ch * h * w;
    for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(k); ++ky) {
      for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(k); ++kx, ++row) {
        const T* src = cols + row * h * w;
        for (std::ptrdiff_t i = 0; i < hh; ++i) {
          const auto si = resolve(i + ky - r, hh, mode);
          for (std::ptrdiff_t j = 0; j < ww; ++j, ++src) {
            const auto sj = resolve(j + kx - r, ww, mode);
            if (si >= 0 && sj >= 0) plane[si * ww + sj] += *src;
          }
        }
      }
    }
  }
}

}  // namespace detail

// "Same" convolution (cross-correlation, stride 1).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p) {
  const Shape s = x.shape();
  if (s.c != p.c_in()) {
    fail(ErrorCode::ChannelMismatch,
         "conv2d expects " + std::to_string(p.c_in()) + " input channels, got " + std::to_string(s.c));
  }
  const std::size_t co = p.c_out();
  const std::size_t k = p.kernel();
  const std::size_t rows = s.c * k * k;
  const std::size_t plane = s.plane();
  const PaddingMode mode = p.padding;

  std::vector<T> cols(s.n * rows * plane);
  for (std::size_t b = 0; b < s.n; ++b) {
    detail::im2col(x.data().data() + b * s.c * plane, s.c, s.h, s.w, k, mode, cols.data() + b * rows * plane);
  }

  const Shape out_shape{s.n, co, s.h, s.w};
  std::vector<T> out(out_shape.size());
  const T* wdata = p.weight.data().data();
  const T* bdata = p.bias.data().data();
  for (std::size_t b = 0; b < s.n; ++b) {
    const T* col = cols.data() + b * rows * plane;
    for (std::size_t o = 0; o < co; ++o) {
      T* dst = out.data() + (b * co + o) * plane;
      const T bias = bdata[o];
      for (std::size_t q = 0; q < plane; ++q) dst[q] = bias;
      // Every output cell accumulates its taps in the same order, so equal
      // patches give bitwise-equal outputs.
      for (std::size_t r = 0; r < rows; ++r) {
        const T wv = wdata[o * rows + r];
        const T* src = col + r * plane;
        for (std::size_t q = 0; q < plane; ++q) dst[q] += wv * src[q];
      }
    }
  }

  return Tensor<T>::from_op(
      out_shape, std::move(out), {x, p.weight, p.bias},
      [cols = std::move(cols), s, co, k, rows, plane, mode](const auto& self, std::span<const T> g,
                                                           std::span<std::vector<T>* const> in) {
        const T* wdata = self.parents[1]->data.data();
        if (in[1] || in[2]) {
          for (std::size_t b = 0; b < s.n; ++b) {
            const T* col = cols.data() + b * rows * plane;
            for (std::size_t o = 0; o < co; ++o) {
              const T* gy = g.data() + (b * co + o) * plane;
              if (in[2]) {
                T acc = 0;
                for (std::size_t q = 0; q < plane; ++q) acc += gy[q];
                (*in[2])[o] += acc;
              }
              if (in[1]) {
                T* gw = in[1]->data() + o * rows;
                for (std::size_t r = 0; r < rows; ++r) {
                  const T* src = col + r * plane;
                  T acc = 0;
                  for (std::size_t q = 0; q < plane; ++q) acc += gy[q] * src[q];
                  gw[r] += acc;
                }
              }
            }
          }
        }
        if (in[0]) {
          std::vector<T> dcol(rows * plane);
          for (std::size_t b = 0; b < s.n; ++b) {
            std::fill(dcol.begin(), dcol.end(), T(0));
            for (std::size_t o = 0; o < co; ++o) {
              const T* gy = g.data() + (b * co + o) * plane;
              for (std::size_t r = 0; r < rows; ++r) {
                const T wv = wdata[o * rows + r];
                T* dst = dcol.data() + r * plane;
                for (std::size_t q = 0; q < plane; ++q) dst[q] += wv * gy[q];
              }
            }
            detail::col2im(dcol.data(), s.c, s.h, s.w, k, mode, in[0]->data() + b * s.c * plane);
          }
        }
      },
      "conv2d");
}

}  // namespace dwa
