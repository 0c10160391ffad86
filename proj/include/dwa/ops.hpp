#pragma once

#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "dwa/tensor.hpp"

namespace dwa {

enum class Activation { relu, sigmoid, tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "relu";
}

inline std::string to_string(PaddingMode m) { return m == PaddingMode::replicate ? "replicate" : "zero"; }

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + to_string(a) + " vs " + to_string(b));
}

// Resolves a possibly out-of-range coordinate. Returns -1 for a zero-padded read.
inline std::ptrdiff_t resolve(std::ptrdiff_t i, std::ptrdiff_t extent, PaddingMode mode) {
  if (i >= 0 && i < extent) return i;
  if (mode == PaddingMode::zero) return -1;
  return i < 0 ? 0 : extent - 1;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a, b},
      [](const auto&, std::span<const T> g, std::span<std::vector<T>* const> in) {
        for (auto* buf : in) {
          if (!buf) continue;
          for (std::size_t i = 0; i < g.size(); ++i) (*buf)[i] += g[i];
        }
      },
      "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a, b},
      [](const auto&, std::span<const T> g, std::span<std::vector<T>* const> in) {
        if (in[0])
          for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
        if (in[1])
          for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] -= g[i];
      },
      "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a, b},
      [](const auto& self, std::span<const T> g, std::span<std::vector<T>* const> in) {
        const auto& x = self.parents[0]->data;
        const auto& y = self.parents[1]->data;
        if (in[0])
          for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * y[i];
        if (in[1])
          for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * x[i];
      },
      "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T alpha) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * a[i];
  return Tensor<T>::from_op(
      a.shape(), std::move(out), {a},
      [alpha](const auto&, std::span<const T> g, std::span<std::vector<T>* const> in) {
        for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += alpha * g[i];
      },
      "scale");
}

// Sum of all elements as a (1,1,1,1) tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = 0;
  for (const T v : a.data()) acc += v;
  return Tensor<T>::from_op(
      Shape{1, 1, 1, 1}, {acc}, {a},
      [](const auto&, std::span<const T> g, std::span<std::vector<T>* const> in) {
        for (auto& v : *in[0]) v += g[0];
      },
      "sum");
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "concat_channels: no inputs");
  const Shape first = parts.front().shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      fail(ErrorCode::ShapeMismatch, "concat_channels: " + to_string(first) + " vs " + to_string(s));
    }
    channels += s.c;
  }
  const Shape out_shape{first.n, channels, first.h, first.w};
  const std::size_t plane = first.plane();
  std::vector<T> out(out_shape.size());
  for (std::size_t b = 0; b < first.n; ++b) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t block = p.shape().c * plane;
      auto src = p.data().subspan(b * block, block);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>((b * channels + offset) * plane));
      offset += p.shape().c;
    }
  }
  return Tensor<T>::from_op(
      out_shape, std::move(out), parts,
      [channels, plane](const auto& self, std::span<const T> g, std::span<std::vector<T>* const> in) {
        const std::size_t batch = self.shape.n;
        std::size_t offset = 0;
        for (std::size_t k = 0; k < in.size(); ++k) {
          const std::size_t c = self.parents[k]->shape.c;
          if (in[k]) {
            for (std::size_t b = 0; b < batch; ++b) {
              const T* src = g.data() + (b * channels + offset) * plane;
              T* dst = in[k]->data() + b * c * plane;
              for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
            }
          }
          offset += c;
        }
      },
      "concat_channels");
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  return concat_channels<T>(std::vector<Tensor<T>>{a, b});
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
  std::vector<T> out(x.size());
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
      break;
  }
  return Tensor<T>::from_op(
      x.shape(), std::move(out), {x},
      [kind](const auto& self, std::span<const T> g, std::span<std::vector<T>* const> in) {
        auto& dx = *in[0];
        const auto& y = self.data;
        const auto& xin = self.parents[0]->data;
        switch (kind) {
          case Activation::relu:
            // Subgradient 0 at the kink.
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += xin[i] > T(0) ? g[i] : T(0);
            break;
          case Activation::sigmoid:
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
            break;
          case Activation::tanh:
            for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (T(1) - y[i] * y[i]);
            break;
        }
      },
      "activate");
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return activate(x, Activation::relu);
}

// y[i,j] = x[i+dy, j+dx]; out-of-range reads resolved by `mode`.
template <typename T>
Tensor<T> shift2d(const Tensor<T>& x, int dx, int dy, PaddingMode mode = PaddingMode::replicate) {
  const Shape s = x.shape();
  const auto limit = static_cast<int>(std::min(s.h, s.w));
  if (std::abs(dx) >= limit || std::abs(dy) >= limit) {
    fail(ErrorCode::ShiftTooLarge, "shift (" + std::to_string(dx) + "," + std::to_string(dy) +
                                       ") on spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w));
  }
  const auto h = static_cast<std::ptrdiff_t>(s.h);
  const auto w = static_cast<std::ptrdiff_t>(s.w);
  // Source index per output cell within one plane; -1 reads zero.
  std::vector<std::ptrdiff_t> source(s.plane());
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    const auto si = detail::resolve(i + dy, h, mode);
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      const auto sj = detail::resolve(j + dx, w, mode);
      source[static_cast<std::size_t>(i * w + j)] = (si < 0 || sj < 0) ? -1 : si * w + sj;
    }
  }
  const std::size_t planes = s.n * s.c;
  const std::size_t plane = s.plane();
  std::vector<T> out(s.size());
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data().data() + p * plane;
    T* dst = out.data() + p * plane;
    for (std::size_t q = 0; q < plane; ++q) dst[q] = source[q] < 0 ? T(0) : src[source[q]];
  }
  return Tensor<T>::from_op(
      s, std::move(out), {x},
      [source = std::move(source), planes, plane](const auto&, std::span<const T> g,
                                                  std::span<std::vector<T>* const> in) {
        auto& gx = *in[0];
        for (std::size_t p = 0; p < planes; ++p) {
          const T* gsrc = g.data() + p * plane;
          T* gdst = gx.data() + p * plane;
          for (std::size_t q = 0; q < plane; ++q)
            if (source[q] >= 0) gdst[source[q]] += gsrc[q];
        }
      },
      "shift2d");
}

}  // namespace dwa
