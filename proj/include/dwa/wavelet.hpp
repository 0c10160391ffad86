#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dwa/tensor.hpp"

namespace dwa {

// Orthonormal 2-D Haar transform. For every 2x2 block [[a,b],[c,d]]:
//   A = (a+b+c+d)/2   H = (a-b+c-d)/2   V = (a+b-c-d)/2   D = (a-b-c+d)/2
// Output channels are grouped [A | H | V | D], c channels per group.
//
// The transform matrix is symmetric and orthogonal, so it is its own inverse
// and its own adjoint; the gradient of dwt2 is idwt2 and vice versa.

namespace detail {

template <typename T>
void haar_analysis(std::span<const T> in, const Shape& s, std::span<T> out) {
  const std::size_t oh = s.h / 2;
  const std::size_t ow = s.w / 2;
  const std::size_t oplane = oh * ow;
  for (std::size_t b = 0; b < s.n; ++b) {
    for (std::size_t ch = 0; ch < s.c; ++ch) {
      const T* src = in.data() + (b * s.c + ch) * s.plane();
      T* a_out = out.data() + ((b * 4 + 0) * s.c + ch) * oplane;
      T* h_out = out.data() + ((b * 4 + 1) * s.c + ch) * oplane;
      T* v_out = out.data() + ((b * 4 + 2) * s.c + ch) * oplane;
      T* d_out = out.data() + ((b * 4 + 3) * s.c + ch) * oplane;
      for (std::size_t i = 0; i < oh; ++i) {
        const T* top = src + 2 * i * s.w;
        const T* bot = top + s.w;
        for (std::size_t j = 0; j < ow; ++j) {
          const T a = top[2 * j], bb = top[2 * j + 1], c = bot[2 * j], d = bot[2 * j + 1];
          const std::size_t q = i * ow + j;
          a_out[q] = ((a + bb) + (c + d)) * T(0.5);
          h_out[q] = ((a - bb) + (c - d)) * T(0.5);
          v_out[q] = ((a + bb) - (c + d)) * T(0.5);
          d_out[q] = ((a - bb) - (c - d)) * T(0.5);
        }
      }
    }
  }
}

// `s` is the shape of the reconstructed image.
template <typename T>
void haar_synthesis(std::span<const T> in, const Shape& s, std::span<T> out) {
  const std::size_t oh = s.h / 2;
  const std::size_t ow = s.w / 2;
  const std::size_t oplane = oh * ow;
  for (std::size_t b = 0; b < s.n; ++b) {
    for (std::size_t ch = 0; ch < s.c; ++ch) {
      T* dst = out.data() + (b * s.c + ch) * s.plane();
      const T* a_in = in.data() + ((b * 4 + 0) * s.c + ch) * oplane;
      const T* h_in = in.data() + ((b * 4 + 1) * s.c + ch) * oplane;
      const T* v_in = in.data() + ((b * 4 + 2) * s.c + ch) * oplane;
      const T* d_in = in.data() + ((b * 4 + 3) * s.c + ch) * oplane;
      for (std::size_t i = 0; i < oh; ++i) {
        T* top = dst + 2 * i * s.w;
        T* bot = top + s.w;
        for (std::size_t j = 0; j < ow; ++j) {
          const std::size_t q = i * ow + j;
          const T a = a_in[q], h = h_in[q], v = v_in[q], d = d_in[q];
          top[2 * j] = ((a + h) + (v + d)) * T(0.5);
          top[2 * j + 1] = ((a - h) + (v - d)) * T(0.5);
          bot[2 * j] = ((a + h) - (v + d)) * T(0.5);
          bot[2 * j + 1] = ((a - h) - (v - d)) * T(0.5);
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> dwt2(const Tensor<T>& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    fail(ErrorCode::OddSpatialSize, "dwt2 needs even spatial size, got " + to_string(s));
  }
  const Shape out_shape{s.n, 4 * s.c, s.h / 2, s.w / 2};
  std::vector<T> out(out_shape.size());
  detail::haar_analysis<T>(x.data(), s, out);
  return Tensor<T>::from_op(
      out_shape, std::move(out), {x},
      [s](const auto&, std::span<const T> g, std::span<std::vector<T>* const> in) {
        std::vector<T> gx(s.size());
        detail::haar_synthesis<T>(g, s, gx);
        for (std::size_t i = 0; i < gx.size(); ++i) (*in[0])[i] += gx[i];
      },
      "dwt2");
}

template <typename T>
Tensor<T> idwt2(const Tensor<T>& subbands) {
  const Shape s = subbands.shape();
  if (s.c % 4 != 0) {
    fail(ErrorCode::ChannelNotDivisibleBy4, "idwt2 needs a multiple of 4 channels, got " + to_string(s));
  }
  const Shape out_shape{s.n, s.c / 4, s.h * 2, s.w * 2};
  std::vector<T> out(out_shape.size());
  detail::haar_synthesis<T>(subbands.data(), out_shape, out);
  return Tensor<T>::from_op(
      out_shape, std::move(out), {subbands},
      [out_shape](const auto& self, std::span<const T> g, std::span<std::vector<T>* const> in) {
        std::vector<T> gs(self.parents[0]->data.size());
        detail::haar_analysis<T>(g, out_shape, gs);
        for (std::size_t i = 0; i < gs.size(); ++i) (*in[0])[i] += gs[i];
      },
      "idwt2");
}

// Level l+1 transforms the whole stack of level l (all subbands, not only A).
template <typename T>
std::vector<Tensor<T>> dwt_multi(const Tensor<T>& x, std::size_t levels) {
  const Shape s = x.shape();
  const std::size_t factor = std::size_t{1} << levels;
  if (levels == 0 || s.h % factor != 0 || s.w % factor != 0) {
    fail(ErrorCode::NotDivisible, "dwt_multi: " + to_string(s) + " with " + std::to_string(levels) + " levels");
  }
  std::vector<Tensor<T>> stacks;
  stacks.reserve(levels);
  Tensor<T> current = x;
  for (std::size_t l = 0; l < levels; ++l) {
    current = dwt2(current);
    stacks.push_back(current);
  }
  return stacks;
}

// Inverse of dwt_multi given its deepest stack.
template <typename T>
Tensor<T> idwt_multi(const Tensor<T>& deepest, std::size_t levels) {
  Tensor<T> current = deepest;
  for (std::size_t l = 0; l < levels; ++l) current = idwt2(current);
  return current;
}

// Views of the four subband groups of a stack, each (n, c, h, w).
template <typename T>
struct Subbands {
  Tensor<T> approx, horizontal, vertical, diagonal;
};

template <typename T>
Subbands<T> split_subbands(const Tensor<T>& stack) {
  const Shape s = stack.shape();
  if (s.c % 4 != 0) fail(ErrorCode::ChannelNotDivisibleBy4, to_string(s));
  const std::size_t c = s.c / 4;
  const std::size_t block = c * s.plane();
  Tensor<T> parts[4];
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<T> out(s.n * block);
    for (std::size_t b = 0; b < s.n; ++b) {
      auto src = stack.data().subspan((b * 4 + k) * block, block);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(b * block));
    }
    parts[k] = Tensor<T>::create(Shape{s.n, c, s.h, s.w}, std::move(out));
  }
  return {parts[0], parts[1], parts[2], parts[3]};
}

}  // namespace dwa
