#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dwa/conv.hpp"
#include "dwa/ops.hpp"
#include "dwa/random.hpp"
#include "dwa/tensor.hpp"

namespace dwa {

// Differential Wavelet Amplifier.
//
//   H = conv(x; t1) - shift(conv(x; t2), dx = s)     left-to-right pair
//   V = conv(x; t3) - shift(conv(x; t4), dy = s)     top-to-bottom pair
//   g = concat(x, act(concat(H, V)))
//   out = conv(g; t_final)
//
// The input bypasses the nonlinearity. Shifting the conv output equals shifting
// the patch position on the interior; replicate padding keeps constant inputs
// constant so tied pairs cancel exactly at the borders too.
struct DwaConfig {
  std::size_t c_in = 12;
  std::size_t c_f = 16;
  std::size_t c_final = 64;
  std::size_t kernel = 3;
  int stride = 1;
  Activation nonlinearity = Activation::relu;
  PaddingMode padding = PaddingMode::replicate;

  void validate() const {
    if (c_in == 0 || c_f == 0 || c_final == 0) fail(ErrorCode::InvalidConfig, "DWA channel counts must be >= 1");
    if (kernel % 2 == 0) fail(ErrorCode::InvalidConfig, "DWA kernel size must be odd");
    if (stride < 0) fail(ErrorCode::InvalidConfig, "DWA stride difference must be >= 0");
  }

  friend bool operator==(const DwaConfig&, const DwaConfig&) = default;
};

template <typename T>
struct DwaParams {
  ConvParams<T> theta1, theta2, theta3, theta4, theta_final;

  std::vector<ConvParams<T>*> convs() { return {&theta1, &theta2, &theta3, &theta4, &theta_final}; }
  std::vector<const ConvParams<T>*> convs() const { return {&theta1, &theta2, &theta3, &theta4, &theta_final}; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* c : convs()) n += c->param_count();
    return n;
  }
};

template <typename T>
DwaParams<T> dwa_init(const DwaConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t k = cfg.kernel;
  DwaParams<T> p;
  p.theta1 = init_conv<T>(cfg.c_in, cfg.c_f, k, rng, cfg.padding);
  p.theta2 = init_conv<T>(cfg.c_in, cfg.c_f, k, rng, cfg.padding);
  p.theta3 = init_conv<T>(cfg.c_in, cfg.c_f, k, rng, cfg.padding);
  p.theta4 = init_conv<T>(cfg.c_in, cfg.c_f, k, rng, cfg.padding);
  p.theta_final = init_conv<T>(cfg.c_in + 2 * cfg.c_f, cfg.c_final, k, rng, cfg.padding);
  return p;
}

template <typename T>
DwaParams<T> dwa_init(const DwaConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return dwa_init<T>(cfg, rng);
}

template <typename T>
struct DwaMaps {
  Tensor<T> horizontal;
  Tensor<T> vertical;
  Tensor<T> output;
};

// Forward pass that also exposes the differential maps H and V.
template <typename T>
DwaMaps<T> dwa_forward_maps(const Tensor<T>& x, const DwaParams<T>& p, const DwaConfig& cfg) {
  if (x.shape().c != cfg.c_in) {
    fail(ErrorCode::ChannelMismatch,
         "DWA expects " + std::to_string(cfg.c_in) + " input channels, got " + std::to_string(x.shape().c));
  }
  const int s = cfg.stride;
  Tensor<T> horizontal = sub(conv2d(x, p.theta1), shift2d(conv2d(x, p.theta2), s, 0, cfg.padding));
  Tensor<T> vertical = sub(conv2d(x, p.theta3), shift2d(conv2d(x, p.theta4), 0, s, cfg.padding));
  Tensor<T> features = activate(concat_channels(horizontal, vertical), cfg.nonlinearity);
  Tensor<T> fused = conv2d(concat_channels(x, features), p.theta_final);
  return {std::move(horizontal), std::move(vertical), std::move(fused)};
}

template <typename T>
Tensor<T> dwa_forward(const Tensor<T>& x, const DwaParams<T>& p, const DwaConfig& cfg) {
  return dwa_forward_maps(x, p, cfg).output;
}

}  // namespace dwa
