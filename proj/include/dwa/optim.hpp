#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dwa/tensor.hpp"

namespace dwa {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;
};

// One Adam update with coupled L2 (g += l2_reg * theta) and bias correction.
// Returns fresh parameter leaves; `state` is advanced in place.
template <typename T>
std::vector<Tensor<T>> adam_step(const std::vector<Tensor<T>>& params, const std::vector<std::vector<T>>& grads,
                                 AdamState<T>& state, double lr, double l2_reg, const AdamOptions& opt = {}) {
  if (grads.size() != params.size()) {
    fail(ErrorCode::ShapeMismatch, "adam_step: " + std::to_string(params.size()) + " params, " +
                                       std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size()) fail(ErrorCode::ShapeMismatch, "adam_step: optimizer state mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(opt.beta1);
  const T b2 = static_cast<T>(opt.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(opt.beta1, t));
  const T corr2 = static_cast<T>(1.0 - std::pow(opt.beta2, t));
  const T eps = static_cast<T>(opt.epsilon);
  const T rate = static_cast<T>(lr);
  const T decay = static_cast<T>(l2_reg);

  std::vector<Tensor<T>> out;
  out.reserve(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto theta = params[p].data();
    const auto& g = grads[p];
    auto& m = state.m[p];
    auto& v = state.v[p];
    if (g.size() != theta.size() || m.size() != theta.size()) {
      fail(ErrorCode::ShapeMismatch, "adam_step: gradient " + std::to_string(p) + " has wrong length");
    }
    std::vector<T> next(theta.begin(), theta.end());
    for (std::size_t i = 0; i < next.size(); ++i) {
      const T gi = g[i] + decay * theta[i];
      m[i] = b1 * m[i] + (T(1) - b1) * gi;
      v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
      const T m_hat = m[i] / corr1;
      const T v_hat = v[i] / corr2;
      next[i] = theta[i] - rate * m_hat / (std::sqrt(v_hat) + eps);
    }
    out.push_back(Tensor<T>::parameter(params[p].shape(), std::move(next)));
  }
  return out;
}

}  // namespace dwa
