#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dwa/ops.hpp"
#include "dwa/tensor.hpp"

namespace dwa {

enum class LossKind { l1, l2 };

inline std::string to_string(LossKind k) { return k == LossKind::l1 ? "l1" : "l2"; }

inline std::optional<LossKind> parse_loss_kind(std::string_view s) {
  if (s == "l1") return LossKind::l1;
  if (s == "l2") return LossKind::l2;
  return std::nullopt;
}

// mean |pred - target|. The subgradient at an exact tie is 0.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape(pred.shape(), target.shape(), "l1_loss");
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(static_cast<double>(pred[i]) - static_cast<double>(target[i]));
  const T inv = T(1) / static_cast<T>(n);
  return Tensor<T>::from_op(
      Shape{1, 1, 1, 1}, {static_cast<T>(acc / static_cast<double>(n))}, {pred, target},
      [inv](const auto& self, std::span<const T> g, std::span<std::vector<T>* const> in) {
        const auto& p = self.parents[0]->data;
        const auto& t = self.parents[1]->data;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const T d = p[i] - t[i];
          const T sg = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
          if (in[0]) (*in[0])[i] += g[0] * inv * sg;
          if (in[1]) (*in[1])[i] -= g[0] * inv * sg;
        }
      },
      "l1_loss");
}

// mean (pred - target)^2
template <typename T>
Tensor<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape(pred.shape(), target.shape(), "l2_loss");
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  const T inv = T(1) / static_cast<T>(n);
  return Tensor<T>::from_op(
      Shape{1, 1, 1, 1}, {static_cast<T>(acc / static_cast<double>(n))}, {pred, target},
      [inv](const auto& self, std::span<const T> g, std::span<std::vector<T>* const> in) {
        const auto& p = self.parents[0]->data;
        const auto& t = self.parents[1]->data;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const T d = T(2) * (p[i] - t[i]) * inv * g[0];
          if (in[0]) (*in[0])[i] += d;
          if (in[1]) (*in[1])[i] -= d;
        }
      },
      "l2_loss");
}

template <typename T>
Tensor<T> loss(LossKind kind, const Tensor<T>& pred, const Tensor<T>& target) {
  return kind == LossKind::l1 ? l1_loss(pred, target) : l2_loss(pred, target);
}

}  // namespace dwa
