#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dwa/random.hpp"
#include "dwa/tensor.hpp"

namespace dwa {

// Deterministic RGB test images: a smooth color gradient, band-limited noise
// (a few low-frequency plane waves), oriented soft-edged steps and a stripe
// patch. Values are clamped to [0, 1].
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> gen_synthetic(std::uint64_t seed, std::size_t count,
                                                             std::size_t size) {
  if (size < 32 || size % 2 != 0) fail(ErrorCode::BadSize, "synthetic image size must be even and >= 32, got " + std::to_string(size));
  constexpr double pi = std::numbers::pi;
  std::vector<std::pair<std::string, Tensor<T>>> out;
  out.reserve(count);
  const double n = static_cast<double>(size);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Rng rng(derive_seed(seed, idx));
    std::vector<double> img(3 * size * size);

    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
      base[c] = rng.uniform(0.25, 0.75);
      gx[c] = rng.uniform(-0.3, 0.3);
      gy[c] = rng.uniform(-0.3, 0.3);
    }

    struct Wave {
      double fx, fy, phase, amp[3];
    };
    std::vector<Wave> waves(6);
    for (auto& wv : waves) {
      const double angle = rng.uniform(0.0, pi);
      const double period = rng.uniform(6.0, n);
      wv.fx = std::cos(angle) * 2.0 * pi / period;
      wv.fy = std::sin(angle) * 2.0 * pi / period;
      wv.phase = rng.uniform(0.0, 2.0 * pi);
      for (double& a : wv.amp) a = rng.uniform(-0.06, 0.06);
    }

    struct Edge {
      double nx, ny, px, py, softness, step[3];
    };
    std::vector<Edge> edges(3);
    for (auto& e : edges) {
      const double angle = rng.uniform(0.0, 2.0 * pi);
      e.nx = std::cos(angle);
      e.ny = std::sin(angle);
      e.px = rng.uniform(0.25 * n, 0.75 * n);
      e.py = rng.uniform(0.25 * n, 0.75 * n);
      e.softness = rng.uniform(0.3, 1.2);
      for (double& s : e.step) s = rng.uniform(-0.35, 0.35);
    }

    // Stripes inside a random box.
    const double box_y = rng.uniform(0.0, 0.6 * n), box_x = rng.uniform(0.0, 0.6 * n);
    const double box = rng.uniform(0.2 * n, 0.4 * n);
    const double stripe_angle = rng.uniform(0.0, pi);
    const double stripe_period = rng.uniform(3.0, 8.0);
    const double stripe_amp = rng.uniform(0.05, 0.2);

    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) {
        const double y = static_cast<double>(i) + 0.5, x = static_cast<double>(j) + 0.5;
        double stripe = 0.0;
        if (y >= box_y && y < box_y + box && x >= box_x && x < box_x + box) {
          const double t = (std::cos(stripe_angle) * x + std::sin(stripe_angle) * y) * 2.0 * pi / stripe_period;
          stripe = stripe_amp * std::sin(t);
        }
        for (int c = 0; c < 3; ++c) {
          double v = base[c] + gx[c] * (x / n - 0.5) + gy[c] * (y / n - 0.5) + stripe;
          for (const auto& wv : waves) v += wv.amp[c] * std::sin(wv.fx * x + wv.fy * y + wv.phase);
          for (const auto& e : edges) {
            const double d = e.nx * (x - e.px) + e.ny * (y - e.py);
            v += e.step[c] * 0.5 * std::tanh(d / e.softness);
          }
          img[(static_cast<std::size_t>(c) * size + i) * size + j] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    std::vector<T> values(img.begin(), img.end());
    out.emplace_back("synthetic_" + std::to_string(seed) + "_" + std::to_string(idx),
                     Tensor<T>::create(Shape{1, 3, size, size}, std::move(values)));
  }
  return out;
}

}  // namespace dwa
