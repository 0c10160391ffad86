#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dwa/tensor.hpp"

namespace dwa {

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // 0 checks every element; otherwise an evenly strided subset of this size.
  std::size_t max_checks_per_param = 0;
};

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  // Elements whose central difference straddled a kink (see compare_gradients).
  std::size_t kinks = 0;
};

struct GradReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t kinks = 0;
  bool pass = false;
};

using ScalarFn = std::function<Tensor<double>(std::span<const Tensor<double>>)>;

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Compares the given analytic gradients against central differences of f.
//
// ReLU makes f piecewise smooth. When a kink falls inside [x - h, x + h] the
// central difference averages two slopes and is meaningless, while one of the
// one-sided differences stays on a single piece. An element whose central
// difference fails but whose two one-sided differences disagree by more than the
// tolerance, and whose analytic value matches one of them, is counted as a kink
// and scored against that one-sided difference.
//
// Each evaluation of f carries rounding error of a few ulps of |f|, so the
// central difference cannot resolve gradients below roughly eps * |f| / h.
// That floor (with a factor of 32 headroom) is subtracted from the absolute
// error before dividing.
inline GradReport compare_gradients(const ScalarFn& f, std::vector<Tensor<double>> params,
                                    const std::vector<std::vector<double>>& analytic,
                                    const GradCheckOptions& options = {},
                                    const std::vector<std::string>& names = {}) {
  GradReport report;
  report.tolerance = options.tolerance;
  const double centre = f(params).item();
  const double h = options.step;
  const double floor = 32.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(centre)) / h;
  auto score = [floor](double a, double b) {
    return std::max(0.0, std::abs(a - b) - floor) / std::max({std::abs(a), std::abs(b), 1e-8});
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    ParamGradError err;
    err.name = p < names.size() ? names[p] : "param" + std::to_string(p);
    const Tensor<double> original = params[p];
    const std::size_t n = original.size();
    const std::size_t checks =
        options.max_checks_per_param == 0 ? n : std::min(n, options.max_checks_per_param);
    std::vector<double> values(original.data().begin(), original.data().end());
    for (std::size_t c = 0; c < checks; ++c) {
      const std::size_t idx = checks == n ? c : c * n / checks;
      const double saved = values[idx];
      values[idx] = saved + options.step;
      params[p] = Tensor<double>::create(original.shape(), values);
      const double up = f(params).item();
      values[idx] = saved - options.step;
      params[p] = Tensor<double>::create(original.shape(), values);
      const double down = f(params).item();
      values[idx] = saved;
      const double a = analytic[p][idx];
      double numeric = (up - down) / (2.0 * h);
      double rel = score(a, numeric);
      if (rel >= options.tolerance) {
        const double forward = (up - centre) / h;
        const double backward = (centre - down) / h;
        if (relative_error(forward, backward) >= options.tolerance) {
          const double one_sided =
              relative_error(a, forward) < relative_error(a, backward) ? forward : backward;
          if (score(a, one_sided) < options.tolerance) {
            numeric = one_sided;
            rel = score(a, one_sided);
            ++err.kinks;
          }
        }
      }
      if (c == 0 || rel > err.max_rel_error) {
        err.max_rel_error = rel;
        err.worst_index = idx;
        err.analytic = analytic[p][idx];
        err.numeric = numeric;
      }
    }
    params[p] = original;
    report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
    report.kinks += err.kinks;
    report.params.push_back(err);
  }
  report.pass = report.max_rel_error < options.tolerance;
  return report;
}

// Analytic gradients by backward(), numeric by central differences; 64-bit only.
inline GradReport grad_check(const ScalarFn& f, const std::vector<Tensor<double>>& params,
                             const GradCheckOptions& options = {}, const std::vector<std::string>& names = {}) {
  std::vector<Tensor<double>> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(p.as_parameter());
  const Tensor<double> loss = f(leaves);
  const Gradients<double> grads = backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) analytic.push_back(grads.of(leaf));
  return compare_gradients(f, params, analytic, options, names);
}

}  // namespace dwa
