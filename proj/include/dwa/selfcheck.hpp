#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dwa/conv.hpp"
#include "dwa/dwa_layer.hpp"
#include "dwa/gradcheck.hpp"
#include "dwa/models.hpp"
#include "dwa/ops.hpp"
#include "dwa/random.hpp"
#include "dwa/wavelet.hpp"

namespace dwa::selfcheck {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

template <typename T>
Tensor<T> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(s.size());
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>::create(s, std::move(v));
}

// sum(y * probe) for a fixed random probe: a smooth scalar readout of y.
inline Tensor<double> probe_readout(const Tensor<double>& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, random_tensor<double>(y.shape(), rng)));
}

inline std::string describe(const GradReport& r) {
  std::ostringstream os;
  os.precision(3);
  os << "max rel err " << r.max_rel_error << " (tol " << r.tolerance << ")";
  if (r.kinks > 0) os << ", " << r.kinks << " kink crossings scored one-sided";
  for (const auto& p : r.params) {
    if (p.max_rel_error >= r.tolerance) {
      os << "; " << p.name << "[" << p.worst_index << "] analytic " << p.analytic << " numeric " << p.numeric;
    }
  }
  return os.str();
}

inline CheckResult run_grad_check(const std::string& name, const ScalarFn& f, const std::vector<Tensor<double>>& params,
                                  double tol, const std::vector<std::string>& names = {}) {
  GradCheckOptions opt;
  opt.tolerance = tol;
  const GradReport r = grad_check(f, params, opt, names);
  return {name, r.pass, describe(r)};
}

// Central-difference checks of every differentiable building block (64-bit).
inline std::vector<CheckResult> gradient_suite(double layer_tol = 1e-4, double model_tol = 1e-3) {
  std::vector<CheckResult> out;
  Rng rng(20240601);

  const Tensor<double> x = random_tensor<double>({1, 3, 8, 8}, rng);
  for (const PaddingMode mode : {PaddingMode::replicate, PaddingMode::zero}) {
    Rng prng(7);
    const ConvParams<double> cp = init_conv<double>(3, 4, 3, prng, mode);
    out.push_back(run_grad_check(
        "conv2d (" + to_string(mode) + ")",
        [mode](std::span<const Tensor<double>> p) {
          return probe_readout(conv2d(p[0], ConvParams<double>::make(p[1], p[2], mode)), 11);
        },
        {x, cp.weight, cp.bias}, layer_tol, {"x", "weight", "bias"}));
    out.push_back(run_grad_check(
        "shift2d (" + to_string(mode) + ")",
        [mode](std::span<const Tensor<double>> p) { return probe_readout(shift2d(p[0], 2, -1, mode), 12); }, {x},
        layer_tol, {"x"}));
  }
  for (const Activation a : {Activation::relu, Activation::sigmoid, Activation::tanh}) {
    out.push_back(run_grad_check(
        "activation " + to_string(a),
        [a](std::span<const Tensor<double>> p) { return probe_readout(activate(p[0], a), 13); }, {x}, layer_tol,
        {"x"}));
  }
  const Tensor<double> even = random_tensor<double>({2, 3, 8, 6}, rng);
  out.push_back(run_grad_check(
      "dwt2", [](std::span<const Tensor<double>> p) { return probe_readout(dwt2(p[0]), 14); }, {even}, layer_tol,
      {"x"}));
  const Tensor<double> bands = random_tensor<double>({1, 8, 4, 5}, rng);
  out.push_back(run_grad_check(
      "idwt2", [](std::span<const Tensor<double>> p) { return probe_readout(idwt2(p[0]), 15); }, {bands}, layer_tol,
      {"subbands"}));

  for (int s = 0; s <= 3; ++s) {
    for (const Activation a : {Activation::relu, Activation::sigmoid, Activation::tanh}) {
      DwaConfig cfg;
      cfg.c_in = 3;
      cfg.c_f = 4;
      cfg.c_final = 5;
      cfg.stride = s;
      cfg.nonlinearity = a;
      const DwaParams<double> p = dwa_init<double>(cfg, 100 + static_cast<std::uint64_t>(s));
      std::vector<Tensor<double>> params{x};
      std::vector<std::string> names{"x"};
      int idx = 1;
      for (const auto* c : p.convs()) {
        params.push_back(c->weight);
        params.push_back(c->bias);
        names.push_back("conv" + std::to_string(idx) + ".weight");
        names.push_back("conv" + std::to_string(idx) + ".bias");
        ++idx;
      }
      out.push_back(run_grad_check(
          "dwa layer s=" + std::to_string(s) + " " + to_string(a),
          [cfg](std::span<const Tensor<double>> q) {
            DwaParams<double> dp{ConvParams<double>::make(q[1], q[2]), ConvParams<double>::make(q[3], q[4]),
                                 ConvParams<double>::make(q[5], q[6]), ConvParams<double>::make(q[7], q[8]),
                                 ConvParams<double>::make(q[9], q[10])};
            return probe_readout(dwa_forward(q[0], dp, cfg), 16);
          },
          params, layer_tol, names));
    }
  }

  ModelConfig mc;
  mc.kind = ModelKind::dwsr_dwa;
  mc.depth = 4;
  mc.width = 8;
  mc.scale = 2;
  out.push_back([&] {
    const Model<double> model = Model<double>::build(mc, 5);
    Rng irng(21);
    const Tensor<double> lr = random_tensor<double>({1, 3, 16, 16}, irng, 0.0, 1.0);
    const ScalarFn f = [mc, lr](std::span<const Tensor<double>> q) {
      Model<double> m = Model<double>::zeros(mc);
      m.set_parameters(std::vector<Tensor<double>>(q.begin(), q.end()));
      return probe_readout(m.forward(lr), 17);
    };
    return run_grad_check("end-to-end dwsr_dwa depth 4, 16x16", f, model.parameters(), model_tol,
                          model.parameter_names());
  }());
  return out;
}

// idwt2(dwt2(x)) == x on `trials` random even-sized inputs up to 64x64.
template <typename T>
CheckResult wavelet_round_trip(std::size_t trials, double tol, std::uint64_t seed = 1) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t h = 2 * (1 + rng.below(32));
    const std::size_t w = 2 * (1 + rng.below(32));
    const Tensor<T> x = random_tensor<T>({1, 1 + rng.below(3), h, w}, rng);
    const Tensor<T> y = idwt2(dwt2(x));
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, std::abs(static_cast<double>(y[i]) - static_cast<double>(x[i])));
  }
  std::ostringstream os;
  os << "max abs error " << worst << " over " << trials << " inputs (tol " << tol << ")";
  return {"wavelet round trip (" + std::string(sizeof(T) == 4 ? "32" : "64") + "-bit)", worst < tol, os.str()};
}

// Sum of squares of the subbands equals that of the source (64-bit).
inline CheckResult wavelet_energy(std::size_t trials, double tol, std::uint64_t seed = 2) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t h = 2 * (1 + rng.below(32));
    const std::size_t w = 2 * (1 + rng.below(32));
    const Tensor<double> x = random_tensor<double>({1, 3, h, w}, rng);
    const Tensor<double> s = dwt2(x);
    double ex = 0.0, es = 0.0;
    for (const double v : x.data()) ex += v * v;
    for (const double v : s.data()) es += v * v;
    worst = std::max(worst, std::abs(ex - es));
  }
  std::ostringstream os;
  os << "max energy difference " << worst << " over " << trials << " inputs (tol " << tol << ")";
  return {"wavelet energy preservation", worst < tol, os.str()};
}

// Constant input, tied pairs, replicate padding: H and V must be exactly zero.
template <typename T>
CheckResult common_mode_rejection() {
  std::size_t cases = 0;
  std::size_t nonzero = 0;
  const Shape shapes[] = {{1, 3, 8, 8}, {2, 12, 16, 12}, {1, 4, 7, 9}, {1, 1, 5, 5}};
  for (const Shape& shape : shapes) {
    for (int s = 0; s <= 3; ++s) {
      if (static_cast<std::size_t>(s) >= std::min(shape.h, shape.w)) continue;
      DwaConfig cfg;
      cfg.c_in = shape.c;
      cfg.c_f = 6;
      cfg.c_final = 4;
      cfg.stride = s;
      DwaParams<T> p = dwa_init<T>(cfg, 300 + static_cast<std::uint64_t>(s));
      p.theta2 = p.theta1;
      p.theta4 = p.theta3;
      Rng rng(400 + cases);
      const T level = static_cast<T>(rng.uniform(-2.0, 2.0));
      const DwaMaps<T> maps = dwa_forward_maps(Tensor<T>::filled(shape, level), p, cfg);
      for (const T v : maps.horizontal.data()) nonzero += v != T(0);
      for (const T v : maps.vertical.data()) nonzero += v != T(0);
      ++cases;
    }
  }
  return {"common-mode rejection", nonzero == 0,
          std::to_string(nonzero) + " nonzero differential values over " + std::to_string(cases) + " cases"};
}

// Zero parameters reproduce the bicubic baseline for every model kind.
template <typename T>
std::vector<CheckResult> zero_network_identity(double dwt_tol) {
  std::vector<CheckResult> out;
  Rng rng(9);
  const Tensor<T> lr = random_tensor<T>({1, 3, 16, 16}, rng, 0.0, 1.0);
  for (const ModelKind kind : kAllModelKinds) {
    for (const int scale : {2, 3, 4}) {
      ModelConfig cfg;
      cfg.kind = kind;
      cfg.depth = 4;
      cfg.width = 8;
      cfg.scale = scale;
      const Model<T> m = Model<T>::zeros(cfg);
      const Tensor<T> y = m.forward(lr);
      const Tensor<T> b = m.baseline(lr);
      double worst = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(y[i]) - static_cast<double>(b[i])));
      // Direct kinds add the residual to idwt2(0) == 0, so they must be exact.
      const double tol = is_direct(kind) ? 0.0 : dwt_tol;
      std::ostringstream os;
      os << "max abs deviation " << worst;
      out.push_back({"zero network == bicubic: " + to_string(kind) + " x" + std::to_string(scale),
                     is_direct(kind) ? worst == 0.0 : worst <= tol, os.str()});
    }
  }
  return out;
}

inline std::vector<CheckResult> invariant_suite() {
  std::vector<CheckResult> out;
  out.push_back(wavelet_round_trip<float>(1000, 1e-6));
  out.push_back(wavelet_round_trip<double>(1000, 1e-12));
  out.push_back(wavelet_energy(200, 1e-9));
  out.push_back(common_mode_rejection<float>());
  out.push_back(common_mode_rejection<double>());
  for (auto& r : zero_network_identity<float>(1e-6)) out.push_back(std::move(r));
  return out;
}

}  // namespace dwa::selfcheck
