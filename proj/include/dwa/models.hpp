#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dwa/conv.hpp"
#include "dwa/dwa_layer.hpp"
#include "dwa/ops.hpp"
#include "dwa/random.hpp"
#include "dwa/resample.hpp"
#include "dwa/tensor.hpp"
#include "dwa/wavelet.hpp"

namespace dwa {

enum class ModelKind { dwsr, dwsr_dwa, dwa_direct_dwsr, mwcnn_mini, mwcnn_mini_dwa, dwa_direct_mwcnn };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::dwsr,       ModelKind::dwsr_dwa,
                                               ModelKind::dwa_direct_dwsr, ModelKind::mwcnn_mini,
                                               ModelKind::mwcnn_mini_dwa,  ModelKind::dwa_direct_mwcnn};

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::dwsr: return "dwsr";
    case ModelKind::dwsr_dwa: return "dwsr_dwa";
    case ModelKind::dwa_direct_dwsr: return "dwa_direct_dwsr";
    case ModelKind::mwcnn_mini: return "mwcnn_mini";
    case ModelKind::mwcnn_mini_dwa: return "mwcnn_mini_dwa";
    case ModelKind::dwa_direct_mwcnn: return "dwa_direct_mwcnn";
  }
  return "dwsr";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (const ModelKind k : kAllModelKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

constexpr bool uses_dwa(ModelKind k) {
  return k == ModelKind::dwsr_dwa || k == ModelKind::dwa_direct_dwsr || k == ModelKind::mwcnn_mini_dwa ||
         k == ModelKind::dwa_direct_mwcnn;
}
constexpr bool is_direct(ModelKind k) { return k == ModelKind::dwa_direct_dwsr || k == ModelKind::dwa_direct_mwcnn; }
constexpr bool is_mwcnn(ModelKind k) {
  return k == ModelKind::mwcnn_mini || k == ModelKind::mwcnn_mini_dwa || k == ModelKind::dwa_direct_mwcnn;
}

struct DwaOptions {
  int stride = 1;
  Activation nonlinearity = Activation::relu;
  // Differential feature channels; 0 picks max(1, width / 4).
  std::size_t features = 0;

  friend bool operator==(const DwaOptions&, const DwaOptions&) = default;
};

struct ModelConfig {
  ModelKind kind = ModelKind::dwsr;
  std::size_t depth = 10;  // DWSR family: conv layers including the DWA layer
  std::size_t width = 64;
  int scale = 2;
  std::size_t kernel = 3;
  DwaOptions dwa;
  std::size_t mwcnn_levels = 2;
  std::size_t mwcnn_block_convs = 2;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

  void validate() const {
    if (depth < 2) fail(ErrorCode::InvalidConfig, "depth must be >= 2, got " + std::to_string(depth));
    if (width < 1) fail(ErrorCode::InvalidConfig, "width must be >= 1");
    if (scale < 2 || scale > 4) fail(ErrorCode::InvalidConfig, "scale must be 2, 3 or 4");
    if (kernel % 2 == 0) fail(ErrorCode::InvalidConfig, "kernel size must be odd");
    if (dwa.stride < 0) fail(ErrorCode::InvalidConfig, "DWA stride difference must be >= 0");
    if (is_mwcnn(kind)) {
      if (mwcnn_levels < 1) fail(ErrorCode::InvalidConfig, "mwcnn_levels must be >= 1");
      if (mwcnn_block_convs < 1) fail(ErrorCode::InvalidConfig, "mwcnn_block_convs must be >= 1");
    }
  }

  std::size_t dwa_features() const { return dwa.features != 0 ? dwa.features : std::max<std::size_t>(1, width / 4); }

  // HR height and width must be multiples of this (and LR = HR / scale).
  std::size_t spatial_multiple() const {
    const std::size_t pow2 = is_mwcnn(kind) ? (std::size_t{1} << mwcnn_levels) : 2;
    return std::lcm(2 * static_cast<std::size_t>(scale), pow2);
  }
};

// One convolution in declaration order. DWA layers contribute five slots.
struct ConvSlot {
  std::string name;
  std::size_t c_in;
  std::size_t c_out;
  std::size_t kernel;
};

namespace detail {

inline void push_dwa_slots(std::vector<ConvSlot>& plan, const std::string& prefix, const DwaConfig& d) {
  for (const char* t : {"theta1", "theta2", "theta3", "theta4"}) plan.push_back({prefix + "." + t, d.c_in, d.c_f, d.kernel});
  plan.push_back({prefix + ".theta_final", d.c_in + 2 * d.c_f, d.c_final, d.kernel});
}

inline DwaConfig first_dwa_config(const ModelConfig& cfg) {
  DwaConfig d;
  d.c_in = is_direct(cfg.kind) ? 3 : 12;
  d.c_f = cfg.dwa_features();
  d.c_final = cfg.width;
  d.kernel = cfg.kernel;
  d.stride = cfg.dwa.stride;
  d.nonlinearity = cfg.dwa.nonlinearity;
  return d;
}

}  // namespace detail

inline DwaConfig model_dwa_config(const ModelConfig& cfg) { return detail::first_dwa_config(cfg); }

// Channel plan of every convolution, a pure function of the config.
inline std::vector<ConvSlot> conv_plan(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.kernel;
  const std::size_t wd = cfg.width;
  const std::size_t in_ch = is_direct(cfg.kind) ? 3 : 12;
  std::vector<ConvSlot> plan;

  auto first_layer = [&](const std::string& name) {
    if (uses_dwa(cfg.kind))
      detail::push_dwa_slots(plan, name + ".dwa", detail::first_dwa_config(cfg));
    else
      plan.push_back({name, in_ch, wd, k});
  };

  if (!is_mwcnn(cfg.kind)) {
    first_layer("body.0");
    for (std::size_t l = 1; l + 1 < cfg.depth; ++l) plan.push_back({"body." + std::to_string(l), wd, wd, k});
    plan.push_back({"body." + std::to_string(cfg.depth - 1), wd, 12, k});
    return plan;
  }

  const std::size_t levels = cfg.mwcnn_levels;
  const std::size_t convs = cfg.mwcnn_block_convs;
  for (std::size_t l = 1; l <= levels; ++l) {
    const std::string prefix = "enc" + std::to_string(l) + ".";
    if (l == 1)
      first_layer(prefix + "0");
    else
      plan.push_back({prefix + "0", 4 * wd, wd, k});
    for (std::size_t c = 1; c < convs; ++c) plan.push_back({prefix + std::to_string(c), wd, wd, k});
  }
  for (std::size_t l = levels; l >= 1; --l) {
    const std::string prefix = "dec" + std::to_string(l) + ".";
    for (std::size_t c = 0; c + 1 < convs; ++c) plan.push_back({prefix + std::to_string(c), wd, wd, k});
    plan.push_back({prefix + std::to_string(convs - 1), wd, l == 1 ? std::size_t{12} : 4 * wd, k});
  }
  return plan;
}

inline std::size_t count_params(const ModelConfig& cfg) {
  std::size_t total = 0;
  for (const auto& s : conv_plan(cfg)) total += s.c_out * s.c_in * s.kernel * s.kernel + s.c_out;
  return total;
}

template <typename T>
class Model {
 public:
  static Model build(const ModelConfig& cfg, std::uint64_t seed) {
    Model m(cfg);
    Rng rng(seed);
    for (const auto& slot : m.plan_) m.convs_.push_back(init_conv<T>(slot.c_in, slot.c_out, slot.kernel, rng));
    return m;
  }

  static Model zeros(const ModelConfig& cfg) {
    Model m(cfg);
    for (const auto& slot : m.plan_) m.convs_.push_back(zero_conv<T>(slot.c_in, slot.c_out, slot.kernel));
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<ConvSlot>& plan() const { return plan_; }
  std::size_t param_count() const { return count_params(cfg_); }

  // Flat list [w0, b0, w1, b1, ...] in declaration order.
  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> out;
    out.reserve(2 * convs_.size());
    for (const auto& c : convs_) {
      out.push_back(c.weight);
      out.push_back(c.bias);
    }
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (const auto& s : plan_) {
      out.push_back(s.name + ".weight");
      out.push_back(s.name + ".bias");
    }
    return out;
  }

  std::vector<Shape> parameter_shapes() const {
    std::vector<Shape> out;
    for (const auto& s : plan_) {
      out.push_back(conv_weight_shape(s.c_in, s.c_out, s.kernel));
      out.push_back(conv_bias_shape(s.c_out));
    }
    return out;
  }

  void set_parameters(const std::vector<Tensor<T>>& params) {
    if (params.size() != 2 * plan_.size()) {
      fail(ErrorCode::ShapeMismatch, "expected " + std::to_string(2 * plan_.size()) + " parameter tensors, got " +
                                         std::to_string(params.size()));
    }
    const auto shapes = parameter_shapes();
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!(params[i].shape() == shapes[i])) {
        fail(ErrorCode::ShapeMismatch, "parameter " + std::to_string(i) + " has shape " +
                                           to_string(params[i].shape()) + ", expected " + to_string(shapes[i]));
      }
    }
    for (std::size_t i = 0; i < plan_.size(); ++i) {
      convs_[i] = ConvParams<T>::make(params[2 * i].requires_grad() ? params[2 * i] : params[2 * i].as_parameter(),
                                      params[2 * i + 1].requires_grad() ? params[2 * i + 1]
                                                                        : params[2 * i + 1].as_parameter());
    }
  }

  // Checks an LR input (n, 3, h, w) against the pipeline's size constraints.
  void check_input(const Shape& lr) const {
    if (lr.c != 3) fail(ErrorCode::ChannelMismatch, "model input must have 3 channels, got " + to_string(lr));
    const std::size_t r = static_cast<std::size_t>(cfg_.scale);
    const std::size_t pow2 = is_mwcnn(cfg_.kind) ? (std::size_t{1} << cfg_.mwcnn_levels) : 2;
    if ((r * lr.h) % pow2 != 0 || (r * lr.w) % pow2 != 0) {
      fail(ErrorCode::ShapeIncompatible, "SR output " + std::to_string(r * lr.h) + "x" + std::to_string(r * lr.w) +
                                             " must be divisible by " + std::to_string(pow2) + " for " +
                                             to_string(cfg_.kind));
    }
    if (cfg_.dwa.stride > 0 && uses_dwa(cfg_.kind)) {
      const std::size_t side = std::min(r * lr.h, r * lr.w) / 2;
      if (static_cast<std::size_t>(cfg_.dwa.stride) >= side) {
        fail(ErrorCode::ShapeIncompatible, "stride difference too large for input " + to_string(lr));
      }
    }
  }

  // Bicubic upscale of the LR input; the zero-network output of every kind.
  Tensor<T> baseline(const Tensor<T>& lr) const { return bicubic_resize(lr, static_cast<double>(cfg_.scale)); }

  // LR (n,3,h,w) -> SR (n,3,rh,rw). Unclamped.
  Tensor<T> forward(const Tensor<T>& lr) const { return run(lr, nullptr); }

  // Post-activation output of the first layer (the DWA layer when present).
  Tensor<T> first_layer_features(const Tensor<T>& lr) const {
    Tensor<T> first;
    run(lr, &first);
    return first;
  }

 private:
  explicit Model(const ModelConfig& cfg) : cfg_(cfg), plan_(conv_plan(cfg)) {}

  class Cursor {
   public:
    explicit Cursor(const std::vector<ConvParams<T>>& convs) : convs_(convs) {}
    const ConvParams<T>& next() { return convs_.at(pos_++); }

   private:
    const std::vector<ConvParams<T>>& convs_;
    std::size_t pos_ = 0;
  };

  Tensor<T> first_layer(const Tensor<T>& x, Cursor& cur) const {
    if (!uses_dwa(cfg_.kind)) return relu(conv2d(x, cur.next()));
    DwaParams<T> p{cur.next(), cur.next(), cur.next(), cur.next(), cur.next()};
    return relu(dwa_forward(x, p, detail::first_dwa_config(cfg_)));
  }

  Tensor<T> network_input(const Tensor<T>& lr) const {
    if (is_direct(cfg_.kind)) return bicubic_resize(lr, static_cast<double>(cfg_.scale) / 2.0);
    return dwt2(baseline(lr));
  }

  Tensor<T> run(const Tensor<T>& lr, Tensor<T>* first_out) const {
    check_input(lr.shape());
    Cursor cur(convs_);
    const Tensor<T> input = network_input(lr);
    Tensor<T> h = first_layer(input, cur);
    if (first_out) *first_out = h;

    if (!is_mwcnn(cfg_.kind)) {
      for (std::size_t l = 1; l + 1 < cfg_.depth; ++l) h = relu(conv2d(h, cur.next()));
      h = conv2d(h, cur.next());
      // DWSR adds the residual in the wavelet domain; Direct adds it in image space.
      if (is_direct(cfg_.kind)) return add(idwt2(h), baseline(lr));
      return idwt2(add(h, input));
    }

    const std::size_t levels = cfg_.mwcnn_levels;
    const std::size_t convs = cfg_.mwcnn_block_convs;
    std::vector<Tensor<T>> skips;
    for (std::size_t l = 1; l <= levels; ++l) {
      if (l > 1) h = relu(conv2d(dwt2(h), cur.next()));
      for (std::size_t c = 1; c < convs; ++c) h = relu(conv2d(h, cur.next()));
      skips.push_back(h);
    }
    for (std::size_t l = levels; l >= 1; --l) {
      for (std::size_t c = 0; c + 1 < convs; ++c) h = relu(conv2d(h, cur.next()));
      h = idwt2(conv2d(h, cur.next()));
      if (l > 1) h = add(h, skips[l - 2]);
    }
    const Tensor<T> base = baseline(lr);
    return add(h, base);
  }

  ModelConfig cfg_;
  std::vector<ConvSlot> plan_;
  std::vector<ConvParams<T>> convs_;
};

}  // namespace dwa
