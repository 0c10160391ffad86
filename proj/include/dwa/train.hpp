#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "dwa/dataset.hpp"
#include "dwa/loss.hpp"
#include "dwa/metrics.hpp"
#include "dwa/models.hpp"
#include "dwa/optim.hpp"
#include "dwa/random.hpp"

namespace dwa {

struct TrainConfig {
  LossKind loss = LossKind::l1;
  double lr0 = 1e-4;
  double l2_reg = 1e-8;
  double decay = 0.8;
  std::size_t decay_every = 20;
  std::size_t epochs = 1;
  // 0 means ceil(dataset size / batch).
  std::size_t steps_per_epoch = 0;
  std::size_t batch_size = 16;
  std::size_t patch_size = 192;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  void validate(const ModelConfig& model) const {
    if (batch_size == 0) fail(ErrorCode::InvalidConfig, "batch size must be >= 1");
    if (decay_every == 0) fail(ErrorCode::InvalidConfig, "decay interval must be >= 1");
    if (!(lr0 > 0.0)) fail(ErrorCode::InvalidConfig, "learning rate must be positive");
    const std::size_t multiple = model.spatial_multiple();
    if (patch_size == 0 || patch_size % multiple != 0) {
      fail(ErrorCode::InvalidConfig, "patch size " + std::to_string(patch_size) + " must be a multiple of " +
                                         std::to_string(multiple) + " for " + to_string(model.kind) + " at x" +
                                         std::to_string(model.scale));
    }
  }
};

// TrainConfig defaults for the two architecture families.
inline TrainConfig default_train_config(ModelKind kind) {
  TrainConfig cfg;
  if (is_mwcnn(kind)) {
    cfg.loss = LossKind::l2;
    cfg.patch_size = 240;
  }
  return cfg;
}

inline double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(epoch / cfg.decay_every));
}

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  std::optional<double> val_psnr;
  std::optional<double> val_ssim;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

struct EvalScores {
  double psnr = 0.0;
  double ssim = 0.0;
};

// Mean PSNR/SSIM of the model's clamped output against HR over a dataset.
template <typename T>
EvalScores evaluate(const Model<T>& model, const Dataset<T>& ds, const MetricOptions& opt = {}) {
  EvalScores s;
  if (ds.empty()) return s;
  for (const auto& item : ds.items) {
    const Tensor<T> sr = model.forward(item.lr);
    s.psnr += psnr(sr, item.hr, 1.0, opt);
    s.ssim += ssim(sr, item.hr, opt);
  }
  s.psnr /= static_cast<double>(ds.size());
  s.ssim /= static_cast<double>(ds.size());
  return s;
}

template <typename T>
struct TrainResult {
  Model<T> model;
  TrainHistory history;
  std::size_t steps = 0;
};

using StepCallback = std::function<void(const StepRecord&)>;

// sample -> forward -> loss -> backward -> Adam, for epochs x steps_per_epoch
// steps. The model is initialized from train_cfg.seed.
template <typename T>
TrainResult<T> train(const ModelConfig& model_cfg, const TrainConfig& cfg, const Dataset<T>& data,
                     const std::type_identity_t<Dataset<T>>* validation = nullptr, const StepCallback& on_step = {},
                     std::optional<std::type_identity_t<Model<T>>> initial = std::nullopt) {
  model_cfg.validate();
  cfg.validate(model_cfg);
  if (data.empty()) fail(ErrorCode::EmptyDataset, "training dataset is empty");
  if (data.scale != model_cfg.scale) fail(ErrorCode::InvalidConfig, "dataset scale differs from model scale");

  Model<T> model = initial ? std::move(*initial) : Model<T>::build(model_cfg, cfg.seed);
  AdamState<T> adam;
  TrainHistory history;
  const std::size_t steps_per_epoch =
      cfg.steps_per_epoch != 0 ? cfg.steps_per_epoch : (data.size() + cfg.batch_size - 1) / cfg.batch_size;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, cfg);
    for (std::size_t k = 0; k < steps_per_epoch; ++k, ++step) {
      const PatchBatch<T> batch = sample_patches(data, cfg.patch_size, cfg.batch_size, derive_seed(cfg.seed, step));
      const std::vector<Tensor<T>> params = model.parameters();
      const Tensor<T> pred = model.forward(batch.lr);
      const Tensor<T> objective = loss(cfg.loss, pred, batch.hr);
      const Gradients<T> grads = backward(objective);
      std::vector<std::vector<T>> g;
      g.reserve(params.size());
      for (const auto& p : params) g.push_back(grads.of(p));
      model.set_parameters(adam_step(params, g, adam, lr, cfg.l2_reg));
      StepRecord rec{step, epoch, lr, static_cast<double>(objective.item())};
      history.steps.push_back(rec);
      if (on_step) on_step(rec);
    }
    EpochRecord er{epoch, lr, std::nullopt, std::nullopt};
    if (validation && !validation->empty()) {
      const auto scores = evaluate(model, *validation);
      er.val_psnr = scores.psnr;
      er.val_ssim = scores.ssim;
    }
    history.epochs.push_back(er);
  }
  return {std::move(model), std::move(history), step};
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

// One record per line:
//   step <step> epoch <epoch> lr <lr> loss <loss>
//   epoch <epoch> lr <lr> val_psnr <db|none> val_ssim <value|none>
inline std::string format_history(const TrainHistory& h) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  std::size_t next_step = 0;
  for (const auto& e : h.epochs) {
    while (next_step < h.steps.size() && h.steps[next_step].epoch == e.epoch) {
      const auto& s = h.steps[next_step++];
      os << "step " << s.step << " epoch " << s.epoch << " lr " << format_double(s.lr) << " loss "
         << format_double(s.loss) << '\n';
    }
    os << "epoch " << e.epoch << " lr " << format_double(e.lr) << " val_psnr "
       << (e.val_psnr ? format_double(*e.val_psnr) : "none") << " val_ssim "
       << (e.val_ssim ? format_double(*e.val_ssim) : "none") << '\n';
  }
  return os.str();
}

inline void write_history(const TrainHistory& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << format_history(h);
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

}  // namespace dwa
