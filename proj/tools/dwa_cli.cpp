#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <locale>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dwa/dwa.hpp"
#include "dwa/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace dwa;

namespace {

// Raised for bad flag combinations that CLI11 cannot express; exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct ModelFlags {
  std::string model = "dwsr_dwa";
  int scale = 2;
  std::size_t depth = 10;
  std::size_t width = 64;
  int stride = 1;
  std::string nonlinearity = "relu";
};

struct TrainFlags {
  std::optional<std::string> loss;
  std::size_t epochs = 1;
  std::size_t steps_per_epoch = 0;
  std::size_t batch = 16;
  std::optional<std::size_t> patch;
  double lr = 1e-4;
  std::string data;
  std::string val;
};

// Ordered key/value record written to run_config.txt.
using Record = std::vector<std::pair<std::string, std::string>>;

std::string num(double v) { return format_double(v); }

const std::vector<std::string> kKindNames = [] {
  std::vector<std::string> v;
  for (const ModelKind k : kAllModelKinds) v.push_back(to_string(k));
  return v;
}();

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--model", f.model, "Model kind")->check(CLI::IsMember(kKindNames))->capture_default_str();
  app->add_option("--scale", f.scale, "Upscaling factor")->check(CLI::IsMember({2, 3, 4}))->capture_default_str();
  app->add_option("--depth", f.depth, "Conv layers (DWSR) or blocks per level (MWCNN)")->check(CLI::Range(2, 1000))->capture_default_str();
  app->add_option("--width", f.width, "Feature channels")->check(CLI::Range(1, 4096))->capture_default_str();
  app->add_option("--stride", f.stride, "DWA stride difference s")->check(CLI::Range(0, 64))->capture_default_str();
  app->add_option("--nonlinearity", f.nonlinearity, "DWA activation")
      ->check(CLI::IsMember({"relu", "sigmoid", "tanh"}))
      ->capture_default_str();
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--loss", f.loss, "l1 or l2 (default: l1 for DWSR, l2 for MWCNN)")->check(CLI::IsMember({"l1", "l2"}));
  app->add_option("--epochs", f.epochs, "Epochs")->check(CLI::Range(0, 1000000))->capture_default_str();
  app->add_option("--steps-per-epoch", f.steps_per_epoch, "Steps per epoch (0: ceil(images / batch))")->capture_default_str();
  app->add_option("--batch", f.batch, "Patches per step")->check(CLI::Range(1, 100000))->capture_default_str();
  app->add_option("--patch", f.patch, "HR patch side (default: 192 DWSR, 240 MWCNN)")->check(CLI::Range(1, 100000));
  app->add_option("--lr", f.lr, "Initial learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--data", f.data, "Training images: DIR or synthetic:SEED:COUNT:SIZE")->required();
  app->add_option("--val", f.val, "Validation images: DIR or synthetic:SEED:COUNT:SIZE");
}

ModelConfig model_config(const ModelFlags& f) {
  ModelConfig m;
  m.kind = *parse_model_kind(f.model);
  m.scale = f.scale;
  m.depth = f.depth;
  m.width = f.width;
  m.dwa.stride = f.stride;
  m.dwa.nonlinearity = detail::parse_activation_or_throw(f.nonlinearity);
  return m;
}

TrainConfig train_config(const ModelConfig& m, const TrainFlags& f, std::uint64_t seed) {
  TrainConfig t = default_train_config(m.kind);
  if (f.loss) t.loss = *parse_loss_kind(*f.loss);
  if (f.patch) t.patch_size = *f.patch;
  t.epochs = f.epochs;
  t.steps_per_epoch = f.steps_per_epoch;
  t.batch_size = f.batch;
  t.lr0 = f.lr;
  t.seed = seed;
  const std::size_t multiple = m.spatial_multiple();
  if (t.patch_size % multiple != 0) {
    throw UsageError("--patch " + std::to_string(t.patch_size) + " must be a multiple of " + std::to_string(multiple) +
                     " for --model " + to_string(m.kind) + " --scale " + std::to_string(m.scale));
  }
  return t;
}

void describe_model(Record& r, const ModelConfig& m) {
  r.emplace_back("model", to_string(m.kind));
  r.emplace_back("scale", std::to_string(m.scale));
  r.emplace_back("depth", std::to_string(m.depth));
  r.emplace_back("width", std::to_string(m.width));
  r.emplace_back("kernel", std::to_string(m.kernel));
  r.emplace_back("stride", std::to_string(m.dwa.stride));
  r.emplace_back("nonlinearity", to_string(m.dwa.nonlinearity));
  r.emplace_back("dwa_features", std::to_string(m.dwa_features()));
  r.emplace_back("mwcnn_levels", std::to_string(m.mwcnn_levels));
  r.emplace_back("mwcnn_block_convs", std::to_string(m.mwcnn_block_convs));
}

void describe_train(Record& r, const TrainConfig& t) {
  r.emplace_back("loss", to_string(t.loss));
  r.emplace_back("lr", num(t.lr0));
  r.emplace_back("l2_reg", num(t.l2_reg));
  r.emplace_back("decay", num(t.decay));
  r.emplace_back("decay_every", std::to_string(t.decay_every));
  r.emplace_back("epochs", std::to_string(t.epochs));
  r.emplace_back("steps_per_epoch", std::to_string(t.steps_per_epoch));
  r.emplace_back("batch", std::to_string(t.batch_size));
  r.emplace_back("patch", std::to_string(t.patch_size));
}

fs::path prepare_out_dir(const Globals& g) {
  const fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) fail(ErrorCode::IoError, "--out-dir " + g.out_dir + " cannot be created");
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "failed writing " + path.string());
}

void write_run_config(const fs::path& dir, const std::string& subcommand, const Globals& g, const Record& r) {
  std::ostringstream os;
  os << "subcommand " << subcommand << "\nseed " << g.seed << "\nout_dir " << g.out_dir << '\n';
  for (const auto& [k, v] : r) os << k << ' ' << v << '\n';
  write_text(dir / "run_config.txt", os.str());
}

// Crops an LR image so that scale * size is a multiple of the model's requirement.
template <typename T>
Tensor<T> crop_lr(const Tensor<T>& lr, const ModelConfig& m) {
  const std::size_t need = m.spatial_multiple() / static_cast<std::size_t>(m.scale);
  return mod_crop(lr, need);
}

// ---------------------------------------------------------------- train

int cmd_train(const Globals& g, const ModelFlags& mf, const TrainFlags& tf, const std::string& init) {
  const ModelConfig m = model_config(mf);
  m.validate();
  const TrainConfig t = train_config(m, tf, g.seed);
  const fs::path dir = prepare_out_dir(g);
  Record rec;
  describe_model(rec, m);
  describe_train(rec, t);
  rec.emplace_back("init", init);
  rec.emplace_back("data", tf.data);
  rec.emplace_back("val", tf.val.empty() ? "none" : tf.val);
  write_run_config(dir, "train", g, rec);

  const Dataset<float> data = load_dataset<float>(tf.data, m.scale, m.spatial_multiple());
  std::optional<Dataset<float>> val;
  if (!tf.val.empty()) val = load_dataset<float>(tf.val, m.scale, m.spatial_multiple());
  std::optional<Model<float>> initial;
  if (init == "zero") initial = Model<float>::zeros(m);

  std::cout << "training " << to_string(m.kind) << " (" << Model<float>::zeros(m).param_count() << " parameters) on "
            << data.size() << " images\n";
  TrainResult<float> result = train(m, t, data, val ? &*val : nullptr, {}, std::move(initial));
  std::size_t next = 0;
  for (const auto& e : result.history.epochs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (; next < result.history.steps.size() && result.history.steps[next].epoch == e.epoch; ++next, ++n)
      sum += result.history.steps[next].loss;
    std::cout << "epoch " << e.epoch << " lr " << num(e.lr) << " mean_loss " << (n ? num(sum / static_cast<double>(n)) : "none");
    if (e.val_psnr) std::cout << " val_psnr " << num(*e.val_psnr) << " val_ssim " << num(*e.val_ssim);
    std::cout << '\n';
  }
  CheckpointMeta meta{t, g.seed, result.steps};
  save_checkpoint(result.model, (dir / "checkpoint.dwa").string(), meta);
  write_history(result.history, (dir / "history.log").string());
  std::cout << "wrote " << (dir / "checkpoint.dwa").string() << " and " << (dir / "history.log").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const Globals& g, const std::string& ckpt, int scale, const std::string& data, const std::string& against,
             const std::string& channel, std::size_t crop) {
  std::optional<LoadedCheckpoint<double>> loaded;
  if (!ckpt.empty()) loaded = load_checkpoint<double>(ckpt);
  ModelConfig m;
  m.kind = ModelKind::dwa_direct_dwsr;
  m.scale = scale;
  if (loaded) m = loaded->model.config();
  const fs::path dir = prepare_out_dir(g);
  Record rec;
  rec.emplace_back("ckpt", ckpt.empty() ? "none (bicubic)" : ckpt);
  if (loaded) describe_model(rec, m);
  else rec.emplace_back("scale", std::to_string(scale));
  rec.emplace_back("data", data);
  rec.emplace_back("against", against);
  rec.emplace_back("metric_channel", channel);
  rec.emplace_back("crop_border", std::to_string(crop));
  write_run_config(dir, "eval", g, rec);

  MetricOptions opt;
  opt.channel = channel == "y" ? MetricChannel::y : MetricChannel::rgb;
  opt.crop_border = crop;
  const Dataset<double> ds = load_dataset<double>(data, m.scale, m.spatial_multiple());
  if (ds.empty()) fail(ErrorCode::EmptyDataset, "--data " + data + " holds no images");
  std::ostringstream os;
  double sums[4] = {0, 0, 0, 0};
  for (const auto& item : ds.items) {
    const Tensor<double> bicubic = bicubic_resize(item.lr, static_cast<double>(m.scale));
    const Tensor<double> sr = loaded ? loaded->model.forward(item.lr) : bicubic;
    const Tensor<double>& ref = against == "bicubic" ? bicubic : item.hr;
    const double v[4] = {psnr(sr, ref, 1.0, opt), ssim(sr, ref, opt), psnr(bicubic, ref, 1.0, opt), ssim(bicubic, ref, opt)};
    for (int k = 0; k < 4; ++k) sums[k] += v[k];
    os << "image " << item.name << " model_psnr " << num(v[0]) << " model_ssim " << num(v[1]) << " bicubic_psnr "
       << num(v[2]) << " bicubic_ssim " << num(v[3]) << '\n';
  }
  const double n = static_cast<double>(ds.size());
  os << "mean model_psnr " << num(sums[0] / n) << " model_ssim " << num(sums[1] / n) << " bicubic_psnr "
     << num(sums[2] / n) << " bicubic_ssim " << num(sums[3] / n) << '\n';
  std::cout << os.str();
  write_text(dir / "eval.txt", os.str());
  return 0;
}

// ---------------------------------------------------------------- sr

int cmd_sr(const Globals& g, const std::string& ckpt, int scale, const std::string& input, const std::string& output,
           const std::string& residual) {
  std::optional<LoadedCheckpoint<double>> loaded;
  if (!ckpt.empty()) loaded = load_checkpoint<double>(ckpt);
  const fs::path dir = prepare_out_dir(g);
  Record rec;
  rec.emplace_back("ckpt", ckpt.empty() ? "none (bicubic)" : ckpt);
  const int r = loaded ? loaded->model.config().scale : scale;
  if (loaded) describe_model(rec, loaded->model.config());
  else rec.emplace_back("scale", std::to_string(scale));
  rec.emplace_back("input", input);
  rec.emplace_back("output", output);
  rec.emplace_back("residual", residual.empty() ? "none" : residual);
  write_run_config(dir, "sr", g, rec);

  Tensor<double> lr = load_png<double>(input);
  if (loaded) lr = crop_lr(lr, loaded->model.config());
  const Tensor<double> bicubic = bicubic_resize(lr, static_cast<double>(r));
  const Tensor<double> sr = loaded ? loaded->model.forward(lr) : bicubic;
  const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : dir / p; };
  save_png(sr, resolve(output).string());
  std::cout << "wrote " << resolve(output).string() << " (" << sr.shape().w << "x" << sr.shape().h << ")\n";
  if (!residual.empty()) {
    // Offset by 128/255 rather than 0.5 so a zero residual lands on one 8-bit level.
    constexpr double mid_gray = 128.0 / 255.0;
    std::vector<double> v(sr.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(sr[i], 0.0, 1.0) - std::clamp(bicubic[i], 0.0, 1.0) + mid_gray;
    save_png(Tensor<double>::create(sr.shape(), std::move(v)), resolve(residual).string());
    std::cout << "wrote " << resolve(residual).string() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- gradcheck / selftest

int report(const std::vector<selfcheck::CheckResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok &= r.pass;
  }
  std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? 0 : 2;
}

int cmd_gradcheck(const Globals& g, double tol, double model_tol) {
  const fs::path dir = prepare_out_dir(g);
  write_run_config(dir, "gradcheck", g, {{"tolerance", num(tol)}, {"model_tolerance", num(model_tol)}});
  return report(selfcheck::gradient_suite(tol, model_tol));
}

int cmd_selftest(const Globals& g) {
  const fs::path dir = prepare_out_dir(g);
  write_run_config(dir, "selftest", g, {});
  return report(selfcheck::invariant_suite());
}

// ---------------------------------------------------------------- ablate

struct AblationPoint {
  std::size_t depth;
  int stride;
  std::uint64_t seed;
  double psnr, ssim, bicubic_psnr, final_loss;
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

int cmd_ablate(const Globals& g, ModelFlags mf, const TrainFlags& tf, const std::vector<int>& strides,
               const std::vector<std::size_t>& depths, const std::vector<std::uint64_t>& seeds) {
  if (tf.val.empty()) throw UsageError("--val is required for ablate (held-out images)");
  for (const int s : strides)
    if (s < 0) throw UsageError("--strides must be >= 0");
  for (const std::size_t d : depths)
    if (d < 2) throw UsageError("--depths must be >= 2");
  std::vector<std::pair<ModelConfig, TrainConfig>> jobs;
  for (const std::size_t d : depths) {
    for (const int s : strides) {
      mf.depth = d;
      mf.stride = s;
      const ModelConfig m = model_config(mf);
      m.validate();
      jobs.emplace_back(m, train_config(m, tf, 0));
    }
  }
  const fs::path dir = prepare_out_dir(g);
  Record rec;
  describe_model(rec, jobs.front().first);
  describe_train(rec, jobs.front().second);
  rec.erase(std::remove_if(rec.begin(), rec.end(), [](const auto& kv) { return kv.first == "depth" || kv.first == "stride"; }),
            rec.end());
  std::vector<std::string> sv, dv, seedv;
  for (const int s : strides) sv.push_back(std::to_string(s));
  for (const std::size_t d : depths) dv.push_back(std::to_string(d));
  for (const auto s : seeds) seedv.push_back(std::to_string(s));
  rec.emplace_back("depths", join(dv));
  rec.emplace_back("strides", join(sv));
  rec.emplace_back("seeds", join(seedv));
  rec.emplace_back("data", tf.data);
  rec.emplace_back("val", tf.val);
  write_run_config(dir, "ablate", g, rec);

  const ModelConfig& first = jobs.front().first;
  const Dataset<float> data = load_dataset<float>(tf.data, first.scale, first.spatial_multiple());
  const Dataset<float> val = load_dataset<float>(tf.val, first.scale, first.spatial_multiple());
  const double bicubic = evaluate(Model<float>::zeros([&] {
                                    ModelConfig z = first;
                                    z.kind = ModelKind::dwa_direct_dwsr;
                                    return z;
                                  }()),
                                  val)
                             .psnr;

  std::vector<AblationPoint> points;
  for (const auto& [m, base] : jobs) {
    for (const std::uint64_t seed : seeds) {
      TrainConfig t = base;
      t.seed = seed;
      const auto result = train(m, t, data);
      const auto scores = evaluate(result.model, val);
      const double final_loss = result.history.steps.empty() ? 0.0 : result.history.steps.back().loss;
      points.push_back({m.depth, m.dwa.stride, seed, scores.psnr, scores.ssim, bicubic, final_loss});
      std::cout << "depth " << m.depth << " stride " << m.dwa.stride << " seed " << seed << " val_psnr "
                << std::fixed << std::setprecision(4) << scores.psnr << " (bicubic " << bicubic << ")\n"
                << std::defaultfloat;
    }
  }

  std::ostringstream csv;
  csv << "depth,stride,seed,val_psnr,val_ssim,bicubic_psnr,final_loss\n";
  for (const auto& p : points)
    csv << p.depth << ',' << p.stride << ',' << p.seed << ',' << num(p.psnr) << ',' << num(p.ssim) << ','
        << num(p.bicubic_psnr) << ',' << num(p.final_loss) << '\n';
  write_text(dir / "ablate.csv", csv.str());

  std::ostringstream table;
  table << std::left << std::setw(7) << "depth" << std::setw(8) << "stride" << std::right << std::setw(8) << "seeds"
        << std::setw(13) << "mean_psnr" << std::setw(11) << "std_psnr" << std::setw(12) << "mean_ssim" << std::setw(13)
        << "vs_bicubic" << '\n';
  table << std::fixed;
  std::map<std::size_t, std::map<int, double>> means;
  for (const std::size_t d : depths) {
    for (const int s : strides) {
      std::vector<double> ps, ss;
      for (const auto& p : points)
        if (p.depth == d && p.stride == s) {
          ps.push_back(p.psnr);
          ss.push_back(p.ssim);
        }
      const double n = static_cast<double>(ps.size());
      const double mean = std::accumulate(ps.begin(), ps.end(), 0.0) / n;
      double var = 0.0;
      for (const double v : ps) var += (v - mean) * (v - mean);
      const double sd = ps.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
      means[d][s] = mean;
      table << std::left << std::setw(7) << d << std::setw(8) << s << std::right << std::setw(8) << ps.size()
            << std::setprecision(4) << std::setw(13) << mean << std::setw(11) << sd << std::setw(12)
            << std::accumulate(ss.begin(), ss.end(), 0.0) / n << std::showpos << std::setw(13) << mean - bicubic
            << std::noshowpos << '\n';
    }
  }
  for (const auto& [d, by_stride] : means) {
    if (!by_stride.count(0) || by_stride.size() < 2) continue;
    const double base = by_stride.at(0);
    std::size_t better = 0, total = 0;
    for (const auto& [s, mean] : by_stride) {
      if (s == 0) continue;
      ++total;
      better += mean > base;
    }
    table << "depth " << d << ": " << better << " of " << total << " strides s>=1 beat s=0 on mean held-out PSNR\n";
  }
  std::cout << table.str();
  write_text(dir / "ablate.txt", table.str());
  return 0;
}

// ---------------------------------------------------------------- dump-features

int cmd_dump_features(const Globals& g, const std::string& ckpt, const std::string& input, std::size_t top) {
  const auto loaded = load_checkpoint<double>(ckpt);
  const ModelConfig& m = loaded.model.config();
  const fs::path dir = prepare_out_dir(g);
  Record rec;
  rec.emplace_back("ckpt", ckpt);
  describe_model(rec, m);
  rec.emplace_back("input", input);
  rec.emplace_back("top", std::to_string(top));
  write_run_config(dir, "dump-features", g, rec);

  const Tensor<double> lr = crop_lr(load_png<double>(input), m);
  const Tensor<double> f = loaded.model.first_layer_features(lr);
  const Shape s = f.shape();
  const std::size_t plane = s.plane();
  // Channels ranked by the sum of their L2 distances to every other channel.
  std::vector<double> score(s.c, 0.0);
  for (std::size_t a = 0; a < s.c; ++a) {
    for (std::size_t b = a + 1; b < s.c; ++b) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = f[a * plane + i] - f[b * plane + i];
        d2 += d * d;
      }
      score[a] += std::sqrt(d2);
      score[b] += std::sqrt(d2);
    }
  }
  std::vector<std::size_t> order(s.c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  std::ostringstream listing;
  for (std::size_t k = 0; k < std::min(top, s.c); ++k) {
    const std::size_t c = order[k];
    const auto begin = f.data().begin() + static_cast<std::ptrdiff_t>(c * plane);
    const auto [lo, hi] = std::minmax_element(begin, begin + static_cast<std::ptrdiff_t>(plane));
    std::vector<double> v(plane);
    for (std::size_t i = 0; i < plane; ++i) v[i] = *hi > *lo ? (begin[static_cast<std::ptrdiff_t>(i)] - *lo) / (*hi - *lo) : 0.5;
    const std::string name = "feature_rank" + std::to_string(k + 1) + "_ch" + std::to_string(c) + ".png";
    save_png(Tensor<double>::create({1, 1, s.h, s.w}, std::move(v)), (dir / name).string());
    listing << "rank " << k + 1 << " channel " << c << " distance_sum " << num(score[c]) << " file " << name << '\n';
  }
  std::cout << listing.str();
  write_text(dir / "features.txt", listing.str());
  return 0;
}

bool is_validation(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::BadSize:
    case ErrorCode::ImageTooSmall:
    case ErrorCode::ShapeIncompatible:
    case ErrorCode::EmptyDataset:
    case ErrorCode::ShiftTooLarge:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::cout.imbue(std::locale::classic());
  CLI::App app{"Differential wavelet amplifier super-resolution toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for initialization and sampling")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for outputs and run_config.txt")->capture_default_str();

  ModelFlags mf;
  TrainFlags tf;
  std::string init = "random", ckpt, data, against = "hr", channel = "rgb", input, output = "sr.png", residual;
  int scale = 2;
  std::size_t crop = 0, top = 5;
  double tol = 1e-4, model_tol = 1e-3;
  std::vector<int> strides{0, 1, 2, 3};
  std::vector<std::size_t> depths{6};
  std::vector<std::uint64_t> seeds{0, 1, 2};

  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoint.dwa and history.log");
  add_model_flags(train_cmd, mf);
  add_train_flags(train_cmd, tf);
  train_cmd->add_option("--init", init, "random, or zero for an all-zero network (bicubic)")
      ->check(CLI::IsMember({"random", "zero"}))
      ->capture_default_str();

  auto* eval_cmd = app.add_subcommand("eval", "Per-image and mean PSNR/SSIM for a checkpoint and bicubic");
  eval_cmd->add_option("--ckpt", ckpt, "Checkpoint (omit to score bicubic alone)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--scale", scale, "Scale when no checkpoint is given")->check(CLI::IsMember({2, 3, 4}))->capture_default_str();
  eval_cmd->add_option("--data", data, "Images: DIR or synthetic:SEED:COUNT:SIZE")->required();
  eval_cmd->add_option("--against", against, "Reference: hr or bicubic")->check(CLI::IsMember({"hr", "bicubic"}))->capture_default_str();
  eval_cmd->add_option("--metric-channel", channel, "rgb or y")->check(CLI::IsMember({"rgb", "y"}))->capture_default_str();
  eval_cmd->add_option("--crop-border", crop, "Pixels ignored at each border")->capture_default_str();

  auto* sr_cmd = app.add_subcommand("sr", "Upscale one PNG");
  sr_cmd->add_option("--ckpt", ckpt, "Checkpoint (omit for plain bicubic)")->check(CLI::ExistingFile);
  sr_cmd->add_option("--scale", scale, "Scale when no checkpoint is given")->check(CLI::IsMember({2, 3, 4}))->capture_default_str();
  sr_cmd->add_option("--input", input, "Low-resolution PNG")->required()->check(CLI::ExistingFile);
  sr_cmd->add_option("--output", output, "Output PNG (relative paths land in --out-dir)")->capture_default_str();
  sr_cmd->add_option("--residual", residual, "Also write SR - bicubic on a mid-gray background here");

  auto* grad_cmd = app.add_subcommand("gradcheck", "64-bit finite-difference gradient suite");
  grad_cmd->add_option("--tol", tol, "Per-layer relative tolerance")->capture_default_str();
  grad_cmd->add_option("--model-tol", model_tol, "End-to-end relative tolerance")->capture_default_str();

  auto* self_cmd = app.add_subcommand("selftest", "Wavelet round trip, common-mode rejection and zero-network identity");

  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep stride and depth over seeds; writes ablate.txt and ablate.csv");
  add_model_flags(ablate_cmd, mf);
  add_train_flags(ablate_cmd, tf);
  ablate_cmd->add_option("--strides", strides, "Comma-separated stride differences")->delimiter(',')->capture_default_str();
  ablate_cmd->add_option("--depths", depths, "Comma-separated depths")->delimiter(',')->capture_default_str();
  ablate_cmd->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();

  auto* dump_cmd = app.add_subcommand("dump-features", "Write the first-layer feature maps with the largest distance sums");
  dump_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--input", input, "Low-resolution PNG")->required()->check(CLI::ExistingFile);
  dump_cmd->add_option("--top", top, "Channels to write")->check(CLI::Range(1, 100000))->capture_default_str();

  for (auto* sub : {train_cmd, eval_cmd, sr_cmd, grad_cmd, self_cmd, ablate_cmd, dump_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(g, mf, tf, init);
    if (*eval_cmd) return cmd_eval(g, ckpt, scale, data, against, channel, crop);
    if (*sr_cmd) return cmd_sr(g, ckpt, scale, input, output, residual);
    if (*grad_cmd) return cmd_gradcheck(g, tol, model_tol);
    if (*self_cmd) return cmd_selftest(g);
    if (*ablate_cmd) return cmd_ablate(g, mf, tf, strides, depths, seeds);
    if (*dump_cmd) return cmd_dump_features(g, ckpt, input, top);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return is_validation(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
