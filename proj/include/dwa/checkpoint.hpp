#pragma once

#include <bit>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <locale>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dwa/loss.hpp"
#include "dwa/models.hpp"
#include "dwa/train.hpp"

namespace dwa {

// Checkpoint layout (version 1):
//
//   Text header, one "key value" pair per line, '\n' terminated, ASCII:
//     DWA-CHECKPOINT
//     version 1
//     model.kind <kind>            model.depth <n>   model.width <n>
//     model.scale <r>              model.kernel <k>
//     model.dwa.stride <s>         model.dwa.nonlinearity <relu|sigmoid|tanh>
//     model.dwa.features <n>       model.mwcnn_levels <n>   model.mwcnn_block_convs <n>
//     train.* (loss, lr0, l2_reg, decay, decay_every, epochs, steps_per_epoch,
//              batch_size, patch_size)
//     seed <n>
//     step <n>
//     tensors <count>
//     end
//   Binary payload, one record per tensor in declaration order:
//     u32 name length, name bytes, u32 n, u32 c, u32 h, u32 w,
//     n*c*h*w IEEE-754 binary32 values.
//   All integers and floats are little-endian. Nothing follows the last record.

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  TrainConfig train;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

template <typename T>
struct LoadedCheckpoint {
  Model<T> model;
  CheckpointMeta meta;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string activation_name(Activation a) { return to_string(a); }

inline Activation parse_activation_or_throw(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  fail(ErrorCode::InvalidConfig, "unknown nonlinearity '" + s + "'");
}

template <typename Int>
Int parse_int(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::CorruptPayload, "checkpoint header lacks '" + key + "'");
  Int v{};
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorCode::CorruptPayload, "bad value for '" + key + "'");
  return v;
}

inline double parse_real(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::CorruptPayload, "checkpoint header lacks '" + key + "'");
  double v = 0.0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorCode::CorruptPayload, "bad value for '" + key + "'");
  return v;
}

inline const std::string& get_str(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) fail(ErrorCode::CorruptPayload, "checkpoint header lacks '" + key + "'");
  return it->second;
}

}  // namespace detail

inline std::string format_config_lines(const ModelConfig& m, const CheckpointMeta& meta) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "model.kind " << to_string(m.kind) << '\n'
     << "model.depth " << m.depth << '\n'
     << "model.width " << m.width << '\n'
     << "model.scale " << m.scale << '\n'
     << "model.kernel " << m.kernel << '\n'
     << "model.dwa.stride " << m.dwa.stride << '\n'
     << "model.dwa.nonlinearity " << to_string(m.dwa.nonlinearity) << '\n'
     << "model.dwa.features " << m.dwa.features << '\n'
     << "model.mwcnn_levels " << m.mwcnn_levels << '\n'
     << "model.mwcnn_block_convs " << m.mwcnn_block_convs << '\n'
     << "train.loss " << to_string(meta.train.loss) << '\n'
     << "train.lr0 " << format_double(meta.train.lr0) << '\n'
     << "train.l2_reg " << format_double(meta.train.l2_reg) << '\n'
     << "train.decay " << format_double(meta.train.decay) << '\n'
     << "train.decay_every " << meta.train.decay_every << '\n'
     << "train.epochs " << meta.train.epochs << '\n'
     << "train.steps_per_epoch " << meta.train.steps_per_epoch << '\n'
     << "train.batch_size " << meta.train.batch_size << '\n'
     << "train.patch_size " << meta.train.patch_size << '\n'
     << "seed " << meta.seed << '\n'
     << "step " << meta.step << '\n';
  return os.str();
}

template <typename T>
std::string serialize_checkpoint(const Model<T>& model, const CheckpointMeta& meta = {}) {
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  std::string out = "DWA-CHECKPOINT\nversion " + std::to_string(kCheckpointVersion) + "\n";
  out += format_config_lines(model.config(), meta);
  out += "tensors " + std::to_string(params.size()) + "\nend\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::put_u32(out, static_cast<std::uint32_t>(names[i].size()));
    out += names[i];
    const Shape s = params[i].shape();
    for (const std::size_t d : {s.n, s.c, s.h, s.w}) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (const T v : params[i].data()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::string& path, const CheckpointMeta& meta = {}) {
  const std::string bytes = serialize_checkpoint(model, meta);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing " + path);
}

template <typename T>
LoadedCheckpoint<T> parse_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) fail(ErrorCode::CorruptPayload, "checkpoint header is truncated");
    line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
  };
  std::string line;
  next_line(line);
  if (line != "DWA-CHECKPOINT") fail(ErrorCode::CorruptPayload, "not a checkpoint file");
  next_line(line);
  if (line.rfind("version ", 0) != 0) fail(ErrorCode::CorruptPayload, "checkpoint version line missing");
  if (line != "version " + std::to_string(kCheckpointVersion)) {
    fail(ErrorCode::VersionMismatch, "checkpoint has '" + line + "', expected version " +
                                         std::to_string(kCheckpointVersion));
  }
  std::map<std::string, std::string> kv;
  for (;;) {
    next_line(line);
    if (line == "end") break;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos) fail(ErrorCode::CorruptPayload, "malformed header line '" + line + "'");
    kv[line.substr(0, sp)] = line.substr(sp + 1);
  }

  ModelConfig cfg;
  const auto kind = parse_model_kind(detail::get_str(kv, "model.kind"));
  if (!kind) fail(ErrorCode::InvalidConfig, "unknown model kind in checkpoint");
  cfg.kind = *kind;
  cfg.depth = detail::parse_int<std::size_t>(kv, "model.depth");
  cfg.width = detail::parse_int<std::size_t>(kv, "model.width");
  cfg.scale = detail::parse_int<int>(kv, "model.scale");
  cfg.kernel = detail::parse_int<std::size_t>(kv, "model.kernel");
  cfg.dwa.stride = detail::parse_int<int>(kv, "model.dwa.stride");
  cfg.dwa.nonlinearity = detail::parse_activation_or_throw(detail::get_str(kv, "model.dwa.nonlinearity"));
  cfg.dwa.features = detail::parse_int<std::size_t>(kv, "model.dwa.features");
  cfg.mwcnn_levels = detail::parse_int<std::size_t>(kv, "model.mwcnn_levels");
  cfg.mwcnn_block_convs = detail::parse_int<std::size_t>(kv, "model.mwcnn_block_convs");
  cfg.validate();

  CheckpointMeta meta;
  const auto loss_kind = parse_loss_kind(detail::get_str(kv, "train.loss"));
  if (!loss_kind) fail(ErrorCode::InvalidConfig, "unknown loss in checkpoint");
  meta.train.loss = *loss_kind;
  meta.train.lr0 = detail::parse_real(kv, "train.lr0");
  meta.train.l2_reg = detail::parse_real(kv, "train.l2_reg");
  meta.train.decay = detail::parse_real(kv, "train.decay");
  meta.train.decay_every = detail::parse_int<std::size_t>(kv, "train.decay_every");
  meta.train.epochs = detail::parse_int<std::size_t>(kv, "train.epochs");
  meta.train.steps_per_epoch = detail::parse_int<std::size_t>(kv, "train.steps_per_epoch");
  meta.train.batch_size = detail::parse_int<std::size_t>(kv, "train.batch_size");
  meta.train.patch_size = detail::parse_int<std::size_t>(kv, "train.patch_size");
  meta.seed = detail::parse_int<std::uint64_t>(kv, "seed");
  meta.step = detail::parse_int<std::uint64_t>(kv, "step");
  meta.train.seed = meta.seed;

  Model<T> model = Model<T>::zeros(cfg);
  const auto names = model.parameter_names();
  const auto shapes = model.parameter_shapes();
  const auto count = detail::parse_int<std::size_t>(kv, "tensors");
  if (count != names.size()) {
    fail(ErrorCode::CorruptPayload, "header lists " + std::to_string(count) + " tensors, config implies " +
                                        std::to_string(names.size()));
  }

  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  auto need = [&](std::size_t n, const std::string& what) {
    if (bytes.size() - pos < n) fail(ErrorCode::CorruptPayload, "payload truncated in " + what);
  };
  std::vector<Tensor<T>> params;
  params.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    need(4, "tensor " + std::to_string(i));
    const std::uint32_t name_len = detail::get_u32(data + pos);
    pos += 4;
    need(name_len, "tensor name");
    const std::string name = bytes.substr(pos, name_len);
    pos += name_len;
    if (name != names[i]) fail(ErrorCode::CorruptPayload, "expected tensor '" + names[i] + "', found '" + name + "'");
    need(16, name + " shape");
    const Shape s{detail::get_u32(data + pos), detail::get_u32(data + pos + 4), detail::get_u32(data + pos + 8),
                  detail::get_u32(data + pos + 12)};
    pos += 16;
    if (!(s == shapes[i])) {
      fail(ErrorCode::CorruptPayload, name + " has shape " + to_string(s) + ", config implies " + to_string(shapes[i]));
    }
    need(4 * s.size(), name + " values");
    std::vector<T> values(s.size());
    for (std::size_t k = 0; k < values.size(); ++k, pos += 4) {
      values[k] = static_cast<T>(std::bit_cast<float>(detail::get_u32(data + pos)));
    }
    params.push_back(Tensor<T>::parameter(s, std::move(values)));
  }
  if (pos != bytes.size()) {
    fail(ErrorCode::CorruptPayload, std::to_string(bytes.size() - pos) + " trailing bytes after last tensor");
  }
  model.set_parameters(params);
  return {std::move(model), meta};
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint<T>(bytes);
}

}  // namespace dwa
