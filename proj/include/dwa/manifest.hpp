#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dwa/dataset.hpp"
#include "dwa/png_io.hpp"
#include "dwa/synthetic.hpp"

namespace dwa {

// Manifest file, ASCII, one entry per line after the header:
//   DWA-MANIFEST 1
//   scale <r>
//   <sha256 hex> <hr path> [<sha256 hex> <lr path>]
// Paths are relative to the manifest's directory.

struct ManifestEntry {
  std::string hr_path;
  std::string hr_sha256;
  std::optional<std::string> lr_path;
  std::optional<std::string> lr_sha256;
};

struct DatasetManifest {
  int scale = 2;
  std::vector<ManifestEntry> entries;
};

inline std::string sha256_hex(const std::vector<unsigned char>& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::IoError, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(detail::read_file(path)); }

inline std::string format_manifest(const DatasetManifest& m) {
  std::string out = "DWA-MANIFEST 1\nscale " + std::to_string(m.scale) + "\n";
  for (const auto& e : m.entries) {
    out += e.hr_sha256 + " " + e.hr_path;
    if (e.lr_path) out += " " + e.lr_sha256.value_or("") + " " + *e.lr_path;
    out += "\n";
  }
  return out;
}

// Hashes every PNG in `dir` (sorted by name) and writes <dir>/manifest.txt.
inline DatasetManifest write_manifest(const std::string& dir, int scale) {
  namespace fs = std::filesystem;
  DatasetManifest m;
  m.scale = scale;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) m.entries.push_back({f, sha256_file((fs::path(dir) / f).string()), {}, {}});
  std::ofstream out(fs::path(dir) / "manifest.txt", std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write manifest in " + dir);
  out << format_manifest(m);
  return m;
}

// Parses and verifies a manifest: every file must exist and match its hash.
inline DatasetManifest load_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  DatasetManifest m;
  std::string line;
  if (!std::getline(in, line) || line != "DWA-MANIFEST 1") fail(ErrorCode::DecodeError, path + ": bad manifest header");
  if (!std::getline(in, line) || line.rfind("scale ", 0) != 0) fail(ErrorCode::DecodeError, path + ": missing scale");
  {
    const std::string v = line.substr(6);
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), m.scale);
    if (ec != std::errc() || p != v.data() + v.size()) fail(ErrorCode::DecodeError, path + ": bad scale");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    std::string lr_hash, lr_path;
    if (!(ls >> e.hr_sha256 >> e.hr_path)) fail(ErrorCode::DecodeError, path + ": malformed entry '" + line + "'");
    if (ls >> lr_hash >> lr_path) {
      e.lr_sha256 = lr_hash;
      e.lr_path = lr_path;
    }
    auto verify = [&](const std::string& rel, const std::string& expected) {
      const fs::path full = base / rel;
      if (!fs::exists(full)) fail(ErrorCode::IoError, "manifest entry missing: " + full.string());
      if (sha256_file(full.string()) != expected) fail(ErrorCode::HashMismatch, "hash mismatch for " + full.string());
    };
    verify(e.hr_path, e.hr_sha256);
    if (e.lr_path) verify(*e.lr_path, *e.lr_sha256);
    m.entries.push_back(std::move(e));
  }
  return m;
}

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t size = 0;
};

// "synthetic:SEED:COUNT:SIZE"
inline std::optional<SyntheticSpec> parse_synthetic_spec(const std::string& s) {
  const std::string prefix = "synthetic:";
  if (s.rfind(prefix, 0) != 0) return std::nullopt;
  SyntheticSpec spec;
  std::string rest = s.substr(prefix.size());
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t colon = rest.find(':', start);
    parts.push_back(rest.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 3) fail(ErrorCode::InvalidConfig, "expected synthetic:SEED:COUNT:SIZE, got '" + s + "'");
  auto num = [&](const std::string& p, auto& out) {
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), out);
    if (ec != std::errc() || ptr != p.data() + p.size() || p.empty()) {
      fail(ErrorCode::InvalidConfig, "bad number '" + p + "' in '" + s + "'");
    }
  };
  num(parts[0], spec.seed);
  num(parts[1], spec.count);
  num(parts[2], spec.size);
  return spec;
}

// Loads a dataset from a directory of PNGs (verified against manifest.txt when
// present) or from a "synthetic:SEED:COUNT:SIZE" spec. HR images are mod-cropped
// to `multiple`; LR comes from the manifest when listed, else bicubic downscale.
template <typename T>
Dataset<T> load_dataset(const std::string& source, int scale, std::size_t multiple) {
  namespace fs = std::filesystem;
  if (auto spec = parse_synthetic_spec(source)) {
    return make_dataset(gen_synthetic<T>(spec->seed, spec->count, spec->size), scale, multiple);
  }
  if (!fs::is_directory(source)) fail(ErrorCode::IoError, "dataset directory not found: " + source);
  const fs::path manifest_path = fs::path(source) / "manifest.txt";
  if (!fs::exists(manifest_path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(source)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<std::string, Tensor<T>>> images;
    for (const auto& f : files) images.emplace_back(fs::path(f).filename().string(), load_png<T>(f));
    return make_dataset(std::move(images), scale, multiple);
  }

  const DatasetManifest m = load_manifest(manifest_path.string());
  if (m.scale != scale) {
    fail(ErrorCode::InvalidConfig, "manifest scale " + std::to_string(m.scale) + " differs from requested " +
                                       std::to_string(scale));
  }
  Dataset<T> ds;
  ds.scale = scale;
  for (const auto& e : m.entries) {
    const Tensor<T> hr = mod_crop(load_png<T>((fs::path(source) / e.hr_path).string()), multiple);
    Tensor<T> lr;
    if (e.lr_path) {
      const Tensor<T> raw = load_png<T>((fs::path(source) / *e.lr_path).string());
      const std::size_t lh = hr.shape().h / static_cast<std::size_t>(scale);
      const std::size_t lw = hr.shape().w / static_cast<std::size_t>(scale);
      if (raw.shape().h < lh || raw.shape().w < lw) {
        fail(ErrorCode::ShapeMismatch, *e.lr_path + " is smaller than HR / scale");
      }
      std::vector<T> crop;
      crop.reserve(3 * lh * lw);
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < lh; ++i)
          for (std::size_t j = 0; j < lw; ++j) crop.push_back(raw(0, c, i, j));
      lr = Tensor<T>::create(Shape{1, 3, lh, lw}, std::move(crop));
    } else {
      lr = bicubic_resize(hr, 1.0 / static_cast<double>(scale));
    }
    ds.items.push_back({e.hr_path, hr, lr});
  }
  return ds;
}

}  // namespace dwa
