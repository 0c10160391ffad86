#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dwa/random.hpp"
#include "dwa/resample.hpp"
#include "dwa/tensor.hpp"

namespace dwa {

template <typename T>
struct SrPair {
  std::string name;
  Tensor<T> hr;  // (1, 3, H, W)
  Tensor<T> lr;  // (1, 3, H / r, W / r), bicubic downscale of hr
};

template <typename T>
struct Dataset {
  int scale = 2;
  std::vector<SrPair<T>> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

// Crops an image to the largest top-left region whose sides are multiples of `multiple`.
template <typename T>
Tensor<T> mod_crop(const Tensor<T>& img, std::size_t multiple) {
  const Shape s = img.shape();
  const std::size_t h = s.h - s.h % multiple;
  const std::size_t w = s.w - s.w % multiple;
  if (h == 0 || w == 0) fail(ErrorCode::ImageTooSmall, "image " + to_string(s) + " smaller than " + std::to_string(multiple));
  if (h == s.h && w == s.w) return img;
  std::vector<T> out(s.n * s.c * h * w);
  for (std::size_t p = 0; p < s.n * s.c; ++p)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) out[(p * h + i) * w + j] = img[p * s.plane() + i * s.w + j];
  return Tensor<T>::create(Shape{s.n, s.c, h, w}, std::move(out));
}

// HR images are mod-cropped to `multiple` (a multiple of scale); LR is their bicubic downscale.
template <typename T>
Dataset<T> make_dataset(std::vector<std::pair<std::string, Tensor<T>>> images, int scale, std::size_t multiple) {
  Dataset<T> ds;
  ds.scale = scale;
  for (auto& [name, img] : images) {
    Tensor<T> hr = mod_crop(img, multiple);
    Tensor<T> lr = bicubic_resize(hr, 1.0 / static_cast<double>(scale));
    ds.items.push_back({std::move(name), std::move(hr), std::move(lr)});
  }
  return ds;
}

// The eight symmetries of the square. Bits 0-1: quarter turns counter-clockwise;
// bit 2: horizontal flip applied before rotating.
template <typename T>
Tensor<T> dihedral(const Tensor<T>& x, int transform_id) {
  if (transform_id < 0 || transform_id > 7) {
    fail(ErrorCode::BadTransformId, "transform id " + std::to_string(transform_id) + " not in 0..7");
  }
  const Shape s = x.shape();
  const int turns = transform_id & 3;
  const bool flip = (transform_id & 4) != 0;
  const bool swap = (turns & 1) != 0;
  const Shape out_shape{s.n, s.c, swap ? s.w : s.h, swap ? s.h : s.w};
  std::vector<T> out(out_shape.size());
  const std::size_t h = s.h, w = s.w;
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const T* src = x.data().data() + p * s.plane();
    T* dst = out.data() + p * s.plane();
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j0 = 0; j0 < w; ++j0) {
        const std::size_t j = flip ? w - 1 - j0 : j0;
        // (i, j) -> destination after `turns` counter-clockwise quarter turns.
        std::size_t di = i, dj = j, ch = h, cw = w;
        for (int t = 0; t < turns; ++t) {
          const std::size_t ni = cw - 1 - dj;
          const std::size_t nj = di;
          di = ni;
          dj = nj;
          std::swap(ch, cw);
        }
        dst[di * cw + dj] = src[i * w + j0];
      }
    }
  }
  return Tensor<T>::create(out_shape, std::move(out));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> augment(const Tensor<T>& hr, const Tensor<T>& lr, int transform_id) {
  return {dihedral(hr, transform_id), dihedral(lr, transform_id)};
}

template <typename T>
struct PatchBatch {
  Tensor<T> hr;  // (batch, 3, P, P)
  Tensor<T> lr;  // (batch, 3, P / r, P / r)
  std::vector<std::size_t> image_index;
  std::vector<std::size_t> origin_y;  // HR coordinates, multiples of r
  std::vector<std::size_t> origin_x;
  std::vector<int> transform;
};

namespace detail {

template <typename T>
void copy_patch(const Tensor<T>& img, std::size_t oy, std::size_t ox, std::size_t size, std::vector<T>& dst) {
  const Shape s = img.shape();
  for (std::size_t c = 0; c < s.c; ++c)
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) dst.push_back(img(0, c, oy + i, ox + j));
}

}  // namespace detail

// Uniform over images and over r-aligned origins; one dihedral transform per patch.
template <typename T>
PatchBatch<T> sample_patches(const Dataset<T>& ds, std::size_t patch_size, std::size_t batch, std::uint64_t seed) {
  if (ds.empty()) fail(ErrorCode::EmptyDataset, "cannot sample patches from an empty dataset");
  const auto r = static_cast<std::size_t>(ds.scale);
  if (patch_size == 0 || patch_size % r != 0) {
    fail(ErrorCode::InvalidConfig, "patch size " + std::to_string(patch_size) + " not a multiple of scale");
  }
  for (const auto& item : ds.items) {
    if (item.hr.shape().h < patch_size || item.hr.shape().w < patch_size) {
      fail(ErrorCode::ImageTooSmall, item.name + " is " + std::to_string(item.hr.shape().h) + "x" +
                                         std::to_string(item.hr.shape().w) + ", patch is " + std::to_string(patch_size));
    }
  }
  const std::size_t lp = patch_size / r;
  Rng rng(seed);
  PatchBatch<T> out;
  std::vector<T> hr_data, lr_data;
  hr_data.reserve(batch * 3 * patch_size * patch_size);
  lr_data.reserve(batch * 3 * lp * lp);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t idx = rng.below(ds.size());
    const auto& item = ds.items[idx];
    const std::size_t ny = (item.hr.shape().h - patch_size) / r + 1;
    const std::size_t nx = (item.hr.shape().w - patch_size) / r + 1;
    const std::size_t oy = r * rng.below(ny);
    const std::size_t ox = r * rng.below(nx);
    const int t = static_cast<int>(rng.below(8));

    std::vector<T> hp, lpv;
    detail::copy_patch(item.hr, oy, ox, patch_size, hp);
    detail::copy_patch(item.lr, oy / r, ox / r, lp, lpv);
    auto [ha, la] = augment(Tensor<T>::create(Shape{1, 3, patch_size, patch_size}, std::move(hp)),
                            Tensor<T>::create(Shape{1, 3, lp, lp}, std::move(lpv)), t);
    hr_data.insert(hr_data.end(), ha.data().begin(), ha.data().end());
    lr_data.insert(lr_data.end(), la.data().begin(), la.data().end());
    out.image_index.push_back(idx);
    out.origin_y.push_back(oy);
    out.origin_x.push_back(ox);
    out.transform.push_back(t);
  }
  out.hr = Tensor<T>::create(Shape{batch, 3, patch_size, patch_size}, std::move(hr_data));
  out.lr = Tensor<T>::create(Shape{batch, 3, lp, lp}, std::move(lr_data));
  return out;
}

}  // namespace dwa
