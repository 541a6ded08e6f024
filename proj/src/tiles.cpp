#include <algorithm>
#include <cmath>

#include "wan/common.hpp"
#include "wan/data.hpp"
#include "wan/kernels.hpp"

namespace wan::data {
namespace {

// one crop region of the interleaved tile as planar doubles, still 8-bit scale
std::vector<double> crop_planes(const RasterTile& t, int64_t y0, int64_t x0, int64_t side) {
  std::vector<double> out(static_cast<size_t>(3 * side * side));
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < side; ++y)
      for (int64_t x = 0; x < side; ++x)
        out[static_cast<size_t>((c * side + y) * side + x)] =
            t.pixels[static_cast<size_t>(((y0 + y) * t.width + x0 + x) * 3 + c)];
  return out;
}

// nearest-neighbor on the same half-pixel grid the bilinear kernel samples
std::vector<uint8_t> resize_mask(const RasterTile& t, int64_t y0, int64_t x0, int64_t side,
                                 int64_t out_side) {
  std::vector<uint8_t> out(static_cast<size_t>(out_side * out_side));
  for (int64_t y = 0; y < out_side; ++y) {
    int64_t sy = std::clamp<int64_t>(
        static_cast<int64_t>(std::floor((y + 0.5) * side / out_side)), 0, side - 1);
    for (int64_t x = 0; x < out_side; ++x) {
      int64_t sx = std::clamp<int64_t>(
          static_cast<int64_t>(std::floor((x + 0.5) * side / out_side)), 0, side - 1);
      uint8_t v = t.mask[static_cast<size_t>((y0 + sy) * t.width + x0 + sx)];
      out[static_cast<size_t>(y * out_side + x)] = v >= 1 ? 1 : 0;
    }
  }
  return out;
}

std::vector<PatchSample> cut_crop(const RasterTile& tile, int64_t crop_y, int64_t crop_x,
                                  int64_t crop, int64_t resize, int64_t patch) {
  std::vector<double> planes = crop_planes(tile, crop_y, crop_x, crop);
  std::vector<double> resized(static_cast<size_t>(3 * resize * resize));
  kernels::bilinear_forward(planes.data(), resized.data(), 1, 3, crop, crop, resize, resize);

  std::vector<uint8_t> mask;
  if (tile.has_mask()) mask = resize_mask(tile, crop_y, crop_x, crop, resize);

  const int64_t per_side = resize / patch;
  std::vector<PatchSample> out;
  out.reserve(static_cast<size_t>(per_side * per_side));
  for (int64_t pr = 0; pr < per_side; ++pr)
    for (int64_t pc = 0; pc < per_side; ++pc) {
      PatchSample s;
      s.tile_id = tile.tile_id;
      s.crop_y = crop_y;
      s.crop_x = crop_x;
      s.patch_y = pr * patch;
      s.patch_x = pc * patch;
      s.image = Tensor::zeros({3, patch, patch});
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < patch; ++y)
          for (int64_t x = 0; x < patch; ++x)
            s.image.values()[static_cast<size_t>((c * patch + y) * patch + x)] =
                resized[static_cast<size_t>((c * resize + s.patch_y + y) * resize +
                                            s.patch_x + x)] /
                255.0;
      if (tile.has_mask()) {
        s.mask = Tensor::zeros({1, patch, patch});
        for (int64_t y = 0; y < patch; ++y)
          for (int64_t x = 0; x < patch; ++x)
            s.mask.values()[static_cast<size_t>(y * patch + x)] =
                mask[static_cast<size_t>((s.patch_y + y) * resize + s.patch_x + x)] >= 1 ? 1.0
                                                                                        : 0.0;
        s.weak_label = derive_weak_label(s.mask);
      }
      out.push_back(std::move(s));
    }
  return out;
}

}  // namespace

RasterTile tile_from_pnm(const pnm::Image& img, const pnm::Image* mask,
                         const std::string& dataset_id, const std::string& tile_id) {
  check(img.channels == 3, "tile image must have 3 channels");
  RasterTile t;
  t.height = img.height;
  t.width = img.width;
  t.pixels = img.data;
  t.dataset_id = dataset_id;
  t.tile_id = tile_id;
  if (mask != nullptr) {
    check(mask->channels == 1, "tile mask must have 1 channel");
    check(mask->height == img.height && mask->width == img.width,
          "tile mask extents must match the image");
    t.mask.resize(mask->data.size());
    for (size_t i = 0; i < mask->data.size(); ++i) {
      uint8_t v = mask->data[i];
      check(v == 0 || v == 255, "tile mask values must be 0 or 255");
      t.mask[i] = v == 255 ? 1 : 0;
    }
  }
  return t;
}

std::vector<PatchSample> tile_standard(const RasterTile& tile, int64_t crop, int64_t resize,
                                       int64_t patch) {
  check(crop > 0 && resize > 0 && patch > 0 && resize % patch == 0,
        "tiling parameters must be positive with patch dividing resize");
  check(tile.height >= crop && tile.width >= crop,
        "tile extents must reach the crop size");
  std::vector<PatchSample> out;
  for (int64_t r = 0; r + crop <= tile.height; r += crop)
    for (int64_t c = 0; c + crop <= tile.width; c += crop) {
      std::vector<PatchSample> part = cut_crop(tile, r, c, crop, resize, patch);
      std::move(part.begin(), part.end(), std::back_inserter(out));
    }
  return out;
}

std::vector<PatchSample> tile_potsdam(const RasterTile& tile) {
  check(tile.height == 6000 && tile.width == 6000, "expected a 6000x6000 tile");
  return tile_standard(tile, 1500, 512, 256);
}

std::vector<PatchSample> filter_empty(std::vector<PatchSample> patches, double std_threshold) {
  std::vector<PatchSample> out;
  out.reserve(patches.size());
  for (PatchSample& p : patches) {
    const auto& shape = p.image.shape();
    const int64_t ch = shape[0], hw = shape[1] * shape[2];
    bool textured = false;
    for (int64_t c = 0; c < ch && !textured; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int64_t i = 0; i < hw; ++i) {
        double v = p.image.values()[static_cast<size_t>(c * hw + i)] * 255.0;
        sum += v;
        sq += v * v;
      }
      double mean = sum / static_cast<double>(hw);
      double var = std::max(0.0, sq / static_cast<double>(hw) - mean * mean);
      if (std::sqrt(var) >= std_threshold) textured = true;
    }
    if (textured) out.push_back(std::move(p));
  }
  return out;
}

int derive_weak_label(const Tensor& mask, double tau) {
  check(mask.defined(), "weak label needs a mask");
  int64_t positives = 0;
  for (double v : mask.values()) {
    check(v == 0.0 || v == 1.0, "mask must be binary");
    if (v == 1.0) ++positives;
  }
  double fraction = static_cast<double>(positives) / static_cast<double>(mask.numel());
  return fraction >= tau ? 1 : 0;
}

Tensor normalize(const pnm::Image& img) {
  Tensor t = Tensor::zeros({img.channels, img.height, img.width});
  for (int64_t c = 0; c < img.channels; ++c)
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x)
        t.values()[static_cast<size_t>((c * img.height + y) * img.width + x)] =
            img.at(y, x, c) / 255.0;
  return t;
}

pnm::Image denormalize(const Tensor& image) {
  check(image.rank() == 3, "expected a CHW tensor");
  pnm::Image img;
  img.channels = image.shape()[0];
  img.height = image.shape()[1];
  img.width = image.shape()[2];
  check(img.channels == 1 || img.channels == 3, "expected 1 or 3 channels");
  img.data.resize(image.values().size());
  for (int64_t c = 0; c < img.channels; ++c)
    for (int64_t y = 0; y < img.height; ++y)
      for (int64_t x = 0; x < img.width; ++x) {
        double v = image.values()[static_cast<size_t>((c * img.height + y) * img.width + x)];
        img.at(y, x, c) = static_cast<uint8_t>(std::clamp(std::lround(v * 255.0), 0l, 255l));
      }
  return img;
}

pnm::Image mask_to_pnm(const Tensor& mask) {
  check(mask.rank() == 3 && mask.shape()[0] == 1, "expected a 1xHxW mask");
  pnm::Image img;
  img.channels = 1;
  img.height = mask.shape()[1];
  img.width = mask.shape()[2];
  img.data.resize(mask.values().size());
  for (size_t i = 0; i < mask.values().size(); ++i) {
    double v = mask.values()[i];
    check(v == 0.0 || v == 1.0, "mask must be binary");
    img.data[i] = v == 1.0 ? 255 : 0;
  }
  return img;
}

Tensor mask_from_pnm(const pnm::Image& img) {
  check(img.channels == 1, "mask file must be single-channel");
  Tensor t = Tensor::zeros({1, img.height, img.width});
  for (size_t i = 0; i < img.data.size(); ++i) {
    check(img.data[i] == 0 || img.data[i] == 255, "mask values must be 0 or 255");
    t.values()[i] = img.data[i] == 255 ? 1.0 : 0.0;
  }
  return t;
}

}  // namespace wan::data
