#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wan/pnm.hpp"
#include "wan/tensor.hpp"

namespace wan::data {

// full-resolution input raster; mask values, when present, are {0,1} per pixel
struct RasterTile {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> pixels;  // H*W*3 interleaved
  std::vector<uint8_t> mask;    // empty, or H*W of {0,1}
  std::string dataset_id;
  std::string tile_id;
  double meters_per_pixel = 0.0;

  bool has_mask() const { return !mask.empty(); }
};

// model-ready patch; undefined mask means unlabeled, weak_label -1 means absent
struct PatchSample {
  Tensor image;  // 3 x S x S in [0,1]
  Tensor mask;   // 1 x S x S binary, or undefined
  int weak_label = -1;
  std::string tile_id;
  int64_t crop_y = 0;   // crop origin in tile pixels
  int64_t crop_x = 0;
  int64_t patch_y = 0;  // patch origin inside the resized crop
  int64_t patch_x = 0;
};

RasterTile tile_from_pnm(const pnm::Image& img, const pnm::Image* mask,
                         const std::string& dataset_id, const std::string& tile_id);

// non-overlapping crop grid, each crop bilinearly resized then cut into
// (resize/patch)^2 patches; masks follow with nearest-neighbor + 0.5 threshold
std::vector<PatchSample> tile_standard(const RasterTile& tile, int64_t crop = 500,
                                       int64_t resize = 512, int64_t patch = 256);

// 6000^2 tile -> 16 sub-images of 1500^2 -> 512^2 each -> 4 patches each
std::vector<PatchSample> tile_potsdam(const RasterTile& tile);

// drops patches that are flat in every channel (std below threshold, 8-bit scale)
std::vector<PatchSample> filter_empty(std::vector<PatchSample> patches,
                                      double std_threshold = 1.0);

// 1 iff the positive-pixel fraction reaches tau (inclusive)
int derive_weak_label(const Tensor& mask, double tau = 0.005);

Tensor normalize(const pnm::Image& img);                  // value/255, CHW
pnm::Image denormalize(const Tensor& image);              // round(value*255), clamped
pnm::Image mask_to_pnm(const Tensor& mask);               // {0,1} -> {0,255} PGM
Tensor mask_from_pnm(const pnm::Image& img);              // {0,255} -> 1 x H x W {0,1}

}  // namespace wan::data
