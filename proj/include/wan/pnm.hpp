#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wan::pnm {

// 8-bit raster, interleaved HWC; channels is 3 (PPM) or 1 (PGM)
struct Image {
  int64_t height = 0;
  int64_t width = 0;
  int64_t channels = 0;
  std::vector<uint8_t> data;

  uint8_t at(int64_t y, int64_t x, int64_t c) const {
    return data[static_cast<size_t>((y * width + x) * channels + c)];
  }
  uint8_t& at(int64_t y, int64_t x, int64_t c) {
    return data[static_cast<size_t>((y * width + x) * channels + c)];
  }
};

// binary P6/P5 with maxval 255; '#' comments in the header are skipped
Image read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Image& img);

}  // namespace wan::pnm
