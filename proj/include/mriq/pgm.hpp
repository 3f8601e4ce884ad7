#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mriq/fft.hpp"

namespace mriq::pgm {

/// 8-bit grayscale raster, row-major.
struct ImageU8 {
  int w = 0, h = 0;
  std::vector<uint8_t> pixels;
};

/// Binary PGM ("P5", maxval 255).
void write_pgm(const std::filesystem::path& path, const ImageU8& image);
ImageU8 read_pgm(const std::filesystem::path& path);

/// round(v * 255) after clamping to [0, 1].
ImageU8 quantize(const kspace::RealGrid& grid);

}  // namespace mriq::pgm
