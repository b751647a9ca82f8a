#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gnnseg/image.hpp"

namespace gnnseg {

// One grayscale raster as stored on disk. Samples are widened to 16 bits;
// maxval records the file's declared full-scale value (255 or 65535 for PNG,
// the header maxval for PGM).
struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;  // 8 or 16
  int maxval = 255;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Format detected from file content (PNG signature or "P5"), not extension.
GrayImage read_gray(const std::string& path);

// Format chosen by extension: .png or .pgm.
void write_gray(const GrayImage& img, const std::string& path);

// One file per modality; values are scaled to [0,1] by the stored maxval.
Slice read_slice(const std::vector<std::string>& modality_paths);

// Quantizes to the requested bit depth (8 or 16). Writing then reading a
// slice that came from files of the same depth reproduces it exactly.
void write_slice(const Slice& slice, const std::vector<std::string>& modality_paths,
                 int bit_depth = 16);

// Masks are 8-bit PNGs with the class id as the raw pixel value.
LabelMask read_mask(const std::string& path);
void write_mask(const LabelMask& mask, const std::string& path);

// 8-bit RGB PNG, used by the render command.
void write_rgb_png(int width, int height,
                   const std::vector<std::array<std::uint8_t, 3>>& pixels,
                   const std::string& path);

}  // namespace gnnseg
