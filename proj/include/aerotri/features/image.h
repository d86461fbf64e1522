#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace aerotri {

// 8-bit grayscale raster, row-major.
struct GrayImage {
  uint32_t width = 0;
  uint32_t height = 0;
  std::vector<uint8_t> pixels;

  GrayImage() = default;
  GrayImage(uint32_t w, uint32_t h, uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

  uint8_t& at(uint32_t x, uint32_t y) {
    return pixels[static_cast<size_t>(y) * width + x];
  }
  uint8_t at(uint32_t x, uint32_t y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
};

// Binary PGM (P5) with maxval 255 only.
GrayImage DecodePgm(std::span<const uint8_t> bytes);
std::vector<uint8_t> EncodePgm(const GrayImage& image);

GrayImage ReadPgm(const std::filesystem::path& path);
void WritePgm(const std::filesystem::path& path, const GrayImage& image);

}  // namespace aerotri
