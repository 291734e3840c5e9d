#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace motiongait {

/// Grayscale image with values in [0, 1], row-major.
struct Image {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::int64_t h, std::int64_t w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h * w), fill) {}

  float& at(std::int64_t y, std::int64_t x) { return pixels[static_cast<std::size_t>(y * width + x)]; }
  float at(std::int64_t y, std::int64_t x) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
  bool operator==(const Image&) const = default;
};

/// Reads an 8-bit binary PGM (P5). Throws IngestionError on malformed data
/// and IoError when the file cannot be opened.
Image read_pgm(const std::filesystem::path& path);

/// Raw P5 bytes; values are scaled to 0..255 and rounded.
std::vector<std::uint8_t> encode_pgm(const Image& image);
void write_pgm(const std::filesystem::path& path, const Image& image);

}  // namespace motiongait
