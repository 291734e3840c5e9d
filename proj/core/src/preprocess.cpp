#include "motiongait/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace motiongait {

std::optional<Image> preprocess_frame(const Image& raw) {
  std::int64_t top = -1, bottom = -1;
  for (std::int64_t y = 0; y < raw.height; ++y) {
    for (std::int64_t x = 0; x < raw.width; ++x) {
      if (raw.at(y, x) >= 0.5f) {
        if (top < 0) top = y;
        bottom = y;
        break;
      }
    }
  }
  if (top < 0) return std::nullopt;

  const std::int64_t crop_h = bottom - top + 1;
  const std::int64_t scaled_w = std::max<std::int64_t>(
      1, std::llround(static_cast<double>(raw.width) * static_cast<double>(kFrameHeight) / static_cast<double>(crop_h)));
  Image scaled(kFrameHeight, scaled_w);
  double sum_x = 0.0;
  std::int64_t count = 0;
  for (std::int64_t y = 0; y < kFrameHeight; ++y) {
    const auto sy = top + std::min(crop_h - 1, (y * crop_h * 2 + crop_h) / (2 * kFrameHeight));
    for (std::int64_t x = 0; x < scaled_w; ++x) {
      const auto sx = std::min(raw.width - 1, (x * raw.width * 2 + raw.width) / (2 * scaled_w));
      if (raw.at(sy, sx) >= 0.5f) {
        scaled.at(y, x) = 1.0f;
        sum_x += static_cast<double>(x);
        ++count;
      }
    }
  }
  const double centroid = sum_x / static_cast<double>(count);
  const auto offset = static_cast<std::int64_t>(std::floor(centroid - static_cast<double>(kFrameWidth / 2) + 0.5));
  Image out(kFrameHeight, kFrameWidth);
  for (std::int64_t y = 0; y < kFrameHeight; ++y)
    for (std::int64_t x = 0; x < kFrameWidth; ++x) {
      const std::int64_t sx = x + offset;
      if (sx >= 0 && sx < scaled_w) out.at(y, x) = scaled.at(y, sx);
    }
  return out;
}

}  // namespace motiongait
