#pragma once

#include <optional>

#include "motiongait/image.hpp"

namespace motiongait {

inline constexpr std::int64_t kFrameHeight = 64;
inline constexpr std::int64_t kFrameWidth = 44;

/// Canonical silhouette: binarize at 0.5, crop to the vertical extent of the
/// foreground, rescale (nearest neighbour) to height 64 keeping the aspect
/// ratio, then cut a 44-wide window whose column 22 sits on the foreground
/// x-centroid. Returns nullopt for an all-background frame.
std::optional<Image> preprocess_frame(const Image& raw);

}  // namespace motiongait
