#pragma once

#include <cstddef>

#include "aerotri/features/feature_set.h"
#include "aerotri/features/image.h"

namespace aerotri {

struct HarrisOptions {
  size_t max_features = 2000;
  double harris_k = 0.04;
  // Responses below quality_level * max response are discarded.
  double quality_level = 0.01;
};

inline constexpr int kBuiltinDescriptorDim = 128;
inline constexpr uint32_t kMinDetectImageSize = 32;

// Harris corners with 3x3 non-maximum suppression. Each corner is described
// by the 16x16 patch around it with horizontal pixel pairs averaged (16x8 =
// 128 values), mean-subtracted and L2-normalized. Deterministic. Throws
// TooSmall for images under 32x32.
FeatureSet DetectBuiltin(const GrayImage& image, const HarrisOptions& options);

inline FeatureSet DetectBuiltin(const GrayImage& image, size_t max_features) {
  HarrisOptions options;
  options.max_features = max_features;
  return DetectBuiltin(image, options);
}

}  // namespace aerotri
