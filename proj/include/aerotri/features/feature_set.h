#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace aerotri {

struct Keypoint {
  double x = 0.0;  // pixels, column
  double y = 0.0;  // pixels, row
  double score = 0.0;

  Eigen::Vector2d Position() const { return {x, y}; }
  bool operator==(const Keypoint&) const = default;
};

// One descriptor per row; the column count is the descriptor dimension. Held
// in double precision in memory; the FEAT file stores f32.
using DescriptorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSet {
  std::string image_id;
  uint32_t image_width = 0;
  uint32_t image_height = 0;
  std::vector<Keypoint> keypoints;
  DescriptorMatrix descriptors;

  size_t NumFeatures() const { return keypoints.size(); }
  int DescriptorDim() const { return static_cast<int>(descriptors.cols()); }

  bool InBounds(const Keypoint& kp) const {
    return kp.x >= 0.0 && kp.y >= 0.0 && kp.x < image_width &&
           kp.y < image_height;
  }

  // Throws InvariantViolation when the keypoint and descriptor counts differ,
  // a keypoint is out of bounds or a score is negative.
  void CheckInvariants() const;
};

// Returns a copy with every descriptor scaled to unit L2 norm. Throws
// ZeroDescriptor when any descriptor has norm below 1e-12.
FeatureSet NormalizeDescriptors(const FeatureSet& features);

}  // namespace aerotri
