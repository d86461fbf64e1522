#include "aerotri/features/feature_set.h"

#include <cmath>

#include "aerotri/common/error.h"

namespace aerotri {

void FeatureSet::CheckInvariants() const {
  if (static_cast<size_t>(descriptors.rows()) != keypoints.size()) {
    throw Error(ErrorCode::kInvariantViolation,
                image_id + ": keypoint and descriptor counts differ");
  }
  for (size_t i = 0; i < keypoints.size(); ++i) {
    const Keypoint& kp = keypoints[i];
    if (!InBounds(kp)) {
      throw Error(ErrorCode::kInvariantViolation,
                  image_id + ": keypoint " + std::to_string(i) +
                      " outside the image");
    }
    if (!(kp.score >= 0.0) || !std::isfinite(kp.score)) {
      throw Error(ErrorCode::kInvariantViolation,
                  image_id + ": keypoint " + std::to_string(i) +
                      " has a negative score");
    }
  }
}

FeatureSet NormalizeDescriptors(const FeatureSet& features) {
  FeatureSet out = features;
  for (Eigen::Index i = 0; i < out.descriptors.rows(); ++i) {
    const double norm = out.descriptors.row(i).norm();
    if (!(norm >= 1e-12)) {
      throw Error(ErrorCode::kZeroDescriptor,
                  features.image_id + ": descriptor " + std::to_string(i) +
                      " has zero norm");
    }
    out.descriptors.row(i) /= norm;
  }
  return out;
}

}  // namespace aerotri
