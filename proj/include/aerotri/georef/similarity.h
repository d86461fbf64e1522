#pragma once

#include <span>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "aerotri/sfm/reconstruction.h"

namespace aerotri {

// x -> scale * R x + translation.
struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d Apply(const Eigen::Vector3d& x) const {
    return scale * (rotation * x) + translation;
  }
  SimilarityTransform Inverse() const;
};

// Closed-form least-squares similarity (cross-covariance SVD with reflection
// guard) minimizing sum |T(source_i) - target_i|^2. Throws
// InsufficientPoints for fewer than 3 pairs, DimensionMismatch for unequal
// sizes and DegenerateConfiguration when the source points are collinear.
SimilarityTransform EstimateSimilarity(std::span<const Eigen::Vector3d> source,
                                       std::span<const Eigen::Vector3d> target);

// Maps points and camera centers through the transform and composes the
// camera rotations so that image geometry is unchanged.
Reconstruction ApplySimilarity(const Reconstruction& recon,
                               const SimilarityTransform& transform);

}  // namespace aerotri
