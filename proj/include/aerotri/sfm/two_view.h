#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "aerotri/features/feature_set.h"
#include "aerotri/geometry/camera.h"
#include "aerotri/geometry/ransac.h"
#include "aerotri/matching/matcher.h"

namespace aerotri {

struct TwoViewPoint {
  Match match;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector2d pixel_a = Eigen::Vector2d::Zero();
  Eigen::Vector2d pixel_b = Eigen::Vector2d::Zero();
};

// Relative orientation of an image pair: A at the origin with identity
// rotation, B at unit distance.
struct TwoViewGeometry {
  CameraModel camera;
  Pose pose_a;
  Pose pose_b;
  std::vector<Match> inliers;
  std::vector<TwoViewPoint> points;
  double median_angle_deg = 0.0;
};

struct TwoViewOptions {
  RansacConfig ransac;
  // Two-view bundle adjustment of B's pose and the points.
  bool refine = true;
};

// Essential matrix RANSAC, decomposition and triangulation of every inlier.
// Inliers that cannot be triangulated are left out of `points`. Propagates
// the essential-matrix errors.
TwoViewGeometry EstimateRelativeOrientation(const FeatureSet& a,
                                            const FeatureSet& b,
                                            const std::vector<Match>& matches,
                                            const CameraModel& camera,
                                            const TwoViewOptions& options = {});

}  // namespace aerotri
