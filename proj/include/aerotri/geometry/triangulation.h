#pragma once

#include <span>

#include <Eigen/Core>

#include "aerotri/features/feature_set.h"
#include "aerotri/geometry/camera.h"

namespace aerotri {

struct TriangulationObservation {
  Pose pose;
  CameraModel camera;
  Keypoint keypoint;
};

// Rays closer than this are treated as parallel.
inline constexpr double kMinTriangulationRayAngleDeg = 0.1;

// Multi-view DLT (homogeneous least squares on undistorted rays, in a
// recentred and rescaled frame), followed by one Gauss-Newton step on the
// pixel reprojection error. Throws DegenerateGeometry for fewer than two
// observations or when no pair of rays is more than 0.1 deg apart, and
// BehindCamera when the result has non-positive depth in any view.
Eigen::Vector3d Triangulate(
    std::span<const TriangulationObservation> observations);

}  // namespace aerotri
