#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "aerotri/geometry/camera.h"
#include "aerotri/geometry/ransac.h"

namespace aerotri {

struct AbsolutePoseEstimate {
  Pose pose;
  std::vector<bool> inlier_mask;
  size_t num_inliers = 0;
  size_t num_iterations = 0;
};

inline constexpr size_t kMinPnPCorrespondences = 6;

// Pose hypotheses from a set of >= 6 correspondences between undistorted
// normalized image coordinates and world points. Uses the linear DLT and,
// when the world points are close to a plane, a plane-induced homography.
// Returns an empty vector when neither applies.
std::vector<Pose> AbsolutePoseFromCorrespondences(
    std::span<const Eigen::Vector2d> normalized,
    std::span<const Eigen::Vector3d> points);

// Levenberg-Marquardt on the pixel reprojection error of the masked
// correspondences. An empty mask uses all of them.
Pose RefineAbsolutePose(const Pose& initial,
                        std::span<const Eigen::Vector2d> pixels,
                        std::span<const Eigen::Vector3d> points,
                        const CameraModel& camera,
                        const std::vector<bool>& mask = {});

// RANSAC over pixel/world correspondences with the reprojection error
// threshold config.threshold (pixels), followed by refinement on the inliers.
// Throws InsufficientData for fewer than 6 correspondences and
// DegenerateConfiguration when no sample yields a pose with >= 6 inliers.
AbsolutePoseEstimate EstimateAbsolutePose(
    std::span<const Eigen::Vector2d> pixels,
    std::span<const Eigen::Vector3d> points, const CameraModel& camera,
    const RansacConfig& config);

}  // namespace aerotri
