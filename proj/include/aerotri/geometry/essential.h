#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "aerotri/features/feature_set.h"
#include "aerotri/geometry/camera.h"
#include "aerotri/geometry/ransac.h"
#include "aerotri/matching/matcher.h"

namespace aerotri {

// Satisfies x_b^T E x_a = 0 for normalized coordinates of image A and B.
struct EssentialMatrix {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Zero();
};

// Closest matrix with singular values (1, 1, 0).
Eigen::Matrix3d ProjectToEssentialSpace(const Eigen::Matrix3d& m);

// Hartley-normalized eight-point algorithm on >= 8 normalized
// correspondences. Returns nullopt when the linear system has a null space
// of dimension > 1.
std::optional<Eigen::Matrix3d> EssentialFromCorrespondences(
    std::span<const Eigen::Vector2d> points_a,
    std::span<const Eigen::Vector2d> points_b);

// First-order geometric (Sampson) distance, in normalized units.
double SampsonDistance(const Eigen::Matrix3d& e, const Eigen::Vector2d& xa,
                       const Eigen::Vector2d& xb);

struct EssentialEstimate {
  EssentialMatrix essential;
  std::vector<bool> inlier_mask;
  size_t num_inliers = 0;
  size_t num_iterations = 0;
};

// RANSAC over normalized correspondences. The threshold is in normalized
// units.
EssentialEstimate EstimateEssentialRansac(
    std::span<const Eigen::Vector2d> points_a,
    std::span<const Eigen::Vector2d> points_b, double threshold,
    const RansacConfig& config);

// RANSAC over matched keypoints. config.threshold is in pixels and is divided
// by the mean focal length. Throws InsufficientData for fewer than 8 matches
// and DegenerateConfiguration when every sample is rank-deficient.
EssentialEstimate EstimateEssentialRansac(const std::vector<Match>& matches,
                                          const FeatureSet& features_a,
                                          const FeatureSet& features_b,
                                          const CameraModel& camera,
                                          const RansacConfig& config);

// Relative pose of B with respect to A (A at the origin, unit baseline),
// chosen by chirality among the four decompositions. Throws
// ChiralityAmbiguous unless one candidate strictly maximizes the in-front
// count and places more than half of the points in front of both cameras.
Pose DecomposeEssential(const EssentialMatrix& essential,
                        std::span<const Eigen::Vector2d> points_a,
                        std::span<const Eigen::Vector2d> points_b);

Pose DecomposeEssential(const EssentialMatrix& essential,
                        const std::vector<Match>& inlier_matches,
                        const FeatureSet& features_a,
                        const FeatureSet& features_b,
                        const CameraModel& camera);

// Linear two-view triangulation in normalized coordinates. Returns nullopt
// for points at infinity.
std::optional<Eigen::Vector3d> TriangulateTwoViewLinear(
    const Eigen::Matrix<double, 3, 4>& proj_a,
    const Eigen::Matrix<double, 3, 4>& proj_b, const Eigen::Vector2d& xa,
    const Eigen::Vector2d& xb);

}  // namespace aerotri
