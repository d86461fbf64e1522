#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "aerotri/features/feature_set.h"

namespace aerotri {

// Pinhole camera with two-term radial distortion applied in normalized
// coordinates: x_d = x (1 + k1 r^2 + k2 r^4).
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;

  static constexpr int kNumParams = 6;

  Eigen::Matrix<double, kNumParams, 1> Params() const {
    Eigen::Matrix<double, kNumParams, 1> p;
    p << fx, fy, cx, cy, k1, k2;
    return p;
  }
  void SetParams(const Eigen::Matrix<double, kNumParams, 1>& p) {
    fx = p(0); fy = p(1); cx = p(2); cy = p(3); k1 = p(4); k2 = p(5);
  }

  double MeanFocal() const { return 0.5 * (fx + fy); }

  // Throws InvariantViolation unless fx, fy > 0 and, when an image size is
  // given, the principal point lies inside it.
  void Validate(double image_width = 0.0, double image_height = 0.0) const;

  Eigen::Vector2d Distort(const Eigen::Vector2d& normalized) const;
  // Newton inversion of Distort, tolerance 1e-12. Throws NoConvergence after
  // 20 iterations.
  Eigen::Vector2d Undistort(const Eigen::Vector2d& distorted) const;

  Eigen::Vector2d NormalizedToPixel(const Eigen::Vector2d& normalized) const {
    const Eigen::Vector2d d = Distort(normalized);
    return {fx * d.x() + cx, fy * d.y() + cy};
  }
  Eigen::Vector2d PixelToNormalized(const Eigen::Vector2d& pixel) const {
    return Undistort({(pixel.x() - cx) / fx, (pixel.y() - cy) / fy});
  }
};

// Camera orientation and position. `rotation` maps world vectors into the
// camera frame; `center` is the camera center in world coordinates, so a
// world point X has camera coordinates R (X - C).
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();

  Eigen::Matrix3d R() const { return rotation.toRotationMatrix(); }
  Eigen::Vector3d Translation() const { return -(rotation * center); }
  Eigen::Vector3d ToCamera(const Eigen::Vector3d& world) const {
    return rotation * (world - center);
  }
  Eigen::Matrix<double, 3, 4> ProjectionMatrix() const;

  // x_cam = R x_world + t.
  static Pose FromRotationTranslation(const Eigen::Matrix3d& r,
                                      const Eigen::Vector3d& t);
};

// Left-multiplicative tangent update: R <- exp([dtheta]x) R, C <- C + dc.
Pose RetractPose(const Pose& pose, const Eigen::Vector3d& dtheta,
                 const Eigen::Vector3d& dcenter);

// Angle of the relative rotation between two orientations, radians.
double RotationDistance(const Eigen::Quaterniond& a,
                        const Eigen::Quaterniond& b);

// Derivatives of a pixel projection.
struct ProjectionJacobian {
  Eigen::Matrix<double, 2, 3> wrt_camera_point;
  Eigen::Matrix<double, 2, CameraModel::kNumParams> wrt_intrinsics;
};

// Projects a camera-frame point. Returns false for non-positive depth, in
// which case the outputs are untouched.
bool ProjectCameraPoint(const CameraModel& camera,
                        const Eigen::Vector3d& camera_point,
                        Eigen::Vector2d* pixel,
                        ProjectionJacobian* jacobian = nullptr);

// Undistorted normalized coordinates of a keypoint.
Eigen::Vector2d Undistort(const Keypoint& keypoint, const CameraModel& camera);

// Euclidean pixel distance between the projection of `point` and `observed`.
// Throws BehindCamera when the point has non-positive depth.
double ReprojectionError(const Eigen::Vector3d& point, const Pose& pose,
                         const CameraModel& camera, const Keypoint& observed);

// Largest angle between viewing rays from `centers` to `point`, degrees.
double MaxTriangulationAngleDeg(const Eigen::Vector3d& point,
                                const std::vector<Eigen::Vector3d>& centers);

Eigen::Matrix3d Skew(const Eigen::Vector3d& v);

}  // namespace aerotri
