#include "aerotri/geometry/camera.h"

#include <cmath>
#include <numbers>

#include "aerotri/common/error.h"

namespace aerotri {

void CameraModel::Validate(double image_width, double image_height) const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::kInvariantViolation, "focal lengths must be > 0");
  }
  if (image_width > 0.0 && image_height > 0.0 &&
      !(cx >= 0.0 && cx <= image_width && cy >= 0.0 && cy <= image_height)) {
    throw Error(ErrorCode::kInvariantViolation,
                "principal point outside the image");
  }
}

Eigen::Vector2d CameraModel::Distort(const Eigen::Vector2d& normalized) const {
  const double r2 = normalized.squaredNorm();
  return normalized * (1.0 + r2 * (k1 + k2 * r2));
}

Eigen::Vector2d CameraModel::Undistort(const Eigen::Vector2d& distorted) const {
  if (k1 == 0.0 && k2 == 0.0) {
    return distorted;
  }
  // Solve rho (1 + k1 rho^2 + k2 rho^4) = rho_d for the undistorted radius.
  const double rho_d = distorted.norm();
  if (rho_d == 0.0) {
    return distorted;
  }
  constexpr int kMaxIterations = 20;
  constexpr double kTolerance = 1e-12;
  double rho = rho_d;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const double rho2 = rho * rho;
    const double f = rho * (1.0 + rho2 * (k1 + k2 * rho2)) - rho_d;
    const double df = 1.0 + rho2 * (3.0 * k1 + 5.0 * k2 * rho2);
    const double step = f / df;
    rho -= step;
    if (!std::isfinite(rho)) {
      break;
    }
    if (std::abs(step) <= kTolerance * std::max(1.0, rho)) {
      return distorted * (rho / rho_d);
    }
  }
  throw Error(ErrorCode::kNoConvergence,
              "radial undistortion did not converge in 20 iterations");
}

Eigen::Matrix<double, 3, 4> Pose::ProjectionMatrix() const {
  Eigen::Matrix<double, 3, 4> p;
  p.leftCols<3>() = R();
  p.col(3) = Translation();
  return p;
}

Pose Pose::FromRotationTranslation(const Eigen::Matrix3d& r,
                                   const Eigen::Vector3d& t) {
  Pose pose;
  pose.rotation = Eigen::Quaterniond(r).normalized();
  pose.center = -(r.transpose() * t);
  return pose;
}

Pose RetractPose(const Pose& pose, const Eigen::Vector3d& dtheta,
                 const Eigen::Vector3d& dcenter) {
  Pose out;
  const double angle = dtheta.norm();
  Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
  if (angle > 0.0) {
    dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, dtheta / angle));
  }
  out.rotation = (dq * pose.rotation).normalized();
  out.center = pose.center + dcenter;
  return out;
}

double RotationDistance(const Eigen::Quaterniond& a,
                        const Eigen::Quaterniond& b) {
  return a.angularDistance(b);
}

bool ProjectCameraPoint(const CameraModel& camera,
                        const Eigen::Vector3d& camera_point,
                        Eigen::Vector2d* pixel,
                        ProjectionJacobian* jacobian) {
  const double z = camera_point.z();
  if (!(z > 0.0)) {
    return false;
  }
  const double inv_z = 1.0 / z;
  const double u = camera_point.x() * inv_z;
  const double v = camera_point.y() * inv_z;
  const double r2 = u * u + v * v;
  const double radial = 1.0 + r2 * (camera.k1 + camera.k2 * r2);
  const double ud = u * radial;
  const double vd = v * radial;
  *pixel = {camera.fx * ud + camera.cx, camera.fy * vd + camera.cy};

  if (jacobian != nullptr) {
    // d(radial)/d(r2)
    const double dradial = camera.k1 + 2.0 * camera.k2 * r2;
    Eigen::Matrix2d d_distorted;
    d_distorted << radial + 2.0 * u * u * dradial, 2.0 * u * v * dradial,
        2.0 * u * v * dradial, radial + 2.0 * v * v * dradial;
    Eigen::Matrix<double, 2, 3> d_normalized;
    d_normalized << inv_z, 0.0, -u * inv_z, 0.0, inv_z, -v * inv_z;
    const Eigen::Matrix2d focal =
        Eigen::Vector2d(camera.fx, camera.fy).asDiagonal();
    jacobian->wrt_camera_point = focal * d_distorted * d_normalized;

    const double r4 = r2 * r2;
    jacobian->wrt_intrinsics << ud, 0.0, 1.0, 0.0, camera.fx * u * r2,
        camera.fx * u * r4, 0.0, vd, 0.0, 1.0, camera.fy * v * r2,
        camera.fy * v * r4;
  }
  return true;
}

Eigen::Vector2d Undistort(const Keypoint& keypoint, const CameraModel& camera) {
  return camera.PixelToNormalized(keypoint.Position());
}

double ReprojectionError(const Eigen::Vector3d& point, const Pose& pose,
                         const CameraModel& camera, const Keypoint& observed) {
  Eigen::Vector2d pixel;
  if (!ProjectCameraPoint(camera, pose.ToCamera(point), &pixel)) {
    throw Error(ErrorCode::kBehindCamera, "point has non-positive depth");
  }
  return (pixel - observed.Position()).norm();
}

double MaxTriangulationAngleDeg(const Eigen::Vector3d& point,
                                const std::vector<Eigen::Vector3d>& centers) {
  double max_angle = 0.0;
  for (size_t i = 0; i < centers.size(); ++i) {
    const Eigen::Vector3d ri = (point - centers[i]).normalized();
    for (size_t j = i + 1; j < centers.size(); ++j) {
      const Eigen::Vector3d rj = (point - centers[j]).normalized();
      const double angle = std::atan2(ri.cross(rj).norm(), ri.dot(rj));
      max_angle = std::max(max_angle, angle);
    }
  }
  return max_angle * 180.0 / std::numbers::pi;
}

Eigen::Matrix3d Skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace aerotri
