#include "aerotri/geometry/triangulation.h"

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "aerotri/common/error.h"

namespace aerotri {

Eigen::Vector3d Triangulate(
    std::span<const TriangulationObservation> observations) {
  const size_t n = observations.size();
  if (n < 2) {
    throw Error(ErrorCode::kDegenerateGeometry,
                "triangulation needs >= 2 observations");
  }

  std::vector<Eigen::Vector2d> normalized(n);
  std::vector<Eigen::Vector3d> rays(n);
  for (size_t i = 0; i < n; ++i) {
    const TriangulationObservation& obs = observations[i];
    normalized[i] = Undistort(obs.keypoint, obs.camera);
    rays[i] =
        (obs.pose.rotation.conjugate() * normalized[i].homogeneous()).normalized();
  }
  double max_angle = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      max_angle = std::max(
          max_angle, std::atan2(rays[i].cross(rays[j]).norm(), rays[i].dot(rays[j])));
    }
  }
  if (max_angle * 180.0 / std::numbers::pi < kMinTriangulationRayAngleDeg) {
    throw Error(ErrorCode::kDegenerateGeometry,
                "viewing rays are (nearly) parallel");
  }

  // Work relative to the mean camera center, scaled to unit spread, so that
  // georeferenced coordinates do not ruin the conditioning.
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (const auto& obs : observations) origin += obs.pose.center;
  origin /= static_cast<double>(n);
  double scale = 0.0;
  for (const auto& obs : observations) {
    scale = std::max(scale, (obs.pose.center - origin).norm());
  }
  if (scale <= 0.0) {
    scale = 1.0;
  }

  Eigen::MatrixXd a(2 * n, 4);
  for (size_t i = 0; i < n; ++i) {
    const Pose& pose = observations[i].pose;
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = pose.R();
    p.col(3) = pose.R() * (origin - pose.center) / scale;
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) = normalized[i].x() * p.row(2) - p.row(0);
    a.row(r + 1) = normalized[i].y() * p.row(2) - p.row(1);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-14 * h.head<3>().norm()) {
    throw Error(ErrorCode::kDegenerateGeometry, "point at infinity");
  }
  Eigen::Vector3d point = origin + scale * h.head<3>() / h(3);

  // One Gauss-Newton step on the reprojection error.
  Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
  Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
  bool all_in_front = true;
  for (const auto& obs : observations) {
    Eigen::Vector2d pixel;
    ProjectionJacobian jac;
    if (!ProjectCameraPoint(obs.camera, obs.pose.ToCamera(point), &pixel, &jac)) {
      all_in_front = false;
      break;
    }
    const Eigen::Matrix<double, 2, 3> j = jac.wrt_camera_point * obs.pose.R();
    const Eigen::Vector2d residual = pixel - obs.keypoint.Position();
    jtj += j.transpose() * j;
    jtr += j.transpose() * residual;
  }
  if (all_in_front) {
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(jtj);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Eigen::Vector3d step = ldlt.solve(-jtr);
      if (step.allFinite()) {
        point += step;
      }
    }
  }

  for (const auto& obs : observations) {
    if (!(obs.pose.ToCamera(point).z() > 0.0)) {
      throw Error(ErrorCode::kBehindCamera,
                  "triangulated point lies behind an observing camera");
    }
  }
  return point;
}

}  // namespace aerotri
