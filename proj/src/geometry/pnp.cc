#include "aerotri/geometry/pnp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "aerotri/common/error.h"

namespace aerotri {
namespace {

// Ratio of the smallest to largest principal spread of the world points
// below which the plane-induced homography is tried as well, and below which
// the DLT is skipped entirely.
constexpr double kPlanarFallbackRatio = 0.1;
constexpr double kDltMinSpreadRatio = 1e-4;
constexpr int kMaxRefinements = 3;

struct PrincipalFrame {
  Eigen::Vector3d centroid;
  Eigen::Matrix3d axes;  // Columns sorted by decreasing spread.
  Eigen::Vector3d spread;
};

PrincipalFrame ComputePrincipalFrame(std::span<const Eigen::Vector3d> points) {
  PrincipalFrame frame;
  frame.centroid.setZero();
  for (const auto& p : points) frame.centroid += p;
  frame.centroid /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - frame.centroid;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // Eigenvalues come in increasing order.
  for (int i = 0; i < 3; ++i) {
    frame.axes.col(i) = eig.eigenvectors().col(2 - i);
    frame.spread(i) = std::sqrt(std::max(0.0, eig.eigenvalues()(2 - i)));
  }
  frame.axes.col(2) = frame.axes.col(0).cross(frame.axes.col(1));
  return frame;
}

Eigen::Matrix3d Normalizing2d(std::span<const Eigen::Vector2d> points) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(points.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

std::optional<Pose> PoseFromDlt(std::span<const Eigen::Vector2d> normalized,
                                std::span<const Eigen::Vector3d> points,
                                const PrincipalFrame& frame) {
  const size_t n = points.size();
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - frame.centroid).norm();
  mean_dist /= static_cast<double>(n);
  if (!(mean_dist > 0.0)) {
    return std::nullopt;
  }
  const double k = std::sqrt(3.0) / mean_dist;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 12);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector4d xw = (k * (points[i] - frame.centroid)).homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.block<1, 4>(r, 0) = xw.transpose();
    a.block<1, 4>(r, 8) = -normalized[i].x() * xw.transpose();
    a.block<1, 4>(r + 1, 4) = xw.transpose();
    a.block<1, 4>(r + 1, 8) = -normalized[i].y() * xw.transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> p;
  p.row(0) = v.segment<4>(0).transpose();
  p.row(1) = v.segment<4>(4).transpose();
  p.row(2) = v.segment<4>(8).transpose();
  Eigen::Matrix3d m = p.leftCols<3>();
  if (m.determinant() < 0.0) {
    p = -p;
    m = -m;
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> msvd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    return std::nullopt;
  }
  const Eigen::Matrix3d r = msvd.matrixU() * msvd.matrixV().transpose();
  const Eigen::Vector3d t = p.col(3) / scale;

  size_t in_front = 0;
  for (const auto& x : points) {
    if ((r * (k * (x - frame.centroid)) + t).z() > 0.0) ++in_front;
  }
  if (2 * in_front <= n) {
    return std::nullopt;
  }
  Pose pose;
  pose.rotation = Eigen::Quaterniond(r).normalized();
  pose.center = frame.centroid - r.transpose() * t / k;
  return pose;
}

std::optional<Pose> PoseFromPlane(std::span<const Eigen::Vector2d> normalized,
                                  std::span<const Eigen::Vector3d> points,
                                  const PrincipalFrame& frame) {
  const size_t n = points.size();
  std::vector<Eigen::Vector2d> plane(n);
  for (size_t i = 0; i < n; ++i) {
    plane[i] = (frame.axes.transpose() * (points[i] - frame.centroid)).head<2>();
  }
  const Eigen::Matrix3d tp = Normalizing2d(plane);
  const Eigen::Matrix3d ti = Normalizing2d(normalized);

  Eigen::MatrixXd a(static_cast<Eigen::Index>(2 * n), 9);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d u = tp * plane[i].homogeneous();
    const Eigen::Vector3d x = ti * normalized[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << u.transpose(), 0, 0, 0, -x.x() * u.transpose();
    a.row(r + 1) << 0, 0, 0, u.transpose(), -x.y() * u.transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  Eigen::Matrix3d h = ti.inverse() * hn * tp;

  const double norm = 0.5 * (h.col(0).norm() + h.col(1).norm());
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    return std::nullopt;
  }
  h /= norm;
  double depth_sum = 0.0;
  for (const auto& u : plane) depth_sum += (h * u.homogeneous()).z();
  if (depth_sum < 0.0) {
    h = -h;
  }

  Eigen::Matrix3d basis;
  basis << h.col(0), h.col(1), h.col(0).cross(h.col(1));
  const Eigen::JacobiSVD<Eigen::Matrix3d> bsvd(
      basis, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r_plane = bsvd.matrixU() * bsvd.matrixV().transpose();
  if (r_plane.determinant() < 0.0) {
    return std::nullopt;
  }
  const Eigen::Matrix3d r = r_plane * frame.axes.transpose();
  const Eigen::Vector3d t = h.col(2);

  Pose pose;
  pose.rotation = Eigen::Quaterniond(r).normalized();
  pose.center = frame.centroid - r.transpose() * t;
  size_t in_front = 0;
  for (const auto& x : points) {
    if (pose.ToCamera(x).z() > 0.0) ++in_front;
  }
  if (2 * in_front <= n) {
    return std::nullopt;
  }
  return pose;
}

double PixelError(const Pose& pose, const CameraModel& camera,
                  const Eigen::Vector3d& point, const Eigen::Vector2d& pixel) {
  Eigen::Vector2d projected;
  if (!ProjectCameraPoint(camera, pose.ToCamera(point), &projected)) {
    return std::numeric_limits<double>::infinity();
  }
  return (projected - pixel).norm();
}

struct Support {
  size_t num_inliers = 0;
  double sum_squared_error = std::numeric_limits<double>::infinity();

  bool BetterThan(const Support& other) const {
    return num_inliers > other.num_inliers ||
           (num_inliers == other.num_inliers &&
            sum_squared_error < other.sum_squared_error);
  }
};

Support Evaluate(const Pose& pose, std::span<const Eigen::Vector2d> pixels,
                 std::span<const Eigen::Vector3d> points,
                 const CameraModel& camera, double threshold,
                 std::vector<bool>* mask) {
  Support support;
  support.sum_squared_error = 0.0;
  if (mask != nullptr) mask->assign(points.size(), false);
  for (size_t i = 0; i < points.size(); ++i) {
    const double err = PixelError(pose, camera, points[i], pixels[i]);
    if (err < threshold) {
      ++support.num_inliers;
      support.sum_squared_error += err * err;
      if (mask != nullptr) (*mask)[i] = true;
    }
  }
  return support;
}

}  // namespace

std::vector<Pose> AbsolutePoseFromCorrespondences(
    std::span<const Eigen::Vector2d> normalized,
    std::span<const Eigen::Vector3d> points) {
  if (normalized.size() != points.size() ||
      points.size() < kMinPnPCorrespondences) {
    return {};
  }
  const PrincipalFrame frame = ComputePrincipalFrame(points);
  if (!(frame.spread(1) > 0.0)) {
    return {};
  }
  const double ratio = frame.spread(2) / frame.spread(0);
  std::vector<Pose> poses;
  if (ratio > kDltMinSpreadRatio) {
    if (auto pose = PoseFromDlt(normalized, points, frame)) {
      poses.push_back(*pose);
    }
  }
  if (ratio < kPlanarFallbackRatio) {
    if (auto pose = PoseFromPlane(normalized, points, frame)) {
      poses.push_back(*pose);
    }
  }
  return poses;
}

Pose RefineAbsolutePose(const Pose& initial,
                        std::span<const Eigen::Vector2d> pixels,
                        std::span<const Eigen::Vector3d> points,
                        const CameraModel& camera,
                        const std::vector<bool>& mask) {
  using Matrix6d = Eigen::Matrix<double, 6, 6>;
  using Vector6d = Eigen::Matrix<double, 6, 1>;
  constexpr int kMaxIterations = 50;

  const auto used = [&](size_t i) { return mask.empty() || mask[i]; };
  const auto cost_of = [&](const Pose& pose) {
    double cost = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
      if (!used(i)) continue;
      const double err = PixelError(pose, camera, points[i], pixels[i]);
      cost += err * err;
    }
    return cost;
  };

  Pose pose = initial;
  double cost = cost_of(pose);
  if (!std::isfinite(cost)) {
    return pose;
  }
  double lambda = 1e-4;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    Matrix6d jtj = Matrix6d::Zero();
    Vector6d jtr = Vector6d::Zero();
    const Eigen::Matrix3d r = pose.R();
    for (size_t i = 0; i < points.size(); ++i) {
      if (!used(i)) continue;
      const Eigen::Vector3d xc = pose.ToCamera(points[i]);
      Eigen::Vector2d projected;
      ProjectionJacobian jac;
      ProjectCameraPoint(camera, xc, &projected, &jac);
      Eigen::Matrix<double, 2, 6> j;
      j.leftCols<3>() = -jac.wrt_camera_point * Skew(xc);
      j.rightCols<3>() = -jac.wrt_camera_point * r;
      const Eigen::Vector2d res = projected - pixels[i];
      jtj += j.transpose() * j;
      jtr += j.transpose() * res;
    }
    if (jtr.lpNorm<Eigen::Infinity>() < 1e-14) {
      break;
    }
    bool accepted = false;
    while (!accepted && lambda < 1e12) {
      Matrix6d damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vector6d step = damped.ldlt().solve(-jtr);
      const Pose candidate =
          RetractPose(pose, step.head<3>(), step.tail<3>());
      const double candidate_cost = cost_of(candidate);
      if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
        const double decrease = cost - candidate_cost;
        pose = candidate;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (decrease <= 1e-14 * std::max(cost, 1e-30) ||
            step.norm() < 1e-14 * (1.0 + pose.center.norm())) {
          return pose;
        }
        cost = candidate_cost;
      } else {
        lambda *= 2.0;
      }
    }
    if (!accepted) {
      break;
    }
  }
  return pose;
}

AbsolutePoseEstimate EstimateAbsolutePose(
    std::span<const Eigen::Vector2d> pixels,
    std::span<const Eigen::Vector3d> points, const CameraModel& camera,
    const RansacConfig& config) {
  config.Validate();
  if (pixels.size() != points.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "pixel and world point counts differ");
  }
  const size_t n = points.size();
  if (n < kMinPnPCorrespondences) {
    throw Error(ErrorCode::kInsufficientData,
                "absolute pose needs >= 6 correspondences, got " +
                    std::to_string(n));
  }
  std::vector<Eigen::Vector2d> normalized(n);
  for (size_t i = 0; i < n; ++i) {
    normalized[i] = camera.PixelToNormalized(pixels[i]);
  }

  RandomSampler sampler(config.seed, n);
  AbsolutePoseEstimate result;
  Support best;
  best.num_inliers = 0;
  bool have_model = false;
  size_t required = config.max_iterations;
  std::vector<Eigen::Vector2d> sample_x(kMinPnPCorrespondences);
  std::vector<Eigen::Vector3d> sample_p(kMinPnPCorrespondences);

  size_t iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    if (iter >= config.min_iterations && iter >= required) {
      break;
    }
    const std::vector<size_t> idx = sampler.Sample(kMinPnPCorrespondences);
    for (size_t k = 0; k < idx.size(); ++k) {
      sample_x[k] = normalized[idx[k]];
      sample_p[k] = points[idx[k]];
    }
    for (const Pose& pose : AbsolutePoseFromCorrespondences(sample_x, sample_p)) {
      const Support support =
          Evaluate(pose, pixels, points, camera, config.threshold, nullptr);
      if (!have_model || support.BetterThan(best)) {
        have_model = true;
        best = support;
        result.pose = pose;
        required = RequiredRansacIterations(best.num_inliers, n,
                                            kMinPnPCorrespondences,
                                            config.confidence);
      }
    }
  }
  result.num_iterations = iter;
  if (!have_model || best.num_inliers < kMinPnPCorrespondences) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "no absolute pose hypothesis with >= 6 inliers");
  }

  best = Evaluate(result.pose, pixels, points, camera, config.threshold,
                  &result.inlier_mask);
  for (int round = 0; round < kMaxRefinements; ++round) {
    const Pose refined = RefineAbsolutePose(result.pose, pixels, points,
                                            camera, result.inlier_mask);
    std::vector<bool> mask;
    const Support support =
        Evaluate(refined, pixels, points, camera, config.threshold, &mask);
    if (support.num_inliers < best.num_inliers) {
      break;
    }
    const bool same_set = mask == result.inlier_mask;
    result.pose = refined;
    result.inlier_mask = std::move(mask);
    best = support;
    if (same_set) {
      break;
    }
  }
  result.num_inliers = best.num_inliers;
  return result;
}

}  // namespace aerotri
