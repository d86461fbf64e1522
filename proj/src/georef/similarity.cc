#include "aerotri/georef/similarity.h"

#include <Eigen/SVD>

#include "aerotri/common/error.h"

namespace aerotri {
namespace {

constexpr double kCollinearityRatio = 1e-9;

}  // namespace

SimilarityTransform SimilarityTransform::Inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.conjugate();
  inv.translation = -(inv.scale * (inv.rotation * translation));
  return inv;
}

SimilarityTransform EstimateSimilarity(std::span<const Eigen::Vector3d> source,
                                       std::span<const Eigen::Vector3d> target) {
  if (source.size() != target.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "source and target point counts differ");
  }
  if (source.size() < 3) {
    throw Error(ErrorCode::kInsufficientPoints,
                "similarity needs >= 3 point pairs, got " +
                    std::to_string(source.size()));
  }
  const auto n = static_cast<double>(source.size());
  Eigen::Vector3d mean_s = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_t = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < source.size(); ++i) {
    mean_s += source[i];
    mean_t += target[i];
  }
  mean_s /= n;
  mean_t /= n;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d cov_s = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (size_t i = 0; i < source.size(); ++i) {
    const Eigen::Vector3d ds = source[i] - mean_s;
    const Eigen::Vector3d dt = target[i] - mean_t;
    cross += dt * ds.transpose();
    cov_s += ds * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cross /= n;
  cov_s /= n;
  var_s /= n;

  const Eigen::JacobiSVD<Eigen::Matrix3d> spread(cov_s);
  const Eigen::Vector3d sv = spread.singularValues();
  if (!(sv(1) > kCollinearityRatio * sv(0))) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "source points are collinear or coincident");
  }

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d signs = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
    signs(2) = -1.0;
  }
  const Eigen::Matrix3d r =
      svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();

  SimilarityTransform t;
  t.scale = svd.singularValues().dot(signs) / var_s;
  t.rotation = Eigen::Quaterniond(r).normalized();
  t.translation = mean_t - t.scale * (r * mean_s);
  return t;
}

Reconstruction ApplySimilarity(const Reconstruction& recon,
                               const SimilarityTransform& transform) {
  Reconstruction out = recon;
  for (auto& [image, pose] : out.poses) {
    pose.center = transform.Apply(pose.center);
    pose.rotation = (pose.rotation * transform.rotation.conjugate()).normalized();
  }
  for (auto& [id, point] : out.points) {
    point.position = transform.Apply(point.position);
  }
  return out;
}

}  // namespace aerotri
