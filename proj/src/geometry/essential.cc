#include "aerotri/geometry/essential.h"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "aerotri/common/error.h"

namespace aerotri {
namespace {

constexpr size_t kSampleSize = 8;
constexpr int kMaxRefinements = 3;

// Similarity that moves the centroid to the origin and the RMS distance to
// sqrt(2).
Eigen::Matrix3d NormalizingTransform(std::span<const Eigen::Vector2d> points) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double rms = 0.0;
  for (const auto& p : points) rms += (p - centroid).squaredNorm();
  rms = std::sqrt(rms / static_cast<double>(points.size()));
  const double s = rms > 0.0 ? std::sqrt(2.0) / rms : 1.0;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return t;
}

std::vector<bool> ComputeInliers(const Eigen::Matrix3d& e,
                                 std::span<const Eigen::Vector2d> points_a,
                                 std::span<const Eigen::Vector2d> points_b,
                                 double threshold, size_t* count,
                                 double* residual_sum) {
  std::vector<bool> mask(points_a.size(), false);
  *count = 0;
  *residual_sum = 0.0;
  for (size_t i = 0; i < points_a.size(); ++i) {
    const double d = SampsonDistance(e, points_a[i], points_b[i]);
    if (d <= threshold) {
      mask[i] = true;
      ++*count;
      *residual_sum += d;
    }
  }
  return mask;
}

template <typename T>
std::vector<T> Gather(std::span<const T> values, const std::vector<bool>& mask) {
  std::vector<T> out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (mask[i]) out.push_back(values[i]);
  }
  return out;
}

void NormalizedMatchCoordinates(const std::vector<Match>& matches,
                                const FeatureSet& features_a,
                                const FeatureSet& features_b,
                                const CameraModel& camera,
                                std::vector<Eigen::Vector2d>* points_a,
                                std::vector<Eigen::Vector2d>* points_b) {
  points_a->clear();
  points_b->clear();
  points_a->reserve(matches.size());
  points_b->reserve(matches.size());
  for (const Match& m : matches) {
    if (m.index_a < 0 || m.index_b < 0 ||
        static_cast<size_t>(m.index_a) >= features_a.NumFeatures() ||
        static_cast<size_t>(m.index_b) >= features_b.NumFeatures()) {
      throw Error(ErrorCode::kInvariantViolation,
                  "match index outside the feature set");
    }
    points_a->push_back(
        Undistort(features_a.keypoints[static_cast<size_t>(m.index_a)], camera));
    points_b->push_back(
        Undistort(features_b.keypoints[static_cast<size_t>(m.index_b)], camera));
  }
}

}  // namespace

Eigen::Matrix3d ProjectToEssentialSpace(const Eigen::Matrix3d& m) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * Eigen::Vector3d(1.0, 1.0, 0.0).asDiagonal() *
         svd.matrixV().transpose();
}

std::optional<Eigen::Matrix3d> EssentialFromCorrespondences(
    std::span<const Eigen::Vector2d> points_a,
    std::span<const Eigen::Vector2d> points_b) {
  const size_t n = points_a.size();
  if (n < kSampleSize || points_b.size() != n) {
    return std::nullopt;
  }
  const Eigen::Matrix3d ta = NormalizingTransform(points_a);
  const Eigen::Matrix3d tb = NormalizingTransform(points_b);

  Eigen::Matrix<double, Eigen::Dynamic, 9> a(static_cast<Eigen::Index>(n), 9);
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d xa = ta * points_a[i].homogeneous();
    const Eigen::Vector3d xb = tb * points_b[i].homogeneous();
    const auto row = static_cast<Eigen::Index>(i);
    a.row(row) << xb.x() * xa.x(), xb.x() * xa.y(), xb.x(), xb.y() * xa.x(),
        xb.y() * xa.y(), xb.y(), xa.x(), xa.y(), 1.0;
  }

  // Reduce to the 9x9 triangular factor, which has the same singular values
  // and right singular vectors as the design matrix without squaring its
  // condition number.
  Eigen::Matrix<double, 9, 9> r = Eigen::Matrix<double, 9, 9>::Zero();
  if (n > 9) {
    const Eigen::HouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 9>> qr(a);
    r = qr.matrixQR().topRows<9>().triangularView<Eigen::Upper>();
  } else {
    r.topRows(static_cast<Eigen::Index>(n)) = a;
  }
  const Eigen::JacobiSVD<Eigen::Matrix<double, 9, 9>> svd(r, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> sv = svd.singularValues();
  // Null space of dimension > 1 means the sample does not pin down E.
  if (!(sv(7) > 1e-9 * sv(0))) {
    return std::nullopt;
  }
  const Eigen::Matrix<double, 9, 1> e_vec = svd.matrixV().col(8);
  Eigen::Matrix3d e_norm;
  e_norm << e_vec(0), e_vec(1), e_vec(2), e_vec(3), e_vec(4), e_vec(5),
      e_vec(6), e_vec(7), e_vec(8);
  // Only the rank can be enforced in the conditioned frame; equal singular
  // values hold after undoing the normalization.
  const Eigen::JacobiSVD<Eigen::Matrix3d> rank_svd(
      e_norm, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = rank_svd.singularValues();
  s(2) = 0.0;
  e_norm = rank_svd.matrixU() * s.asDiagonal() * rank_svd.matrixV().transpose();
  Eigen::Matrix3d e = tb.transpose() * e_norm * ta;
  e = ProjectToEssentialSpace(e);
  if (!e.allFinite()) {
    return std::nullopt;
  }
  return e;
}

double SampsonDistance(const Eigen::Matrix3d& e, const Eigen::Vector2d& xa,
                       const Eigen::Vector2d& xb) {
  const Eigen::Vector3d ha = xa.homogeneous();
  const Eigen::Vector3d hb = xb.homogeneous();
  const Eigen::Vector3d e_xa = e * ha;
  const Eigen::Vector3d et_xb = e.transpose() * hb;
  const double num = hb.dot(e_xa);
  const double den = e_xa.x() * e_xa.x() + e_xa.y() * e_xa.y() +
                     et_xb.x() * et_xb.x() + et_xb.y() * et_xb.y();
  if (den <= 0.0) {
    return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::abs(num) / std::sqrt(den);
}

EssentialEstimate EstimateEssentialRansac(
    std::span<const Eigen::Vector2d> points_a,
    std::span<const Eigen::Vector2d> points_b, double threshold,
    const RansacConfig& config) {
  config.Validate();
  const size_t n = points_a.size();
  if (n < kSampleSize || points_b.size() != n) {
    throw Error(ErrorCode::kInsufficientData,
                "essential estimation needs >= 8 correspondences, got " +
                    std::to_string(n));
  }

  RandomSampler sampler(config.seed, n);
  EssentialEstimate best;
  double best_residual = std::numeric_limits<double>::infinity();
  bool have_model = false;
  size_t needed = config.max_iterations;
  std::array<Eigen::Vector2d, kSampleSize> sample_a;
  std::array<Eigen::Vector2d, kSampleSize> sample_b;

  size_t iter = 0;
  for (; iter < config.max_iterations; ++iter) {
    if (iter >= std::max(config.min_iterations, needed)) {
      break;
    }
    const std::vector<size_t> idx = sampler.Sample(kSampleSize);
    for (size_t k = 0; k < kSampleSize; ++k) {
      sample_a[k] = points_a[idx[k]];
      sample_b[k] = points_b[idx[k]];
    }
    const std::optional<Eigen::Matrix3d> e =
        EssentialFromCorrespondences(sample_a, sample_b);
    if (!e) {
      continue;
    }
    size_t count = 0;
    double residual = 0.0;
    std::vector<bool> mask =
        ComputeInliers(*e, points_a, points_b, threshold, &count, &residual);
    if (!have_model || count > best.num_inliers ||
        (count == best.num_inliers && residual < best_residual)) {
      have_model = true;
      best.essential.matrix = *e;
      best.inlier_mask = std::move(mask);
      best.num_inliers = count;
      best_residual = residual;
      needed = RequiredRansacIterations(count, n, kSampleSize,
                                        config.confidence);
    }
  }
  if (!have_model) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "every essential-matrix sample was rank-deficient");
  }
  best.num_iterations = iter;

  // Refit on the consensus set; keep the refit only if it does not lose
  // support.
  for (int r = 0; r < kMaxRefinements && best.num_inliers >= kSampleSize; ++r) {
    const std::vector<Eigen::Vector2d> in_a = Gather(points_a, best.inlier_mask);
    const std::vector<Eigen::Vector2d> in_b = Gather(points_b, best.inlier_mask);
    const std::optional<Eigen::Matrix3d> e =
        EssentialFromCorrespondences(in_a, in_b);
    if (!e) {
      break;
    }
    size_t count = 0;
    double residual = 0.0;
    std::vector<bool> mask =
        ComputeInliers(*e, points_a, points_b, threshold, &count, &residual);
    if (count < best.num_inliers ||
        (count == best.num_inliers && residual >= best_residual)) {
      break;
    }
    best.essential.matrix = *e;
    best.inlier_mask = std::move(mask);
    best.num_inliers = count;
    best_residual = residual;
  }
  return best;
}

EssentialEstimate EstimateEssentialRansac(const std::vector<Match>& matches,
                                          const FeatureSet& features_a,
                                          const FeatureSet& features_b,
                                          const CameraModel& camera,
                                          const RansacConfig& config) {
  if (matches.size() < kSampleSize) {
    throw Error(ErrorCode::kInsufficientData,
                "essential estimation needs >= 8 matches, got " +
                    std::to_string(matches.size()));
  }
  std::vector<Eigen::Vector2d> points_a;
  std::vector<Eigen::Vector2d> points_b;
  NormalizedMatchCoordinates(matches, features_a, features_b, camera,
                             &points_a, &points_b);
  return EstimateEssentialRansac(points_a, points_b,
                                 config.threshold / camera.MeanFocal(), config);
}

std::optional<Eigen::Vector3d> TriangulateTwoViewLinear(
    const Eigen::Matrix<double, 3, 4>& proj_a,
    const Eigen::Matrix<double, 3, 4>& proj_b, const Eigen::Vector2d& xa,
    const Eigen::Vector2d& xb) {
  Eigen::Matrix4d a;
  a.row(0) = xa.x() * proj_a.row(2) - proj_a.row(0);
  a.row(1) = xa.y() * proj_a.row(2) - proj_a.row(1);
  a.row(2) = xb.x() * proj_b.row(2) - proj_b.row(0);
  a.row(3) = xb.y() * proj_b.row(2) - proj_b.row(1);
  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x(3)) < 1e-14 * x.head<3>().norm()) {
    return std::nullopt;
  }
  return Eigen::Vector3d(x.head<3>() / x(3));
}

Pose DecomposeEssential(const EssentialMatrix& essential,
                        std::span<const Eigen::Vector2d> points_a,
                        std::span<const Eigen::Vector2d> points_b) {
  if (points_a.empty() || points_a.size() != points_b.size()) {
    throw Error(ErrorCode::kInsufficientData,
                "essential decomposition needs >= 1 correspondence");
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      essential.matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;

  const std::array<Eigen::Matrix3d, 2> rotations = {
      u * w * v.transpose(), u * w.transpose() * v.transpose()};
  const Eigen::Vector3d t = u.col(2).normalized();

  Eigen::Matrix<double, 3, 4> proj_a = Eigen::Matrix<double, 3, 4>::Zero();
  proj_a.leftCols<3>().setIdentity();

  std::array<size_t, 4> counts{};
  std::array<Pose, 4> candidates;
  for (int c = 0; c < 4; ++c) {
    const Eigen::Matrix3d& r = rotations[static_cast<size_t>(c / 2)];
    const Eigen::Vector3d tc = (c % 2 == 0) ? t : Eigen::Vector3d(-t);
    Eigen::Matrix<double, 3, 4> proj_b;
    proj_b.leftCols<3>() = r;
    proj_b.col(3) = tc;
    candidates[static_cast<size_t>(c)] = Pose::FromRotationTranslation(r, tc);
    for (size_t i = 0; i < points_a.size(); ++i) {
      const std::optional<Eigen::Vector3d> x =
          TriangulateTwoViewLinear(proj_a, proj_b, points_a[i], points_b[i]);
      if (x && x->z() > 0.0 && (r * *x + tc).z() > 0.0) {
        ++counts[static_cast<size_t>(c)];
      }
    }
  }

  const auto best_it = std::max_element(counts.begin(), counts.end());
  const size_t best = static_cast<size_t>(best_it - counts.begin());
  const size_t ties = static_cast<size_t>(
      std::count(counts.begin(), counts.end(), *best_it));
  if (ties > 1 || 2 * counts[best] <= points_a.size()) {
    throw Error(ErrorCode::kChiralityAmbiguous,
                "no decomposition places a strict majority of points in "
                "front of both cameras");
  }
  return candidates[best];
}

Pose DecomposeEssential(const EssentialMatrix& essential,
                        const std::vector<Match>& inlier_matches,
                        const FeatureSet& features_a,
                        const FeatureSet& features_b,
                        const CameraModel& camera) {
  std::vector<Eigen::Vector2d> points_a;
  std::vector<Eigen::Vector2d> points_b;
  NormalizedMatchCoordinates(inlier_matches, features_a, features_b, camera,
                             &points_a, &points_b);
  return DecomposeEssential(essential, points_a, points_b);
}

}  // namespace aerotri
