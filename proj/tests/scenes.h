#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "aerotri/ba/bundle_adjustment.h"
#include "aerotri/features/feature_set.h"
#include "aerotri/geometry/camera.h"
#include "aerotri/geometry/essential.h"
#include "aerotri/matching/matcher.h"
#include "test_support.h"

// Scene builders and independent oracles shared by the unit tests and the
// acceptance runner.
namespace aerotri::testing {

// Exhaustive matcher written from the definitions: plain per-pair distances,
// ratio test A->B with ties rejected, then either the mutual check or the
// closest-claimant rule for B keypoints.
inline std::vector<Match> BruteForceMatch(const FeatureSet& a,
                                          const FeatureSet& b, double ratio,
                                          bool cross_check) {
  const int na = static_cast<int>(a.NumFeatures());
  const int nb = static_cast<int>(b.NumFeatures());
  std::vector<std::vector<double>> dist(na, std::vector<double>(nb));
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.DescriptorDim(); ++k) {
        const double d = a.descriptors(i, k) - b.descriptors(j, k);
        s += d * d;
      }
      dist[i][j] = std::sqrt(s);
    }
  }
  struct Candidate {
    int j = -1;
    double d1 = 0.0;
    double d2 = 0.0;
    bool tie = false;
  };
  std::vector<Candidate> nearest(na);
  for (int i = 0; i < na; ++i) {
    std::vector<int> order(nb);
    for (int j = 0; j < nb; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return dist[i][x] < dist[i][y]; });
    nearest[i] = {order[0], dist[i][order[0]], dist[i][order[1]],
                  dist[i][order[0]] == dist[i][order[1]]};
  }
  std::vector<Match> out;
  for (int i = 0; i < na; ++i) {
    const Candidate& c = nearest[i];
    if (c.tie || !(c.d1 < ratio * c.d2)) continue;
    bool keep = true;
    if (cross_check) {
      for (int other = 0; other < na; ++other) {
        if (other != i && dist[other][c.j] <= dist[i][c.j]) keep = false;
      }
    } else {
      for (int other = 0; other < na; ++other) {
        if (other != i && nearest[other].j == c.j &&
            nearest[other].d1 <= c.d1) {
          keep = false;
        }
      }
    }
    if (keep) out.push_back({i, c.j, c.d1});
  }
  return out;
}

// B holds a noisy, shuffled copy of part of A plus distractors.
inline std::pair<FeatureSet, FeatureSet> CorrelatedSets(std::mt19937_64& rng,
                                                        int n, int dim,
                                                        double noise) {
  const DescriptorMatrix da = RandomDescriptors(rng, n, dim);
  DescriptorMatrix db = RandomDescriptors(rng, n, dim);
  std::normal_distribution<double> normal(0.0, noise);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  for (int i = 0; i < n * 2 / 3; ++i) {
    for (int k = 0; k < dim; ++k) db(perm[i], k) = da(i, k) + normal(rng);
    db.row(perm[i]).normalize();
  }
  return {MakeFeatureSet("a", da), MakeFeatureSet("b", db)};
}

inline bool SameMatches(const std::vector<Match>& x,
                        const std::vector<Match>& y) {
  if (x.size() != y.size()) return false;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i].index_a != y[i].index_a || x[i].index_b != y[i].index_b ||
        std::abs(x[i].distance - y[i].distance) > 1e-12) {
      return false;
    }
  }
  return true;
}

inline double AngleBetween(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

// Two overlapping nadir views 30 m apart over rough ground, with matches
// i <-> i for every point seen by both.
struct PairScene {
  CameraModel camera;
  Pose pose_a;
  Pose pose_b;
  std::vector<Eigen::Vector3d> points;
  FeatureSet features_a;
  FeatureSet features_b;
  std::vector<Match> matches;
};

inline PairScene MakePairScene(std::mt19937_64& rng, size_t num_points,
                               const CameraModel& camera = TestCamera()) {
  PairScene scene;
  scene.camera = camera;
  scene.pose_a = NadirPose({0.0, 0.0, 100.0}, rng, 0.05);
  scene.pose_b = NadirPose({30.0, 4.0, 101.0}, rng, 0.05);
  std::uniform_real_distribution<double> ux(-15.0, 45.0);
  std::uniform_real_distribution<double> uy(-25.0, 25.0);
  std::uniform_real_distribution<double> uz(-10.0, 10.0);
  for (FeatureSet* fs : {&scene.features_a, &scene.features_b}) {
    fs->image_width = 1000;
    fs->image_height = 750;
  }
  while (scene.points.size() < num_points) {
    const Eigen::Vector3d x(ux(rng), uy(rng), uz(rng));
    const Keypoint ka = ProjectKeypoint(camera, scene.pose_a, x);
    const Keypoint kb = ProjectKeypoint(camera, scene.pose_b, x);
    if (!scene.features_a.InBounds(ka) || !scene.features_b.InBounds(kb)) continue;
    const int index = static_cast<int>(scene.points.size());
    scene.points.push_back(x);
    scene.features_a.keypoints.push_back(ka);
    scene.features_b.keypoints.push_back(kb);
    scene.matches.push_back({index, index, 0.0});
  }
  const auto n = static_cast<Eigen::Index>(num_points);
  scene.features_a.descriptors = DescriptorMatrix::Ones(n, 1);
  scene.features_b.descriptors = DescriptorMatrix::Ones(n, 1);
  return scene;
}

// Relative pose of B with respect to A: x_b = R x_a + t.
inline std::pair<Eigen::Matrix3d, Eigen::Vector3d> RelativeMotion(
    const Pose& a, const Pose& b) {
  const Eigen::Matrix3d r = b.R() * a.R().transpose();
  const Eigen::Vector3d t = b.R() * (a.center - b.center);
  return {r, t};
}

// Normalized correspondences of points seen under relative motion (r, t).
inline void ProjectUnderMotion(const Eigen::Matrix3d& r,
                               const Eigen::Vector3d& t,
                               const std::vector<Eigen::Vector3d>& points,
                               std::vector<Eigen::Vector2d>* xa,
                               std::vector<Eigen::Vector2d>* xb) {
  for (const Eigen::Vector3d& x : points) {
    xa->push_back(x.hnormalized());
    xb->push_back((r * x + t).hnormalized());
  }
}

struct BASceneOptions {
  size_t num_cameras = 4;
  size_t num_points = 40;
  double pixel_noise = 0.0;
  double outlier_fraction = 0.0;
  bool distortion = true;
};

// A strip of nadir cameras over rough ground. Every point is observed by
// every camera that sees it; points seen fewer than twice are dropped.
// Camera 0 is held fixed and camera 1 keeps its along-track center
// coordinate, which fixes the seven-parameter datum.
inline BAProblem MakeBAScene(std::mt19937_64& rng, const BASceneOptions& opts) {
  BAProblem problem;
  problem.intrinsics = TestCamera();
  if (opts.distortion) {
    problem.intrinsics.k1 = -0.04;
    problem.intrinsics.k2 = 0.003;
  }
  for (size_t c = 0; c < opts.num_cameras; ++c) {
    BACamera cam;
    cam.pose = NadirPose({12.0 * static_cast<double>(c), 0.0, 60.0}, rng, 0.05);
    problem.cameras.push_back(cam);
  }
  problem.cameras[0].Fix();
  problem.cameras[1].fixed_center[0] = true;

  const double length = 12.0 * static_cast<double>(opts.num_cameras - 1);
  std::uniform_real_distribution<double> ux(-10.0, length + 10.0);
  std::uniform_real_distribution<double> uy(-15.0, 15.0);
  std::uniform_real_distribution<double> uz(-4.0, 4.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, opts.pixel_noise);
  while (problem.points.size() < opts.num_points) {
    const Eigen::Vector3d x(ux(rng), uy(rng), uz(rng));
    std::vector<BAObservation> obs;
    for (size_t c = 0; c < problem.cameras.size(); ++c) {
      const Eigen::Vector2d p =
          ProjectPixel(problem.intrinsics, problem.cameras[c].pose, x);
      if (p.x() < 0 || p.y() < 0 || p.x() >= 1000 || p.y() >= 750) continue;
      Keypoint kp{p.x(), p.y(), 1.0};
      if (opts.pixel_noise > 0.0) {
        kp.x += noise(rng);
        kp.y += noise(rng);
      }
      if (unit(rng) < opts.outlier_fraction) kp.x += 25.0;
      obs.push_back({c, problem.points.size(), kp});
    }
    if (obs.size() < 2) continue;
    problem.points.push_back(x);
    problem.observations.insert(problem.observations.end(), obs.begin(), obs.end());
  }
  return problem;
}

inline void Perturb(std::mt19937_64& rng, BAProblem* problem,
                    double angle_rad, double center_m, double point_m) {
  std::normal_distribution<double> normal;
  for (BACamera& cam : problem->cameras) {
    Eigen::Vector3d dtheta =
        Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized() * angle_rad;
    if (cam.fixed_rotation) dtheta.setZero();
    Eigen::Vector3d dc = Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized() * center_m;
    for (int k = 0; k < 3; ++k) {
      if (cam.fixed_center[k]) dc(k) = 0.0;
    }
    cam.pose = RetractPose(cam.pose, dtheta, dc);
  }
  for (size_t i = 0; i < problem->points.size(); ++i) {
    if (problem->PointFixed(i)) continue;
    problem->points[i] += Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized() * point_m;
  }
}

// Cost written directly from the definitions, with the projection and loss
// computed independently of the library.
inline double OracleCost(const BAProblem& problem) {
  const double delta = problem.loss.scale;
  double cost = 0.0;
  for (const BAObservation& obs : problem.observations) {
    const double s = (ProjectPixel(problem.intrinsics,
                                            problem.cameras[obs.camera].pose,
                                            problem.points[obs.point]) -
                      obs.keypoint.Position())
                         .squaredNorm();
    const bool huber = problem.loss.type == LossType::kHuber && s > delta * delta;
    cost += huber ? 2.0 * delta * std::sqrt(s) - delta * delta : s;
  }
  for (const PositionPrior& prior : problem.priors) {
    cost += ((problem.cameras[prior.camera].pose.center - prior.center).array() /
             prior.sigma.array())
                .square()
                .sum();
  }
  return cost;
}

// Replaces every 10th, 13th and 17th match's keypoint in B by a random
// pixel at least `min_sampson_px` off the true epipolar line. Returns the
// inlier labels.
inline std::vector<bool> PlantEpipolarOutliers(std::mt19937_64& rng,
                                               PairScene* scene,
                                               double min_sampson_px = 5.0) {
  const auto [r, t] = RelativeMotion(scene->pose_a, scene->pose_b);
  const Eigen::Matrix3d e_true = Skew(t.normalized()) * r;
  std::uniform_real_distribution<double> ux(0.0, 999.0);
  std::uniform_real_distribution<double> uy(0.0, 749.0);
  std::vector<bool> truth(scene->matches.size(), true);
  for (size_t i = 0; i + 7 < scene->matches.size(); i += 10) {
    for (const size_t k : {i, i + 3, i + 7}) {
      Keypoint kp;
      do {
        kp = {ux(rng), uy(rng), 1.0};
      } while (SampsonDistance(e_true,
                               Undistort(scene->features_a.keypoints[k], scene->camera),
                               Undistort(kp, scene->camera)) *
                   scene->camera.MeanFocal() <
               min_sampson_px);
      scene->features_b.keypoints[k] = kp;
      truth[k] = false;
    }
  }
  return truth;
}

}  // namespace aerotri::testing
