#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "aerotri/ba/bundle_adjustment.h"
#include "aerotri/geometry/camera.h"
#include "aerotri/geometry/ransac.h"
#include "aerotri/sfm/reconstruction.h"
#include "aerotri/sfm/scene_graph.h"
#include "aerotri/sfm/two_view.h"

namespace aerotri {

struct SfmConfig {
  // Sampson threshold (pixels) for relative orientation of the seed pair.
  RansacConfig two_view_ransac;
  // Reprojection threshold (pixels) for registration.
  RansacConfig registration_ransac = {.threshold = 4.0};
  size_t min_seed_inliers = 100;
  double min_seed_median_angle_deg = 2.0;
  size_t min_registration_correspondences = 15;
  size_t local_ba_neighbors = 5;
  size_t global_ba_interval = 5;
  double max_reprojection = kDefaultMaxReprojection;
  double min_triangulation_angle_deg = kDefaultMinTriangulationAngle;
  SolverOptions solver;
  LossSpec loss;
  // Intrinsics refined in the final global adjustment (fx, fy, cx, cy, k1,
  // k2). Incremental adjustments keep them fixed. Focal length trades off
  // against flying height in a nadir block without control, so none are
  // refined unless asked.
  std::array<bool, CameraModel::kNumParams> final_refine_intrinsics = {};
};

struct SeedPair {
  size_t image_a = 0;
  size_t image_b = 0;
  TwoViewGeometry geometry;
};

// Picks the verified pair with the most inliers among those with at least
// `min_seed_inliers` (or the maximum count when none reaches it) whose trial
// relative orientation has a median triangulation angle >= the configured
// minimum. Ties go to the lexicographically smaller pair. Throws
// NoAdequatePair.
SeedPair SelectSeedPair(const SceneGraph& graph, const CameraModel& camera,
                        const SfmConfig& config);

struct IncrementalLog {
  std::vector<size_t> registration_order;
  std::vector<size_t> unregistered;
  size_t local_adjustments = 0;
  size_t global_adjustments = 0;
  BAResult final_adjustment;
};

// Throws SeedFailure when the graph has fewer than two images or the seed
// pair yields no usable structure; propagates NoAdequatePair.
Reconstruction IncrementalReconstruct(const SceneGraph& graph,
                                      const std::vector<Track>& tracks,
                                      const CameraModel& camera,
                                      const SfmConfig& config,
                                      IncrementalLog* log = nullptr);

}  // namespace aerotri
