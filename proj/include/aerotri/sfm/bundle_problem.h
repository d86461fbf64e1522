#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "aerotri/ba/bundle_adjustment.h"
#include "aerotri/sfm/reconstruction.h"

namespace aerotri {

struct CenterPrior {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d sigma = Eigen::Vector3d::Ones();
};

struct BundleOptions {
  // Images whose poses are refined; nullopt refines every registered image.
  // Only points seen by at least one of them enter the problem.
  std::optional<std::set<size_t>> free_images;
  // Hold the reconstruction's gauge anchor. Turn off when priors carry the
  // datum.
  bool fix_gauge_anchor = true;
  // Keyed by image index.
  std::map<size_t, CenterPrior> priors;
  std::array<bool, CameraModel::kNumParams> refine_intrinsics = {};
  LossSpec loss;
};

// Which reconstruction entity each camera / point of a problem stands for.
struct BundleMapping {
  std::vector<size_t> images;
  std::vector<size_t> tracks;
};

// One residual pair per observation of every included point, one prior
// residual triple per registered camera with a prior. Throws
// EmptyReconstruction with fewer than two registered images or no points.
BAProblem BuildProblem(const Reconstruction& recon,
                       const BundleOptions& options, BundleMapping* mapping);

// Copies poses, points and intrinsics back into the reconstruction.
void WriteBack(const BAProblem& problem, const BundleMapping& mapping,
               Reconstruction* recon);

// BuildProblem, SolveBundleAdjustment and WriteBack.
BAResult AdjustBundle(Reconstruction* recon, const BundleOptions& options,
                      const SolverOptions& solver = {});

}  // namespace aerotri
