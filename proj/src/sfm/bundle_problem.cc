#include "aerotri/sfm/bundle_problem.h"

#include "aerotri/common/error.h"

namespace aerotri {

BAProblem BuildProblem(const Reconstruction& recon,
                       const BundleOptions& options, BundleMapping* mapping) {
  if (recon.poses.size() < 2 || recon.points.empty()) {
    throw Error(ErrorCode::kEmptyReconstruction,
                "bundle adjustment needs >= 2 registered images and >= 1 point");
  }
  const auto is_free = [&](size_t image) {
    return !options.free_images || options.free_images->contains(image);
  };

  BAProblem problem;
  problem.intrinsics = recon.camera;
  problem.refine_intrinsics = options.refine_intrinsics;
  problem.loss = options.loss;
  mapping->images.clear();
  mapping->tracks.clear();

  std::map<size_t, size_t> camera_of_image;
  const auto camera_index = [&](size_t image) {
    auto [it, inserted] = camera_of_image.emplace(image, mapping->images.size());
    if (inserted) {
      mapping->images.push_back(image);
      BACamera cam;
      cam.pose = recon.poses.at(image);
      if (!is_free(image)) {
        cam.Fix();
      }
      problem.cameras.push_back(cam);
    }
    return it->second;
  };

  // Free cameras first, in image order, so that the layout does not depend
  // on point order.
  for (const auto& [image, pose] : recon.poses) {
    if (is_free(image)) camera_index(image);
  }
  for (const auto& [track, point] : recon.points) {
    bool include = !options.free_images.has_value();
    for (const PointObservation& obs : point.observations) {
      include = include || is_free(obs.image);
    }
    if (!include) continue;
    const size_t point_index = problem.points.size();
    problem.points.push_back(point.position);
    mapping->tracks.push_back(track);
    for (const PointObservation& obs : point.observations) {
      BAObservation ba_obs;
      ba_obs.camera = camera_index(obs.image);
      ba_obs.point = point_index;
      ba_obs.keypoint = Keypoint{obs.pixel.x(), obs.pixel.y(), 0.0};
      problem.observations.push_back(ba_obs);
    }
  }

  if (options.fix_gauge_anchor) {
    const auto fixed = camera_of_image.find(recon.gauge.fixed_image);
    if (fixed != camera_of_image.end()) {
      problem.cameras[fixed->second].Fix();
    }
    const auto scale = camera_of_image.find(recon.gauge.scale_image);
    if (scale != camera_of_image.end()) {
      problem.cameras[scale->second]
          .fixed_center[static_cast<size_t>(recon.gauge.scale_axis)] = true;
    }
  }
  for (const auto& [image, prior] : options.priors) {
    const auto it = camera_of_image.find(image);
    if (it == camera_of_image.end()) continue;
    problem.priors.push_back({it->second, prior.center, prior.sigma});
  }
  return problem;
}

void WriteBack(const BAProblem& problem, const BundleMapping& mapping,
               Reconstruction* recon) {
  for (size_t c = 0; c < mapping.images.size(); ++c) {
    recon->poses.at(mapping.images[c]) = problem.cameras[c].pose;
  }
  for (size_t p = 0; p < mapping.tracks.size(); ++p) {
    recon->points.at(mapping.tracks[p]).position = problem.points[p];
  }
  recon->camera = problem.intrinsics;
}

BAResult AdjustBundle(Reconstruction* recon, const BundleOptions& options,
                      const SolverOptions& solver) {
  BundleMapping mapping;
  BAProblem problem = BuildProblem(*recon, options, &mapping);
  const BAResult result = SolveBundleAdjustment(&problem, solver);
  WriteBack(problem, mapping, recon);
  return result;
}

}  // namespace aerotri
