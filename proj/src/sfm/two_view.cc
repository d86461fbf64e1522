#include "aerotri/sfm/two_view.h"

#include <algorithm>

#include "aerotri/ba/bundle_adjustment.h"
#include "aerotri/common/error.h"
#include "aerotri/geometry/essential.h"
#include "aerotri/geometry/triangulation.h"

namespace aerotri {

TwoViewGeometry EstimateRelativeOrientation(const FeatureSet& a,
                                            const FeatureSet& b,
                                            const std::vector<Match>& matches,
                                            const CameraModel& camera,
                                            const TwoViewOptions& options) {
  const EssentialEstimate estimate =
      EstimateEssentialRansac(matches, a, b, camera, options.ransac);
  TwoViewGeometry geometry;
  geometry.camera = camera;
  for (size_t i = 0; i < matches.size(); ++i) {
    if (estimate.inlier_mask[i]) geometry.inliers.push_back(matches[i]);
  }
  geometry.pose_b =
      DecomposeEssential(estimate.essential, geometry.inliers, a, b, camera);

  for (const Match& m : geometry.inliers) {
    const Keypoint& ka = a.keypoints[static_cast<size_t>(m.index_a)];
    const Keypoint& kb = b.keypoints[static_cast<size_t>(m.index_b)];
    const TriangulationObservation obs[2] = {{geometry.pose_a, camera, ka},
                                             {geometry.pose_b, camera, kb}};
    try {
      TwoViewPoint point;
      point.match = m;
      point.position = Triangulate(obs);
      point.pixel_a = ka.Position();
      point.pixel_b = kb.Position();
      geometry.points.push_back(point);
    } catch (const Error&) {
      // Parallel rays or negative depth: not part of the reconstruction.
    }
  }

  if (options.refine && geometry.points.size() >= 2) {
    BAProblem problem;
    problem.intrinsics = camera;
    BACamera cam_a;
    cam_a.pose = geometry.pose_a;
    cam_a.Fix();
    BACamera cam_b;
    cam_b.pose = geometry.pose_b;
    int axis = 0;
    geometry.pose_b.center.cwiseAbs().maxCoeff(&axis);
    cam_b.fixed_center[static_cast<size_t>(axis)] = true;
    problem.cameras = {cam_a, cam_b};
    for (const TwoViewPoint& p : geometry.points) {
      const size_t index = problem.points.size();
      problem.points.push_back(p.position);
      problem.observations.push_back(
          {0, index, Keypoint{p.pixel_a.x(), p.pixel_a.y(), 0.0}});
      problem.observations.push_back(
          {1, index, Keypoint{p.pixel_b.x(), p.pixel_b.y(), 0.0}});
    }
    SolveBundleAdjustment(&problem);
    geometry.pose_b = problem.cameras[1].pose;
    // Keep the unit baseline.
    const double baseline = geometry.pose_b.center.norm();
    geometry.pose_b.center /= baseline;
    for (size_t i = 0; i < geometry.points.size(); ++i) {
      geometry.points[i].position = problem.points[i] / baseline;
    }
  }

  std::vector<double> angles;
  angles.reserve(geometry.points.size());
  for (const TwoViewPoint& p : geometry.points) {
    angles.push_back(MaxTriangulationAngleDeg(
        p.position, {geometry.pose_a.center, geometry.pose_b.center}));
  }
  if (!angles.empty()) {
    auto mid = angles.begin() + static_cast<std::ptrdiff_t>(angles.size() / 2);
    std::nth_element(angles.begin(), mid, angles.end());
    geometry.median_angle_deg = *mid;
  }
  return geometry;
}

}  // namespace aerotri
