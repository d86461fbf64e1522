#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aerotri/features/feature_set.h"
#include "aerotri/geometry/camera.h"
#include "aerotri/sfm/scene_graph.h"

namespace aerotri {

struct PointObservation {
  size_t image = 0;
  size_t keypoint = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

struct ReconstructedPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::vector<PointObservation> observations;
};

// Images whose parameters define the datum of a free network: `fixed_image`
// is held entirely, `scale_image` only in center component `scale_axis`.
struct GaugeAnchor {
  size_t fixed_image = 0;
  size_t scale_image = 0;
  int scale_axis = 0;
};

struct Reconstruction {
  std::vector<std::string> image_ids;
  CameraModel camera;
  std::map<size_t, Pose> poses;
  std::map<size_t, ReconstructedPoint> points;
  GaugeAnchor gauge;

  bool IsRegistered(size_t image) const { return poses.contains(image); }
  size_t NumObservations() const;
};

struct ReprojectionSummary {
  size_t num_observations = 0;
  double mean = 0.0;
  double rms = 0.0;
  double max = 0.0;
};

// Throws BehindCamera when an observation has non-positive depth.
ReprojectionSummary SummarizeReprojection(const Reconstruction& recon);

double ObservationError(const Reconstruction& recon,
                        const ReconstructedPoint& point,
                        const PointObservation& obs);

struct FilterStats {
  size_t points_removed = 0;
  size_t observations_removed = 0;
};

inline constexpr double kDefaultMaxReprojection = 4.0;
inline constexpr double kDefaultMinTriangulationAngle = 1.5;

// Removes observations above `max_reprojection` pixels (or behind the
// camera), then points with fewer than two observations left or a maximum
// triangulation angle below `min_angle_deg`. observations_removed counts only
// the reprojection removals.
FilterStats FilterOutliers(Reconstruction* recon,
                           double max_reprojection = kDefaultMaxReprojection,
                           double min_angle_deg = kDefaultMinTriangulationAngle);

// points.csv:       track_id,x,y,z,n_obs,rms_px
// poses.csv:        image_id,qw,qx,qy,qz,cx,cy,cz
// observations.csv: track_id,image_id,keypoint_index
// camera.csv:       fx,fy,cx,cy,k1,k2
void ExportReconstruction(const Reconstruction& recon,
                          const std::filesystem::path& dir);

// Inverse of ExportReconstruction. Observation pixels are taken from
// `images`, whose ids define the image indices.
Reconstruction ImportReconstruction(const std::filesystem::path& dir,
                                    const std::vector<FeatureSet>& images);

std::string FormatCameraCsv(const CameraModel& camera);
CameraModel ParseCameraCsv(std::string_view content);

}  // namespace aerotri
