#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aerotri/features/feature_set.h"
#include "aerotri/geo/gauss_kruger.h"
#include "aerotri/geo/pos.h"
#include "aerotri/geometry/camera.h"
#include "aerotri/georef/evaluation.h"
#include "aerotri/matching/matcher.h"

namespace aerotri::synth {

struct FlightConfig {
  double heading_overlap = 0.80;
  double side_overlap = 0.60;
  double gsd = 0.2;  // meters per pixel
  uint32_t image_width = 1000;
  uint32_t image_height = 750;
  double focal_px = 1000.0;
  size_t strips = 4;
  size_t images_per_strip = 6;
  // Projected coordinates of the first exposure's ground point.
  double origin_easting = 656000.0;
  double origin_northing = 3272000.0;
  double terrain_base = 300.0;

  // Throws ConfigError.
  void Validate() const;

  double FlyingHeight() const { return gsd * focal_px; }
  // Strips run along easting, the image x axis.
  double FootprintLength() const { return image_width * gsd; }
  double FootprintWidth() const { return image_height * gsd; }
  double AlongTrackSpacing() const {
    return (1.0 - heading_overlap) * FootprintLength();
  }
  double CrossTrackSpacing() const {
    return (1.0 - side_overlap) * FootprintWidth();
  }
  CameraModel Camera() const;
};

// Nadir poses, strip by strip, serpentine (odd strips fly west with the
// camera yawed by 180 degrees).
std::vector<Pose> GenerateFlightPlan(const FlightConfig& config);

struct TerrainSpec {
  double amplitude = 10.0;
  double wavelength = 160.0;

  // Height above the flight's terrain base at a projected position.
  double Height(double easting, double northing,
                const FlightConfig& flight) const;
};

struct NoiseConfig {
  double keypoint_sigma = 0.0;  // pixels
  double gnss_horizontal_sigma = geo::kDefaultHorizontalSigma;
  double gnss_vertical_sigma = geo::kDefaultVerticalSigma;
  double descriptor_sigma = 0.0;  // per component, before renormalization
};

struct SceneConfig {
  FlightConfig flight;
  TerrainSpec terrain;
  size_t num_points = 3000;
  NoiseConfig noise;
  int descriptor_dim = 64;
  double min_descriptor_angle_deg = 45.0;
  double k1 = 0.0;
  double k2 = 0.0;
  uint64_t seed = 42;

  // Throws ConfigError.
  void Validate() const;
};

struct SynthDataset {
  CameraModel camera;
  std::vector<std::string> image_ids;
  std::vector<Pose> true_poses;
  std::vector<Eigen::Vector3d> true_points;
  std::vector<FeatureSet> feature_sets;
  // Scene point of every keypoint, per image.
  std::vector<std::vector<size_t>> keypoint_points;
  std::vector<geo::PosRecord> pos_records;
  Eigen::Vector3d checkpoint = Eigen::Vector3d::Zero();
  std::vector<CheckpointObservation> checkpoint_observations;

  // Exact projections of A's scene points into B, for match statistics.
  GroundTruthCorrespondence TruthBetween(size_t a, size_t b) const;
  // Pairs of keypoints observing the same scene point, sorted by index_a.
  std::vector<Match> TrueMatches(size_t a, size_t b) const;
};

// Throws NoVisibility when a point cannot be placed in two images after 100
// attempts.
SynthDataset GenerateScene(const SceneConfig& config);

// Writes features/<id>.feat, pos.csv (projected), pos_geodetic.csv (via the
// inverse projection in `zone`), camera.csv, truth_points.csv
// (point_id,x,y,z), truth_observations.csv (image_id,keypoint_index,point_id),
// truth_poses.csv, checkpoint_truth.csv (x,y,z) and checkpoint_obs.csv
// (image_id,x,y).
void WriteDataset(const SynthDataset& dataset, const std::filesystem::path& dir,
                  const geo::ZoneConfig& zone);

std::vector<CheckpointObservation> ParseCheckpointObservations(
    std::string_view content);
Eigen::Vector3d ParseCheckpointTruth(std::string_view content);

}  // namespace aerotri::synth
