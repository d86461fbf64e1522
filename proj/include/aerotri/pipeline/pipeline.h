#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "aerotri/common/error.h"
#include "aerotri/features/feature_set.h"
#include "aerotri/geo/gauss_kruger.h"
#include "aerotri/geo/pos.h"
#include "aerotri/georef/evaluation.h"
#include "aerotri/matching/matcher.h"
#include "aerotri/sfm/incremental.h"
#include "aerotri/sfm/reconstruction.h"
#include "aerotri/sfm/scene_graph.h"

namespace aerotri {

// Process exit status per failure class: 2 configuration, 3 data,
// 4 numerical.
int ExitCodeFor(ErrorCode code);

using ImagePair = std::pair<size_t, size_t>;

inline constexpr size_t kDefaultPairNeighbors = 8;
inline constexpr double kDefaultRadiusFactor = 1.5;

// Median nearest-neighbor distance between positions.
double EstimateAlongTrackSpacing(const std::vector<Eigen::Vector3d>& positions);

// Pairs within `radius` meters. Symmetric, deduplicated, lexicographically
// ordered with first < second. Throws TooFewImages for fewer than 2
// positions.
std::vector<ImagePair> ProposePairsByRadius(
    const std::vector<Eigen::Vector3d>& positions, double radius);

// Union of every image's k nearest neighbors (ties by index), same ordering
// rules.
std::vector<ImagePair> ProposePairsByNearest(
    const std::vector<Eigen::Vector3d>& positions,
    size_t k = kDefaultPairNeighbors);

// Loads every *.feat file of a directory, ordered by image id. Throws
// DimensionMismatch naming the first file whose descriptor dimension differs
// from the others, and TooFewImages when the directory has none.
std::vector<FeatureSet> LoadFeatureDirectory(const std::filesystem::path& dir);

// Projects geodetic records into `zone` and returns the positions ordered
// like `images`. Throws MissingPos when an image has no record.
std::vector<Eigen::Vector3d> PositionsForImages(
    const std::vector<FeatureSet>& images, std::vector<geo::PosRecord>* pos,
    const geo::ZoneConfig& zone);

struct PairMatches {
  size_t image_a = 0;
  size_t image_b = 0;
  std::vector<Match> matches;
};

// Pairs are processed on `num_threads` workers (0: hardware concurrency).
// Output order follows `pairs` regardless of scheduling.
std::vector<PairMatches> MatchPairs(const std::vector<FeatureSet>& images,
                                    const std::vector<ImagePair>& pairs,
                                    const MatchConfig& config,
                                    size_t num_threads = 0);

// Header image_a,image_b,index_a,index_b,distance with image ids.
std::string FormatMatchesCsv(const std::vector<FeatureSet>& images,
                             const std::vector<PairMatches>& pairs);
std::vector<PairMatches> ParseMatchesCsv(std::string_view content,
                                         const std::vector<FeatureSet>& images);

inline constexpr size_t kDefaultMinVerifiedInliers = 15;

// Essential-matrix RANSAC per pair, every pair seeded with config.seed.
// Pairs that fail estimation or keep fewer than `min_inliers` inliers are
// dropped.
std::vector<VerifiedPair> VerifyPairs(const std::vector<FeatureSet>& images,
                                      const std::vector<PairMatches>& pairs,
                                      const CameraModel& camera,
                                      const RansacConfig& config,
                                      size_t min_inliers = kDefaultMinVerifiedInliers,
                                      size_t num_threads = 0);

// Keypoint labels per image id, from image_id,keypoint_index,point_id rows.
using KeypointLabels = std::map<std::string, std::map<size_t, size_t>>;
KeypointLabels ParseKeypointLabels(std::string_view content);

// Truth for match statistics from shared labels: a keypoint of A truly lands
// on B's keypoint carrying the same label.
GroundTruthCorrespondence TruthFromLabels(const FeatureSet& a,
                                          const FeatureSet& b,
                                          const KeypointLabels& labels);

enum class GeorefMode { kAlign, kPriors };

GeorefMode ParseGeorefMode(std::string_view name);
const char* GeorefModeName(GeorefMode mode);

struct CheckpointData {
  std::vector<CheckpointObservation> observations;
  Eigen::Vector3d truth = Eigen::Vector3d::Zero();
};

// Georeferences a copy of a free-network reconstruction by the given route.
Reconstruction Georeference(const Reconstruction& free_network,
                            const std::vector<geo::PosRecord>& pos,
                            GeorefMode mode, const SfmConfig& config);

struct EvaluationInput {
  std::string scene = "scene";
  const Reconstruction* free_network = nullptr;
  const std::vector<geo::PosRecord>* pos = nullptr;
  // Seed-pair relative orientation, when available.
  const TwoViewGeometry* relative_orientation = nullptr;
  std::optional<CheckpointData> checkpoint;
};

// Report rows for both georeferencing routes.
std::vector<ReportRow> Evaluate(const EvaluationInput& input,
                                const SfmConfig& config);

struct PipelineConfig {
  std::filesystem::path features_dir;
  std::filesystem::path pos_file;
  std::filesystem::path camera_file;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> checkpoint_observations;
  std::optional<std::filesystem::path> checkpoint_truth;
  std::string scene = "scene";
  MatchConfig match;
  RansacConfig verify_ransac;
  size_t min_verified_inliers = kDefaultMinVerifiedInliers;
  SfmConfig sfm;
  GeorefMode georef = GeorefMode::kPriors;
  geo::ZoneConfig zone;
  // Nearest-neighbor pair proposal unless a radius is given.
  size_t pair_neighbors = kDefaultPairNeighbors;
  std::optional<double> pair_radius;
  size_t num_threads = 0;
  uint64_t seed = 42;

  // Applies `seed` to every randomized stage.
  void ApplySeed();
};

struct PipelineResult {
  std::vector<FeatureSet> images;
  std::vector<ImagePair> pairs;
  std::vector<VerifiedPair> verified;
  Reconstruction free_network;
  Reconstruction georeferenced;
  IncrementalLog log;
  std::vector<ReportRow> report;
};

// Loads inputs, proposes pairs, matches, verifies, reconstructs,
// georeferences and evaluates. Writes matches.csv, verified.csv,
// reconstruction/ (free network), georeferenced/ and report.csv to the
// output directory. Stage failures are rethrown with the stage name.
PipelineResult RunPipeline(const PipelineConfig& config);

}  // namespace aerotri
