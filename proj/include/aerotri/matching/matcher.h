#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aerotri/features/feature_set.h"

namespace aerotri {

struct Match {
  int index_a = -1;
  int index_b = -1;
  double distance = 0.0;  // L2 descriptor distance

  bool operator==(const Match&) const = default;
};

struct MatchConfig {
  // Nearest / second-nearest distance ratio must be strictly below this.
  double ratio = 0.7;
  // Require the match to be the mutual nearest neighbor.
  bool cross_check = true;

  void Validate() const;
};

struct MatchStats {
  size_t total_keypoints = 0;
  size_t matched = 0;
  size_t false_matches = 0;
  double match_rate = 0.0;     // matched / total_keypoints
  double mismatch_rate = 0.0;  // false_matches / matched, 0 when unmatched
};

// Where each keypoint of image A truly lands in image B (nullopt when the
// underlying scene point is not visible in B), plus B's keypoint positions.
struct GroundTruthCorrespondence {
  std::vector<std::optional<Eigen::Vector2d>> expected_in_b;
  std::vector<Eigen::Vector2d> keypoints_b;
};

inline constexpr double kDefaultFalseMatchTolerance = 3.0;

// Exhaustive L2 nearest-neighbor matching from A into B with Lowe's ratio
// test and optional mutual-nearest-neighbor check. Equal nearest and
// second-nearest distances are rejected as ambiguous. Without the cross
// check, a B keypoint claimed by several A keypoints goes to the closest
// claimant only, or to nobody on an exact tie. Output is sorted by index_a.
std::vector<Match> MatchFeatures(const FeatureSet& a, const FeatureSet& b,
                                 const MatchConfig& config = {});

// A match is false when B's keypoint lies more than `tolerance` pixels from
// the true location, or when A's keypoint has no true location in B.
MatchStats ComputeMatchStats(const std::vector<Match>& matches,
                             const GroundTruthCorrespondence& truth,
                             double tolerance, size_t total_keypoints);

struct RatioSweepEntry {
  double ratio = 0.0;
  MatchStats stats;
};

// 0.50, 0.55, ..., 0.90.
std::vector<double> DefaultRatioGrid();

// Match statistics per ratio. Ratios must be strictly increasing and lie in
// (0, 1]. Total keypoints are those of image A.
std::vector<RatioSweepEntry> SweepRatio(
    const FeatureSet& a, const FeatureSet& b, const std::vector<double>& ratios,
    const GroundTruthCorrespondence& truth,
    double tolerance = kDefaultFalseMatchTolerance, bool cross_check = true);

// Header: ratio,total,matched,false,match_rate,mismatch_rate
std::string FormatRatioSweepCsv(const std::vector<RatioSweepEntry>& sweep);

}  // namespace aerotri
