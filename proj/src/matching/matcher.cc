#include "aerotri/matching/matcher.h"

#include <cmath>
#include <limits>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"

namespace aerotri {
namespace {

// Per-keypoint nearest-neighbor facts that do not depend on the ratio.
struct NeighborTable {
  struct Entry {
    int nearest = -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    // Passes every ratio-independent acceptance rule (mutual check or claim
    // resolution, tie rejection).
    bool eligible = false;
  };
  std::vector<Entry> entries;
};

double ExactDistance(const FeatureSet& a, int i, const FeatureSet& b, int j) {
  return (a.descriptors.row(i) - b.descriptors.row(j)).norm();
}

NeighborTable BuildNeighborTable(const FeatureSet& a, const FeatureSet& b,
                                 bool cross_check) {
  if (a.DescriptorDim() != b.DescriptorDim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "descriptor dims " + std::to_string(a.DescriptorDim()) +
                    " vs " + std::to_string(b.DescriptorDim()));
  }
  if (a.descriptors.rows() < 1 || b.descriptors.rows() < 2) {
    throw Error(ErrorCode::kTooFewDescriptors,
                "ratio test needs 1 query and 2 reference descriptors");
  }
  const int na = static_cast<int>(a.descriptors.rows());
  const int nb = static_cast<int>(b.descriptors.rows());

  // Squared distances via the Gram matrix; ranking only. Reported distances
  // are recomputed directly.
  const Eigen::VectorXd sq_a = a.descriptors.rowwise().squaredNorm();
  const Eigen::VectorXd sq_b = b.descriptors.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (a.descriptors * b.descriptors.transpose());
  d2.colwise() += sq_a;
  d2.rowwise() += sq_b.transpose();

  NeighborTable table;
  table.entries.resize(static_cast<size_t>(na));
  for (int i = 0; i < na; ++i) {
    int best = -1;
    int second = -1;
    for (int j = 0; j < nb; ++j) {
      const double v = d2(i, j);
      if (best < 0 || v < d2(i, best)) {
        second = best;
        best = j;
      } else if (second < 0 || v < d2(i, second)) {
        second = j;
      }
    }
    NeighborTable::Entry& e = table.entries[static_cast<size_t>(i)];
    e.d1 = ExactDistance(a, i, b, best);
    e.d2 = ExactDistance(a, i, b, second);
    e.nearest = best;
    if (e.d2 < e.d1) {
      std::swap(e.d1, e.d2);
      e.nearest = second;
    }
    e.eligible = e.d1 != e.d2;
  }

  if (cross_check) {
    // Nearest A descriptor for every B descriptor; ties disqualify.
    std::vector<int> best_a(static_cast<size_t>(nb), -1);
    std::vector<bool> tied(static_cast<size_t>(nb), false);
    for (int j = 0; j < nb; ++j) {
      int best = -1;
      for (int i = 0; i < na; ++i) {
        if (best < 0 || d2(i, j) < d2(best, j)) {
          best = i;
        }
      }
      best_a[static_cast<size_t>(j)] = best;
      for (int i = 0; i < na; ++i) {
        if (i != best && d2(i, j) == d2(best, j)) {
          tied[static_cast<size_t>(j)] = true;
        }
      }
    }
    for (int i = 0; i < na; ++i) {
      NeighborTable::Entry& e = table.entries[static_cast<size_t>(i)];
      const size_t j = static_cast<size_t>(e.nearest);
      e.eligible = e.eligible && best_a[j] == i && !tied[j];
    }
  } else {
    // Resolve B keypoints claimed by several A keypoints. The claimant set
    // ignores the ratio so acceptance stays monotone in the ratio.
    std::vector<int> owner(static_cast<size_t>(nb), -1);
    std::vector<bool> tied(static_cast<size_t>(nb), false);
    for (int i = 0; i < na; ++i) {
      const NeighborTable::Entry& e = table.entries[static_cast<size_t>(i)];
      const size_t j = static_cast<size_t>(e.nearest);
      if (owner[j] < 0) {
        owner[j] = i;
      } else {
        const double current = table.entries[static_cast<size_t>(owner[j])].d1;
        if (e.d1 < current) {
          owner[j] = i;
          tied[j] = false;
        } else if (e.d1 == current) {
          tied[j] = true;
        }
      }
    }
    for (int i = 0; i < na; ++i) {
      NeighborTable::Entry& e = table.entries[static_cast<size_t>(i)];
      const size_t j = static_cast<size_t>(e.nearest);
      e.eligible = e.eligible && owner[j] == i && !tied[j];
    }
  }
  return table;
}

std::vector<Match> SelectMatches(const NeighborTable& table, double ratio) {
  std::vector<Match> matches;
  for (size_t i = 0; i < table.entries.size(); ++i) {
    const NeighborTable::Entry& e = table.entries[i];
    if (e.eligible && e.d1 < ratio * e.d2) {
      matches.push_back({static_cast<int>(i), e.nearest, e.d1});
    }
  }
  return matches;
}

void ValidateRatio(double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::kConfigError,
                "ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
}

}  // namespace

void MatchConfig::Validate() const { ValidateRatio(ratio); }

std::vector<Match> MatchFeatures(const FeatureSet& a, const FeatureSet& b,
                                 const MatchConfig& config) {
  config.Validate();
  return SelectMatches(BuildNeighborTable(a, b, config.cross_check),
                       config.ratio);
}

MatchStats ComputeMatchStats(const std::vector<Match>& matches,
                             const GroundTruthCorrespondence& truth,
                             double tolerance, size_t total_keypoints) {
  MatchStats stats;
  stats.total_keypoints = total_keypoints;
  stats.matched = matches.size();
  for (const Match& m : matches) {
    const auto ia = static_cast<size_t>(m.index_a);
    const auto ib = static_cast<size_t>(m.index_b);
    const bool has_truth =
        ia < truth.expected_in_b.size() && truth.expected_in_b[ia].has_value();
    if (!has_truth || ib >= truth.keypoints_b.size() ||
        (truth.keypoints_b[ib] - *truth.expected_in_b[ia]).norm() > tolerance) {
      ++stats.false_matches;
    }
  }
  stats.match_rate = total_keypoints == 0
                         ? 0.0
                         : static_cast<double>(stats.matched) /
                               static_cast<double>(total_keypoints);
  stats.mismatch_rate = stats.matched == 0
                            ? 0.0
                            : static_cast<double>(stats.false_matches) /
                                  static_cast<double>(stats.matched);
  return stats;
}

std::vector<double> DefaultRatioGrid() {
  std::vector<double> grid;
  for (int k = 50; k <= 90; k += 5) {
    grid.push_back(k / 100.0);
  }
  return grid;
}

std::vector<RatioSweepEntry> SweepRatio(const FeatureSet& a,
                                        const FeatureSet& b,
                                        const std::vector<double>& ratios,
                                        const GroundTruthCorrespondence& truth,
                                        double tolerance, bool cross_check) {
  for (size_t k = 0; k < ratios.size(); ++k) {
    ValidateRatio(ratios[k]);
    if (k > 0 && !(ratios[k] > ratios[k - 1])) {
      throw Error(ErrorCode::kConfigError,
                  "ratios must be strictly increasing");
    }
  }
  const NeighborTable table = BuildNeighborTable(a, b, cross_check);
  std::vector<RatioSweepEntry> sweep;
  for (double ratio : ratios) {
    sweep.push_back({ratio, ComputeMatchStats(SelectMatches(table, ratio),
                                              truth, tolerance,
                                              a.NumFeatures())});
  }
  return sweep;
}

std::string FormatRatioSweepCsv(const std::vector<RatioSweepEntry>& sweep) {
  std::string out = "ratio,total,matched,false,match_rate,mismatch_rate\n";
  for (const RatioSweepEntry& e : sweep) {
    out += FormatDouble(e.ratio) + "," +
           std::to_string(e.stats.total_keypoints) + "," +
           std::to_string(e.stats.matched) + "," +
           std::to_string(e.stats.false_matches) + "," +
           FormatDouble(e.stats.match_rate) + "," +
           FormatDouble(e.stats.mismatch_rate) + "\n";
  }
  return out;
}

}  // namespace aerotri
