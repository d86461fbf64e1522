#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "aerotri/common/error.h"
#include "aerotri/matching/matcher.h"
#include "aerotri/synth/synth.h"
#include "scenes.h"
#include "test_support.h"

namespace aerotri {
namespace {

using testing::BruteForceMatch;
using testing::CorrelatedSets;
using testing::SameMatches;

TEST(MatchFeatures, SelfMatchIsIdentity) {
  const FeatureSet fs =
      testing::MakeFeatureSet("a", DescriptorMatrix::Identity(10, 10));
  const std::vector<Match> matches = MatchFeatures(fs, fs);
  ASSERT_EQ(matches.size(), 10u);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(matches[i].index_a, i);
    EXPECT_EQ(matches[i].index_b, i);
    EXPECT_EQ(matches[i].distance, 0.0);
  }
}

TEST(MatchFeatures, RatioBoundaryExample) {
  DescriptorMatrix da(1, 2);
  da << 1.0, 0.0;
  DescriptorMatrix db(2, 2);
  db << 0.8, 0.6, 0.6, 0.8;
  const FeatureSet a = testing::MakeFeatureSet("a", da);
  const FeatureSet b = testing::MakeFeatureSet("b", db);
  EXPECT_TRUE(MatchFeatures(a, b).empty());
  MatchConfig loose;
  loose.ratio = 0.75;
  const std::vector<Match> matches = MatchFeatures(a, b, loose);
  ASSERT_EQ(matches.size(), 1u);
  EXPECT_EQ(matches[0].index_b, 0);
  EXPECT_NEAR(matches[0].distance, std::sqrt(0.4), 1e-15);
}

TEST(MatchFeatures, EqualDistancesAreRejected) {
  DescriptorMatrix da(1, 2);
  da << 1.0, 0.0;
  DescriptorMatrix db(2, 2);
  db << 0.0, 1.0, 0.0, -1.0;
  MatchConfig config;
  config.ratio = 1.0;
  EXPECT_TRUE(MatchFeatures(testing::MakeFeatureSet("a", da),
                            testing::MakeFeatureSet("b", db), config)
                  .empty());
}

TEST(MatchFeatures, Errors) {
  std::mt19937_64 rng(1);
  const FeatureSet a4 = testing::MakeFeatureSet("a", testing::RandomDescriptors(rng, 5, 4));
  const FeatureSet b8 = testing::MakeFeatureSet("b", testing::RandomDescriptors(rng, 5, 8));
  try {
    MatchFeatures(a4, b8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
  const FeatureSet one = testing::MakeFeatureSet("c", testing::RandomDescriptors(rng, 1, 4));
  try {
    MatchFeatures(a4, one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewDescriptors);
  }
  MatchConfig bad;
  bad.ratio = 1.5;
  EXPECT_THROW(MatchFeatures(a4, a4, bad), Error);
}

TEST(MatchFeatures, EquivalentToBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> size(2, 200);
  for (int trial = 0; trial < 60; ++trial) {
    const auto [a, b] = CorrelatedSets(rng, size(rng), 16, 0.15);
    for (const bool cross : {true, false}) {
      for (const double ratio : {0.5, 0.7, 0.8, 0.95}) {
        MatchConfig config;
        config.ratio = ratio;
        config.cross_check = cross;
        EXPECT_TRUE(SameMatches(MatchFeatures(a, b, config),
                                BruteForceMatch(a, b, ratio, cross)))
            << "trial " << trial << " ratio " << ratio << " cross " << cross;
      }
    }
  }
}

TEST(MatchFeatures, AcceptedSetGrowsWithRatio) {
  std::mt19937_64 rng(3);
  const std::vector<double> grid = DefaultRatioGrid();
  for (int trial = 0; trial < 100; ++trial) {
    const auto [a, b] = CorrelatedSets(rng, 60, 8, 0.3);
    for (const bool cross : {true, false}) {
      std::set<std::pair<int, int>> previous;
      for (const double ratio : grid) {
        MatchConfig config;
        config.ratio = ratio;
        config.cross_check = cross;
        std::set<std::pair<int, int>> current;
        for (const Match& m : MatchFeatures(a, b, config)) {
          current.emplace(m.index_a, m.index_b);
        }
        EXPECT_TRUE(std::includes(current.begin(), current.end(),
                                  previous.begin(), previous.end()));
        previous = std::move(current);
      }
    }
  }
}

TEST(MatchFeatures, InjectiveSortedAndMutual) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto [a, b] = CorrelatedSets(rng, 120, 16, 0.4);
    for (const bool cross : {true, false}) {
      MatchConfig config;
      config.ratio = 0.9;
      config.cross_check = cross;
      const std::vector<Match> matches = MatchFeatures(a, b, config);
      std::set<int> seen_a;
      std::set<int> seen_b;
      for (size_t i = 0; i < matches.size(); ++i) {
        EXPECT_TRUE(seen_a.insert(matches[i].index_a).second);
        EXPECT_TRUE(seen_b.insert(matches[i].index_b).second);
        if (i > 0) {
          EXPECT_LT(matches[i - 1].index_a, matches[i].index_a);
        }
      }
      if (!cross) continue;
      for (const Match& m : matches) {
        // B -> A nearest neighbor must be m.index_a.
        double best = 1e9;
        int best_i = -1;
        for (int i = 0; i < static_cast<int>(a.NumFeatures()); ++i) {
          const double d = (a.descriptors.row(i) - b.descriptors.row(m.index_b)).norm();
          if (d < best) {
            best = d;
            best_i = i;
          }
        }
        EXPECT_EQ(best_i, m.index_a);
      }
    }
  }
}

GroundTruthCorrespondence TruthWithTenKeypoints() {
  GroundTruthCorrespondence truth;
  for (int i = 0; i < 10; ++i) {
    truth.expected_in_b.emplace_back(Eigen::Vector2d(i * 10.0, 0.0));
    truth.keypoints_b.emplace_back(i * 10.0, 0.0);
  }
  return truth;
}

TEST(MatchStats, Examples) {
  GroundTruthCorrespondence truth = TruthWithTenKeypoints();
  std::vector<Match> matches;
  for (int i = 0; i < 5; ++i) matches.push_back({i, i, 0.1});
  MatchStats stats = ComputeMatchStats(matches, truth, 3.0, 10);
  EXPECT_DOUBLE_EQ(stats.match_rate, 0.5);
  EXPECT_DOUBLE_EQ(stats.mismatch_rate, 0.0);

  truth.keypoints_b[4] = {40.0, 3.5};
  stats = ComputeMatchStats(matches, truth, 3.0, 10);
  EXPECT_EQ(stats.false_matches, 1u);
  EXPECT_DOUBLE_EQ(stats.match_rate, 0.5);
  EXPECT_DOUBLE_EQ(stats.mismatch_rate, 0.2);

  stats = ComputeMatchStats({}, truth, 3.0, 10);
  EXPECT_EQ(stats.match_rate, 0.0);
  EXPECT_EQ(stats.mismatch_rate, 0.0);

  truth.expected_in_b[0] = std::nullopt;
  stats = ComputeMatchStats({{0, 0, 0.1}}, truth, 3.0, 10);
  EXPECT_EQ(stats.false_matches, 1u);
}

TEST(SweepRatio, GridAndCsv) {
  const std::vector<double> grid = DefaultRatioGrid();
  ASSERT_EQ(grid.size(), 9u);
  for (size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(grid[i], 0.5 + 0.05 * static_cast<double>(i), 1e-12);
  }
  std::mt19937_64 rng(5);
  const auto [a, b] = CorrelatedSets(rng, 50, 8, 0.2);
  GroundTruthCorrespondence truth;
  for (size_t i = 0; i < a.NumFeatures(); ++i) truth.expected_in_b.emplace_back(std::nullopt);
  for (const Keypoint& kp : b.keypoints) truth.keypoints_b.push_back(kp.Position());
  const auto sweep = SweepRatio(a, b, grid, truth);
  ASSERT_EQ(sweep.size(), grid.size());
  for (size_t i = 1; i < sweep.size(); ++i) {
    EXPECT_GE(sweep[i].stats.matched, sweep[i - 1].stats.matched);
  }
  const std::string csv = FormatRatioSweepCsv(sweep);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "ratio,total,matched,false,match_rate,mismatch_rate");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);

  EXPECT_THROW(SweepRatio(a, b, {0.7, 0.6}, truth), Error);
  EXPECT_THROW(SweepRatio(a, b, {0.0, 0.6}, truth), Error);
}

class SyntheticPairs : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synth::SceneConfig config;
    config.flight.strips = 2;
    config.flight.images_per_strip = 4;
    config.num_points = 800;
    dataset_ = new synth::SynthDataset(synth::GenerateScene(config));
  }
  static void TearDownTestSuite() {
    delete dataset_;
    dataset_ = nullptr;
  }
  static synth::SynthDataset* dataset_;
};

synth::SynthDataset* SyntheticPairs::dataset_ = nullptr;

TEST_F(SyntheticPairs, ZeroMismatchUpToDefaultRatio) {
  for (const auto& [a, b] : std::vector<std::pair<size_t, size_t>>{{0, 1}, {1, 2}, {0, 5}, {2, 6}}) {
    const auto sweep =
        SweepRatio(dataset_->feature_sets[a], dataset_->feature_sets[b],
                   DefaultRatioGrid(), dataset_->TruthBetween(a, b));
    for (const RatioSweepEntry& entry : sweep) {
      if (entry.ratio <= 0.7 + 1e-12) {
        EXPECT_EQ(entry.stats.false_matches, 0u) << a << "-" << b << " " << entry.ratio;
      }
    }
    EXPECT_GT(sweep.back().stats.matched, 0u);
  }
}

TEST_F(SyntheticPairs, SweepMatchesBruteForceWithTruth) {
  const size_t a = 0;
  const size_t b = 1;
  const FeatureSet& fa = dataset_->feature_sets[a];
  const FeatureSet& fb = dataset_->feature_sets[b];
  const GroundTruthCorrespondence truth = dataset_->TruthBetween(a, b);
  const auto sweep = SweepRatio(fa, fb, DefaultRatioGrid(), truth);
  const std::vector<Match> true_matches = dataset_->TrueMatches(a, b);
  std::set<std::pair<int, int>> truth_set;
  for (const Match& m : true_matches) truth_set.emplace(m.index_a, m.index_b);
  for (const RatioSweepEntry& entry : sweep) {
    const std::vector<Match> brute = BruteForceMatch(fa, fb, entry.ratio, true);
    size_t wrong = 0;
    for (const Match& m : brute) {
      if (!truth_set.contains({m.index_a, m.index_b})) ++wrong;
    }
    EXPECT_EQ(entry.stats.matched, brute.size());
    EXPECT_EQ(entry.stats.false_matches, wrong);
  }
}

}  // namespace
}  // namespace aerotri
