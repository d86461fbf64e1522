#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"
#include "aerotri/features/feature_io.h"
#include "aerotri/georef/similarity.h"
#include "aerotri/pipeline/pipeline.h"
#include "aerotri/synth/synth.h"
#include "test_support.h"

namespace aerotri {
namespace {

namespace fs = std::filesystem;

template <typename F>
Error ErrorOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an aerotri::Error";
  return Error(ErrorCode::kConfigError, "none");
}

template <typename F>
ErrorCode CodeOf(F&& f) {
  return ErrorOf(std::forward<F>(f)).code();
}

double RotationDistance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return a.angularDistance(b);
}

fs::path FreshDir(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool Contains(const std::vector<ImagePair>& pairs, size_t a, size_t b) {
  return std::find(pairs.begin(), pairs.end(), ImagePair{a, b}) != pairs.end();
}

void ExpectCanonical(const std::vector<ImagePair>& pairs) {
  for (size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_LT(pairs[i].first, pairs[i].second);
    if (i > 0) {
      EXPECT_LT(pairs[i - 1], pairs[i]);
    }
  }
}

synth::SceneConfig StripScene(double keypoint_sigma) {
  synth::SceneConfig config;
  config.flight.strips = 1;
  config.flight.images_per_strip = 6;
  config.num_points = 600;
  config.noise.keypoint_sigma = keypoint_sigma;
  return config;
}

PipelineConfig ConfigFor(const fs::path& data, const fs::path& out) {
  PipelineConfig config;
  config.features_dir = data / "features";
  config.pos_file = data / "pos.csv";
  config.camera_file = data / "camera.csv";
  config.output_dir = out;
  config.checkpoint_observations = data / "checkpoint_obs.csv";
  config.checkpoint_truth = data / "checkpoint_truth.csv";
  config.num_threads = 1;
  config.ApplySeed();
  return config;
}

size_t CountDataRows(const fs::path& csv) {
  const std::string text = ReadTextFile(csv);
  const auto lines = std::count(text.begin(), text.end(), '\n');
  return static_cast<size_t>(lines) - 1;
}

TEST(ProposePairs, RadiusExamples) {
  const std::vector<Eigen::Vector3d> two = {{0.0, 0.0, 0.0}, {10.0, 0.0, 0.0}};
  const std::vector<ImagePair> near = ProposePairsByRadius(two, 20.0);
  ASSERT_EQ(near.size(), 1u);
  EXPECT_EQ(near[0], (ImagePair{0, 1}));
  EXPECT_TRUE(ProposePairsByRadius(two, 5.0).empty());
  EXPECT_EQ(ProposePairsByRadius(two, 10.0).size(), 1u);
}

TEST(ProposePairs, Errors) {
  const std::vector<Eigen::Vector3d> one = {{0.0, 0.0, 0.0}};
  EXPECT_EQ(CodeOf([&] { ProposePairsByRadius(one, 5.0); }), ErrorCode::kTooFewImages);
  EXPECT_EQ(CodeOf([&] { ProposePairsByNearest(one); }), ErrorCode::kTooFewImages);
  EXPECT_EQ(CodeOf([&] { EstimateAlongTrackSpacing(one); }), ErrorCode::kTooFewImages);
}

TEST(ProposePairs, GridNearestCoversAlongTrackNeighbors) {
  const synth::FlightConfig flight;
  std::vector<Eigen::Vector3d> positions;
  for (const Pose& p : synth::GenerateFlightPlan(flight)) positions.push_back(p.center);
  ASSERT_EQ(positions.size(), 24u);
  EXPECT_NEAR(EstimateAlongTrackSpacing(positions), flight.AlongTrackSpacing(), 1e-9);

  const std::vector<ImagePair> pairs = ProposePairsByNearest(positions, 8);
  ExpectCanonical(pairs);
  for (size_t s = 0; s < flight.strips; ++s) {
    for (size_t k = 1; k < flight.images_per_strip; ++k) {
      const size_t i = s * flight.images_per_strip + k;
      EXPECT_TRUE(Contains(pairs, i - 1, i)) << i;
    }
  }
  // Every image has at least its own 8 nearest neighbors.
  std::vector<size_t> degree(positions.size(), 0);
  for (const auto& [a, b] : pairs) {
    ++degree[a];
    ++degree[b];
  }
  for (size_t d : degree) EXPECT_GE(d, 8u);

  const double radius = kDefaultRadiusFactor * EstimateAlongTrackSpacing(positions);
  const std::vector<ImagePair> by_radius = ProposePairsByRadius(positions, radius);
  for (size_t s = 0; s < flight.strips; ++s) {
    for (size_t k = 1; k < flight.images_per_strip; ++k) {
      const size_t i = s * flight.images_per_strip + k;
      EXPECT_TRUE(Contains(by_radius, i - 1, i)) << i;
    }
  }
}

TEST(ProposePairs, MatchesBruteForceAndIsStable) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-200.0, 200.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::Vector3d> positions(15);
    for (Eigen::Vector3d& p : positions) p = {coord(rng), coord(rng), 0.0};
    const double radius = 120.0;
    std::vector<ImagePair> expected;
    for (size_t i = 0; i < positions.size(); ++i) {
      for (size_t j = i + 1; j < positions.size(); ++j) {
        if ((positions[i] - positions[j]).norm() <= radius) expected.emplace_back(i, j);
      }
    }
    EXPECT_EQ(ProposePairsByRadius(positions, radius), expected);

    const size_t k = 3;
    std::set<ImagePair> nearest;
    for (size_t i = 0; i < positions.size(); ++i) {
      std::vector<size_t> order;
      for (size_t j = 0; j < positions.size(); ++j) {
        if (j != i) order.push_back(j);
      }
      std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return (positions[a] - positions[i]).norm() < (positions[b] - positions[i]).norm();
      });
      for (size_t n = 0; n < k; ++n) {
        nearest.emplace(std::min(i, order[n]), std::max(i, order[n]));
      }
    }
    const std::vector<ImagePair> got = ProposePairsByNearest(positions, k);
    EXPECT_EQ(got, std::vector<ImagePair>(nearest.begin(), nearest.end()));
    EXPECT_EQ(got, ProposePairsByNearest(positions, k));
  }
}

TEST(ExitCodeFor, FailureClasses) {
  EXPECT_EQ(ExitCodeFor(ErrorCode::kConfigError), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kOutOfZone), 2);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kIoError), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kMissingPos), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kDimensionMismatch), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kBadMagic), 3);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kNoConvergence), 4);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kSeedFailure), 4);
  EXPECT_EQ(ExitCodeFor(ErrorCode::kNonFiniteResidual), 4);
}

TEST(GeorefMode, Names) {
  EXPECT_EQ(ParseGeorefMode("align"), GeorefMode::kAlign);
  EXPECT_EQ(ParseGeorefMode("priors"), GeorefMode::kPriors);
  EXPECT_STREQ(GeorefModeName(GeorefMode::kPriors), "priors");
  EXPECT_EQ(CodeOf([] { ParseGeorefMode("gcp"); }), ErrorCode::kConfigError);
}

TEST(KeypointLabels, TruthFromLabels) {
  const KeypointLabels labels = ParseKeypointLabels(
      "image_id,keypoint_index,point_id\nA,0,7\nA,1,9\nB,0,9\nB,1,3\n");
  ASSERT_EQ(labels.at("A").size(), 2u);
  EXPECT_EQ(labels.at("B").at(0), 9u);

  std::mt19937_64 rng(1);
  FeatureSet a = testing::MakeFeatureSet("A", testing::RandomDescriptors(rng, 2, 8));
  FeatureSet b = testing::MakeFeatureSet("B", testing::RandomDescriptors(rng, 2, 8));
  a.keypoints = {{10.0, 20.0, 1.0}, {30.0, 40.0, 1.0}};
  b.keypoints = {{50.0, 60.0, 1.0}, {70.0, 80.0, 1.0}};
  const GroundTruthCorrespondence truth = TruthFromLabels(a, b, labels);
  ASSERT_EQ(truth.expected_in_b.size(), 2u);
  EXPECT_FALSE(truth.expected_in_b[0].has_value());
  ASSERT_TRUE(truth.expected_in_b[1].has_value());
  EXPECT_EQ(*truth.expected_in_b[1], Eigen::Vector2d(50.0, 60.0));

  EXPECT_EQ(CodeOf([] { ParseKeypointLabels("a,b\n"); }), ErrorCode::kParseError);
}

TEST(LoadFeatureDirectory, Errors) {
  const fs::path empty = FreshDir("pipeline_empty_features");
  EXPECT_EQ(CodeOf([&] { LoadFeatureDirectory(empty); }), ErrorCode::kTooFewImages);

  const fs::path dir = FreshDir("pipeline_mixed_dims");
  std::mt19937_64 rng(2);
  SaveFeatureFile(dir / "IMG_0001.feat",
                  testing::MakeFeatureSet("IMG_0001", testing::RandomDescriptors(rng, 30, 16)));
  SaveFeatureFile(dir / "IMG_0002.feat",
                  testing::MakeFeatureSet("IMG_0002", testing::RandomDescriptors(rng, 30, 32)));
  const Error error = ErrorOf([&] { LoadFeatureDirectory(dir); });
  EXPECT_EQ(error.code(), ErrorCode::kDimensionMismatch);
  EXPECT_NE(std::string(error.what()).find("IMG_0002.feat"), std::string::npos)
      << error.what();
  EXPECT_NE(ExitCodeFor(error.code()), 0);
}

class SixImagePipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_dir_ = new fs::path(FreshDir("pipeline_six_images"));
    const synth::SynthDataset dataset = synth::GenerateScene(StripScene(0.3));
    synth::WriteDataset(dataset, *data_dir_, geo::ZoneConfig{});
  }
  static void TearDownTestSuite() {
    fs::remove_all(*data_dir_);
    delete data_dir_;
    data_dir_ = nullptr;
  }

  static fs::path* data_dir_;
};

fs::path* SixImagePipeline::data_dir_ = nullptr;

TEST_F(SixImagePipeline, WritesAllOutputs) {
  const fs::path out = FreshDir("pipeline_six_out");
  const PipelineResult result = RunPipeline(ConfigFor(*data_dir_, out));
  EXPECT_EQ(result.free_network.poses.size(), 6u);
  EXPECT_EQ(result.georeferenced.poses.size(), 6u);
  for (const char* name : {"matches.csv", "verified.csv", "report.csv"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  EXPECT_EQ(CountDataRows(out / "reconstruction" / "poses.csv"), 6u);
  EXPECT_EQ(CountDataRows(out / "georeferenced" / "poses.csv"), 6u);
  EXPECT_FALSE(result.report.empty());
  EXPECT_GT(CountDataRows(out / "report.csv"), 0u);
}

TEST_F(SixImagePipeline, OutputsAreByteIdenticalAcrossRuns) {
  const fs::path first = FreshDir("pipeline_det_a");
  const fs::path second = FreshDir("pipeline_det_b");
  RunPipeline(ConfigFor(*data_dir_, first));
  PipelineConfig config = ConfigFor(*data_dir_, second);
  config.num_threads = 3;
  RunPipeline(config);
  size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(first)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), first);
    ASSERT_TRUE(fs::exists(second / rel)) << rel;
    EXPECT_EQ(ReadTextFile(entry.path()), ReadTextFile(second / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 9u);
}

TEST_F(SixImagePipeline, MissingPosNamesThePath) {
  PipelineConfig config = ConfigFor(*data_dir_, FreshDir("pipeline_missing_pos"));
  config.pos_file = *data_dir_ / "no_such_pos.csv";
  const Error error = ErrorOf([&] { RunPipeline(config); });
  EXPECT_NE(ExitCodeFor(error.code()), 0);
  EXPECT_NE(std::string(error.what()).find("no_such_pos.csv"), std::string::npos)
      << error.what();
}

TEST_F(SixImagePipeline, MismatchedDescriptorDimsNameTheFile) {
  const fs::path features = FreshDir("pipeline_bad_dims");
  for (const auto& entry : fs::directory_iterator(*data_dir_ / "features")) {
    fs::copy_file(entry.path(), features / entry.path().filename());
  }
  std::mt19937_64 rng(3);
  FeatureSet odd = LoadFeatureFile(features / "IMG_0004.feat");
  odd.descriptors = testing::RandomDescriptors(
      rng, static_cast<int>(odd.keypoints.size()), 32);
  SaveFeatureFile(features / "IMG_0004.feat", odd);

  PipelineConfig config = ConfigFor(*data_dir_, FreshDir("pipeline_bad_dims_out"));
  config.features_dir = features;
  const Error error = ErrorOf([&] { RunPipeline(config); });
  EXPECT_EQ(ExitCodeFor(error.code()), 3);
  EXPECT_NE(std::string(error.what()).find("IMG_0004.feat"), std::string::npos)
      << error.what();
}

TEST_F(SixImagePipeline, StageNameInErrors) {
  PipelineConfig config = ConfigFor(*data_dir_, FreshDir("pipeline_stage_name"));
  config.checkpoint_truth.reset();
  const Error error = ErrorOf([&] { RunPipeline(config); });
  EXPECT_EQ(error.code(), ErrorCode::kConfigError);
  EXPECT_NE(std::string(error.what()).find("stage 'load'"), std::string::npos);
}

TEST(FullPipeline, NoiseFreeBlockReproducesTruePoses) {
  synth::SceneConfig scene;
  scene.flight.strips = 2;
  scene.flight.images_per_strip = 4;
  scene.num_points = 800;
  scene.noise.keypoint_sigma = 0.0;
  scene.noise.gnss_horizontal_sigma = 0.0;
  scene.noise.gnss_vertical_sigma = 0.0;
  const synth::SynthDataset data = synth::GenerateScene(scene);

  std::vector<Eigen::Vector3d> positions;
  for (const geo::PosRecord& r : data.pos_records) {
    const geo::ProjectedCoord& p = r.Projected();
    positions.emplace_back(p.easting, p.northing, p.altitude);
  }
  PipelineConfig config;
  config.ApplySeed();
  const std::vector<PairMatches> matches =
      MatchPairs(data.feature_sets, ProposePairsByNearest(positions), config.match, 1);
  const std::vector<VerifiedPair> verified =
      VerifyPairs(data.feature_sets, matches, data.camera, config.verify_ransac);
  const SceneGraph graph(data.feature_sets, verified);
  const Reconstruction free_network = IncrementalReconstruct(
      graph, BuildTracks(graph), data.camera, config.sfm, nullptr);
  ASSERT_EQ(free_network.poses.size(), 8u);

  for (const GeorefMode mode : {GeorefMode::kAlign, GeorefMode::kPriors}) {
    const Reconstruction georef =
        Georeference(free_network, data.pos_records, mode, config.sfm);
    std::vector<Eigen::Vector3d> source;
    std::vector<Eigen::Vector3d> target;
    for (const auto& [image, pose] : georef.poses) {
      source.push_back(pose.center);
      target.push_back(data.true_poses[image].center);
    }
    const Reconstruction aligned =
        ApplySimilarity(georef, EstimateSimilarity(source, target));
    for (const auto& [image, pose] : aligned.poses) {
      EXPECT_LT((pose.center - data.true_poses[image].center).norm(), 1e-6)
          << GeorefModeName(mode) << " image " << image;
      EXPECT_LT(RotationDistance(pose.rotation, data.true_poses[image].rotation), 1e-8)
          << GeorefModeName(mode) << " image " << image;
    }
  }
}

}  // namespace
}  // namespace aerotri
