#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"
#include "aerotri/features/feature_io.h"
#include "aerotri/geo/gauss_kruger.h"
#include "aerotri/geo/pos.h"
#include "aerotri/synth/synth.h"
#include "test_support.h"

namespace aerotri::synth {
namespace {

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an aerotri::Error";
  return ErrorCode::kConfigError;
}

SceneConfig SmallScene(uint64_t seed = 42) {
  SceneConfig config;
  config.num_points = 800;
  config.seed = seed;
  return config;
}

// Fraction of a grid over image A whose ground point (on the mean terrain
// plane) also lands inside image B.
double FootprintOverlap(const CameraModel& camera, const Pose& a, const Pose& b,
                        const FlightConfig& flight) {
  const Eigen::Matrix3d ra = a.rotation.toRotationMatrix();
  size_t inside = 0;
  size_t total = 0;
  for (int u = 0; u < 200; ++u) {
    for (int v = 0; v < 150; ++v) {
      const double px = (u + 0.5) * flight.image_width / 200.0;
      const double py = (v + 0.5) * flight.image_height / 150.0;
      const Eigen::Vector3d ray_cam((px - camera.cx) / camera.fx,
                                    (py - camera.cy) / camera.fy, 1.0);
      const Eigen::Vector3d ray = ra.transpose() * ray_cam;
      const double t = (flight.terrain_base - a.center.z()) / ray.z();
      const Eigen::Vector3d ground = a.center + t * ray;
      const Eigen::Vector2d pb = testing::ProjectPixel(camera, b, ground);
      ++total;
      if (pb.x() >= 0.0 && pb.y() >= 0.0 && pb.x() < flight.image_width &&
          pb.y() < flight.image_height) {
        ++inside;
      }
    }
  }
  return static_cast<double>(inside) / static_cast<double>(total);
}

TEST(FlightConfig, SpacingExamples) {
  FlightConfig config;
  config.heading_overlap = 0.0;
  EXPECT_DOUBLE_EQ(config.AlongTrackSpacing(), config.FootprintLength());

  config.heading_overlap = 0.8;
  config.gsd = 0.2;
  config.image_width = 1000;
  EXPECT_DOUBLE_EQ(config.FootprintLength(), 200.0);
  EXPECT_NEAR(config.AlongTrackSpacing(), 40.0, 1e-12);
  EXPECT_DOUBLE_EQ(config.FlyingHeight(), 200.0);
  EXPECT_NEAR(config.CrossTrackSpacing(), 0.4 * 150.0, 1e-12);
}

TEST(FlightConfig, Validate) {
  FlightConfig config;
  EXPECT_NO_THROW(config.Validate());
  config.heading_overlap = 0.96;
  EXPECT_EQ(CodeOf([&] { config.Validate(); }), ErrorCode::kConfigError);
  config = FlightConfig{};
  config.side_overlap = -0.1;
  EXPECT_EQ(CodeOf([&] { config.Validate(); }), ErrorCode::kConfigError);
  config = FlightConfig{};
  config.gsd = 0.0;
  EXPECT_EQ(CodeOf([&] { config.Validate(); }), ErrorCode::kConfigError);
  config = FlightConfig{};
  config.strips = 0;
  EXPECT_EQ(CodeOf([&] { GenerateFlightPlan(config); }),
            ErrorCode::kConfigError);
}

TEST(SceneConfig, Validate) {
  SceneConfig config;
  config.num_points = 49;
  EXPECT_EQ(CodeOf([&] { config.Validate(); }), ErrorCode::kConfigError);
  config = SceneConfig{};
  config.terrain.amplitude = 150.0;
  EXPECT_EQ(CodeOf([&] { config.Validate(); }), ErrorCode::kConfigError);
  config = SceneConfig{};
  config.noise.keypoint_sigma = -1.0;
  EXPECT_EQ(CodeOf([&] { GenerateScene(config); }), ErrorCode::kConfigError);
}

TEST(FlightPlan, GridOfNadirPoses) {
  FlightConfig config;
  const std::vector<Pose> poses = GenerateFlightPlan(config);
  ASSERT_EQ(poses.size(), 24u);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  std::set<std::pair<long, long>> cells;
  for (const Pose& p : poses) {
    const Eigen::Matrix3d r = p.rotation.toRotationMatrix();
    EXPECT_NEAR(r.row(2).dot(down), 1.0, 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(p.center.z(), config.terrain_base + config.FlyingHeight());
    const double along = (p.center.x() - config.origin_easting) /
                         config.AlongTrackSpacing();
    const double cross = (p.center.y() - config.origin_northing) /
                         config.CrossTrackSpacing();
    EXPECT_NEAR(along, std::round(along), 1e-9);
    EXPECT_NEAR(cross, std::round(cross), 1e-9);
    cells.emplace(std::lround(along), std::lround(cross));
  }
  EXPECT_EQ(cells.size(), 24u);
  // Consecutive exposures in a strip are one spacing apart.
  for (size_t s = 0; s < config.strips; ++s) {
    for (size_t k = 1; k < config.images_per_strip; ++k) {
      const size_t i = s * config.images_per_strip + k;
      EXPECT_NEAR((poses[i].center - poses[i - 1].center).norm(),
                  config.AlongTrackSpacing(), 1e-9);
    }
  }
}

TEST(FlightPlan, AchievedOverlapMatchesConfig) {
  for (const double heading : {0.6, 0.7, 0.8, 0.9}) {
    FlightConfig config;
    config.heading_overlap = heading;
    config.side_overlap = 0.5;
    const std::vector<Pose> poses = GenerateFlightPlan(config);
    const CameraModel camera = config.Camera();
    for (size_t s = 0; s < config.strips; ++s) {
      for (size_t k = 1; k < config.images_per_strip; ++k) {
        const size_t i = s * config.images_per_strip + k;
        EXPECT_GE(FootprintOverlap(camera, poses[i - 1], poses[i], config),
                  heading - 0.02)
            << "heading " << heading << " image " << i;
      }
    }
    const double side = FootprintOverlap(camera, poses[0],
                                         poses[2 * config.images_per_strip - 1],
                                         config);
    EXPECT_GE(side, config.side_overlap - 0.02);
  }
}

TEST(GenerateScene, NoiseFreeKeypointsReprojectExactly) {
  SceneConfig config = SmallScene();
  config.noise.keypoint_sigma = 0.0;
  config.terrain.amplitude = 12.0;
  const SynthDataset data = GenerateScene(config);
  ASSERT_EQ(data.true_poses.size(), 24u);
  ASSERT_EQ(data.true_points.size(), 800u);
  ASSERT_EQ(data.feature_sets.size(), 24u);
  size_t observations = 0;
  for (size_t i = 0; i < data.feature_sets.size(); ++i) {
    const FeatureSet& fs = data.feature_sets[i];
    ASSERT_EQ(fs.keypoints.size(), data.keypoint_points[i].size());
    ASSERT_EQ(static_cast<size_t>(fs.descriptors.rows()), fs.keypoints.size());
    EXPECT_EQ(fs.image_id, data.image_ids[i]);
    for (size_t k = 0; k < fs.keypoints.size(); ++k) {
      const Eigen::Vector2d expected = testing::ProjectPixel(
          data.camera, data.true_poses[i], data.true_points[data.keypoint_points[i][k]]);
      EXPECT_NEAR((fs.keypoints[k].Position() - expected).norm(), 0.0, 1e-9);
      EXPECT_GT(testing::DepthIn(data.true_poses[i],
                                 data.true_points[data.keypoint_points[i][k]]),
                0.0);
      ++observations;
    }
  }
  EXPECT_GE(observations, 2 * data.true_points.size());
  for (const Eigen::Vector3d& x : data.true_points) {
    EXPECT_LE(std::abs(x.z() - config.flight.terrain_base),
              config.terrain.amplitude + 1e-9);
  }
}

TEST(GenerateScene, EveryPointSeenTwiceWithOneKeypointPerImage) {
  const SynthDataset data = GenerateScene(SmallScene());
  std::vector<size_t> views(data.true_points.size(), 0);
  for (const std::vector<size_t>& ids : data.keypoint_points) {
    const std::set<size_t> unique(ids.begin(), ids.end());
    EXPECT_EQ(unique.size(), ids.size());
    for (size_t p : ids) ++views[p];
  }
  for (size_t count : views) EXPECT_GE(count, 2u);
}

TEST(GenerateScene, SameSeedIsBitIdentical) {
  SceneConfig config = SmallScene(7);
  config.noise.keypoint_sigma = 0.5;
  config.noise.descriptor_sigma = 0.05;
  const SynthDataset a = GenerateScene(config);
  const SynthDataset b = GenerateScene(config);
  ASSERT_EQ(a.feature_sets.size(), b.feature_sets.size());
  for (size_t i = 0; i < a.feature_sets.size(); ++i) {
    EXPECT_EQ(WriteFeatureFile(a.feature_sets[i]), WriteFeatureFile(b.feature_sets[i]));
    EXPECT_EQ(a.keypoint_points[i], b.keypoint_points[i]);
  }
  EXPECT_EQ(geo::FormatPosFile(a.pos_records), geo::FormatPosFile(b.pos_records));
  EXPECT_EQ(a.checkpoint, b.checkpoint);

  config.seed = 8;
  const SynthDataset c = GenerateScene(config);
  EXPECT_NE(WriteFeatureFile(a.feature_sets[0]), WriteFeatureFile(c.feature_sets[0]));
}

TEST(GenerateScene, KeypointNoiseHasRequestedSigma) {
  SceneConfig config;
  config.noise.keypoint_sigma = 0.3;
  const SynthDataset data = GenerateScene(config);
  double sum = 0.0;
  double sum_sq = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < data.feature_sets.size(); ++i) {
    for (size_t k = 0; k < data.keypoint_points[i].size(); ++k) {
      const Eigen::Vector2d e =
          data.feature_sets[i].keypoints[k].Position() -
          testing::ProjectPixel(data.camera, data.true_poses[i],
                                data.true_points[data.keypoint_points[i][k]]);
      sum += e.x() + e.y();
      sum_sq += e.squaredNorm();
      n += 2;
    }
  }
  ASSERT_GT(n, 10000u);
  const double mean = sum / static_cast<double>(n);
  const double std_dev =
      std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(std_dev, 0.3, 0.05 * 0.3);
}

TEST(GenerateScene, GnssNoiseHasRequestedSigma) {
  double sum_h = 0.0;
  double sum_v = 0.0;
  size_t n = 0;
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    SceneConfig config = SmallScene(seed);
    config.num_points = 100;
    config.noise.gnss_horizontal_sigma = 0.05;
    config.noise.gnss_vertical_sigma = 0.10;
    const SynthDataset data = GenerateScene(config);
    for (size_t i = 0; i < data.true_poses.size(); ++i) {
      const geo::ProjectedCoord& p = data.pos_records[i].Projected();
      const Eigen::Vector3d& c = data.true_poses[i].center;
      sum_h += std::pow(p.easting - c.x(), 2) + std::pow(p.northing - c.y(), 2);
      sum_v += std::pow(p.altitude - c.z(), 2);
      ++n;
      EXPECT_DOUBLE_EQ(data.pos_records[i].horizontal_sigma, 0.05);
      EXPECT_DOUBLE_EQ(data.pos_records[i].vertical_sigma, 0.10);
    }
  }
  // 384 horizontal and 192 vertical samples.
  EXPECT_NEAR(std::sqrt(sum_h / (2.0 * n)), 0.05, 0.15 * 0.05);
  EXPECT_NEAR(std::sqrt(sum_v / n), 0.10, 0.2 * 0.10);
}

TEST(GenerateScene, DescriptorsAreUnitAndSeparated) {
  SceneConfig config = SmallScene();
  config.num_points = 300;
  const SynthDataset data = GenerateScene(config);
  std::map<size_t, Eigen::VectorXd> by_point;
  const double max_cos = std::cos(45.0 * std::numbers::pi / 180.0);
  for (size_t i = 0; i < data.feature_sets.size(); ++i) {
    const DescriptorMatrix& d = data.feature_sets[i].descriptors;
    for (size_t k = 0; k < data.keypoint_points[i].size(); ++k) {
      const Eigen::VectorXd row = d.row(static_cast<Eigen::Index>(k)).transpose();
      EXPECT_NEAR(row.norm(), 1.0, 1e-12);
      const auto [it, inserted] = by_point.emplace(data.keypoint_points[i][k], row);
      if (!inserted) {
        EXPECT_EQ(it->second, row);
      }
    }
  }
  for (auto a = by_point.begin(); a != by_point.end(); ++a) {
    for (auto b = std::next(a); b != by_point.end(); ++b) {
      EXPECT_LE(a->second.dot(b->second), max_cos + 1e-12);
    }
  }
}

TEST(GenerateScene, TruthLabelsAreConsistent) {
  const SynthDataset data = GenerateScene(SmallScene());
  for (const auto& [a, b] : {std::pair<size_t, size_t>{0, 1}, {0, 6}, {3, 15}, {7, 23}}) {
    const std::vector<Match> matches = data.TrueMatches(a, b);
    const std::set<size_t> points_b(data.keypoint_points[b].begin(),
                                    data.keypoint_points[b].end());
    size_t shared = 0;
    for (size_t p : data.keypoint_points[a]) shared += points_b.count(p);
    ASSERT_EQ(matches.size(), shared);
    const GroundTruthCorrespondence truth = data.TruthBetween(a, b);
    ASSERT_EQ(truth.expected_in_b.size(), data.keypoint_points[a].size());
    for (size_t m = 0; m < matches.size(); ++m) {
      if (m > 0) {
        EXPECT_LT(matches[m - 1].index_a, matches[m].index_a);
      }
      const auto ia = static_cast<size_t>(matches[m].index_a);
      const auto ib = static_cast<size_t>(matches[m].index_b);
      EXPECT_EQ(data.keypoint_points[a][ia], data.keypoint_points[b][ib]);
      // A true match always has an in-image expected position at its keypoint.
      ASSERT_TRUE(truth.expected_in_b[ia].has_value());
      EXPECT_NEAR((*truth.expected_in_b[ia] - truth.keypoints_b[ib]).norm(), 0.0,
                  1e-9);
    }
  }
}

TEST(GenerateScene, CheckpointObservationsProjectTheCheckpoint) {
  const SynthDataset data = GenerateScene(SmallScene());
  ASSERT_GE(data.checkpoint_observations.size(), 2u);
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < data.image_ids.size(); ++i) index[data.image_ids[i]] = i;
  for (const CheckpointObservation& o : data.checkpoint_observations) {
    const size_t i = index.at(o.image_id);
    EXPECT_NEAR((o.keypoint.Position() -
                 testing::ProjectPixel(data.camera, data.true_poses[i], data.checkpoint))
                    .norm(),
                0.0, 1e-9);
  }
}

TEST(GenerateScene, DistortionIsApplied) {
  SceneConfig config = SmallScene();
  config.k1 = -0.05;
  config.k2 = 0.01;
  const SynthDataset data = GenerateScene(config);
  EXPECT_DOUBLE_EQ(data.camera.k1, -0.05);
  const size_t p = data.keypoint_points[0][0];
  EXPECT_NEAR((data.feature_sets[0].keypoints[0].Position() -
               testing::ProjectPixel(data.camera, data.true_poses[0], data.true_points[p]))
                  .norm(),
              0.0, 1e-9);
}

TEST(WriteDataset, FilesRoundTrip) {
  const SynthDataset data = GenerateScene(SmallScene());
  const std::filesystem::path dir =
      std::filesystem::path(::testing::TempDir()) / "synth_write_test";
  std::filesystem::remove_all(dir);
  geo::ZoneConfig zone;
  zone.central_meridian = 105.0;
  WriteDataset(data, dir, zone);

  for (size_t i = 0; i < data.feature_sets.size(); ++i) {
    const FeatureSet fs =
        LoadFeatureFile(dir / "features" / (data.image_ids[i] + ".feat"));
    ASSERT_EQ(fs.keypoints.size(), data.feature_sets[i].keypoints.size());
    EXPECT_NEAR(fs.keypoints[0].x, data.feature_sets[i].keypoints[0].x, 1e-3);
  }

  const auto projected = geo::ParsePosFile(ReadTextFile(dir / "pos.csv"));
  const auto geodetic = geo::ParsePosFile(ReadTextFile(dir / "pos_geodetic.csv"));
  ASSERT_EQ(projected.size(), 24u);
  ASSERT_EQ(geodetic.size(), 24u);
  const auto reprojected = geo::ProjectPosRecords(geodetic, geo::Ellipsoid{}, zone);
  for (size_t i = 0; i < projected.size(); ++i) {
    EXPECT_EQ(projected[i].image_id, data.image_ids[i]);
    EXPECT_NEAR(reprojected[i].Projected().easting, projected[i].Projected().easting,
                1e-3);
    EXPECT_NEAR(reprojected[i].Projected().northing,
                projected[i].Projected().northing, 1e-3);
  }

  const Eigen::Vector3d checkpoint =
      ParseCheckpointTruth(ReadTextFile(dir / "checkpoint_truth.csv"));
  EXPECT_NEAR((checkpoint - data.checkpoint).norm(), 0.0, 1e-6);
  const auto obs =
      ParseCheckpointObservations(ReadTextFile(dir / "checkpoint_obs.csv"));
  ASSERT_EQ(obs.size(), data.checkpoint_observations.size());
  EXPECT_EQ(obs[0].image_id, data.checkpoint_observations[0].image_id);

  for (const char* name : {"camera.csv", "truth_points.csv", "truth_poses.csv",
                           "truth_observations.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  std::filesystem::remove_all(dir);
}

TEST(CheckpointParsing, Errors) {
  EXPECT_EQ(CodeOf([] { ParseCheckpointTruth("a,b,c\n1,2,3\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(CodeOf([] { ParseCheckpointTruth("x,y,z\n1,2\n"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(CodeOf([] { ParseCheckpointObservations("image_id,x,y\nA,1\n"); }),
            ErrorCode::kParseError);
  const auto obs = ParseCheckpointObservations("image_id,x,y\nA,1.5,2.5\n\n");
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs[0].image_id, "A");
  EXPECT_DOUBLE_EQ(obs[0].keypoint.y, 2.5);
}

}  // namespace
}  // namespace aerotri::synth
