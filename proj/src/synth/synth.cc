#include "aerotri/synth/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"
#include "aerotri/features/feature_io.h"
#include "aerotri/sfm/reconstruction.h"

namespace aerotri::synth {
namespace {

constexpr int kMaxPlacementAttempts = 100;
constexpr int kMaxDescriptorAttempts = 1000;
// Exact projections must fall this far inside the image.
constexpr double kImageMarginPx = 1.0;
// Noisy keypoints are clamped this far inside the right and bottom edges so
// that they stay in bounds after rounding to f32.
constexpr double kEdgeClearancePx = 0.01;

Eigen::Matrix3d NadirRotation(bool reversed) {
  const double s = reversed ? -1.0 : 1.0;
  Eigen::Matrix3d r;
  r << s, 0, 0, 0, -s, 0, 0, 0, -1;
  return r;
}

std::string ImageId(size_t index) {
  std::string digits = std::to_string(index + 1);
  return "IMG_" + std::string(4 - std::min<size_t>(4, digits.size()), '0') +
         digits;
}

bool ProjectInside(const CameraModel& camera, const Pose& pose,
                   const Eigen::Vector3d& point, uint32_t width,
                   uint32_t height, Eigen::Vector2d* pixel) {
  if (!ProjectCameraPoint(camera, pose.ToCamera(point), pixel)) {
    return false;
  }
  return pixel->x() >= kImageMarginPx && pixel->y() >= kImageMarginPx &&
         pixel->x() < width - kImageMarginPx &&
         pixel->y() < height - kImageMarginPx;
}

std::vector<Eigen::VectorXd> UniqueDescriptors(size_t n, int dim,
                                               double min_angle_deg,
                                               std::mt19937_64* rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double max_cos = std::cos(min_angle_deg * std::numbers::pi / 180.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  Eigen::MatrixXd accepted(dim, static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxDescriptorAttempts && !placed; ++attempt) {
      Eigen::VectorXd d(dim);
      for (int k = 0; k < dim; ++k) d(k) = normal(*rng);
      d.normalize();
      const auto count = static_cast<Eigen::Index>(out.size());
      if (count == 0 ||
          (accepted.leftCols(count).transpose() * d).maxCoeff() <= max_cos) {
        accepted.col(count) = d;
        out.push_back(std::move(d));
        placed = true;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::kConfigError,
                  "cannot draw " + std::to_string(n) +
                      " descriptors with the requested minimum angle");
    }
  }
  return out;
}

}  // namespace

void FlightConfig::Validate() const {
  if (!(heading_overlap >= 0.0 && heading_overlap <= 0.95) ||
      !(side_overlap >= 0.0 && side_overlap <= 0.95)) {
    throw Error(ErrorCode::kConfigError, "overlaps must lie in [0, 0.95]");
  }
  if (!(gsd > 0.0) || !(focal_px > 0.0) || image_width == 0 ||
      image_height == 0 || strips == 0 || images_per_strip == 0) {
    throw Error(ErrorCode::kConfigError,
                "gsd, focal length, image size and grid size must be > 0");
  }
}

CameraModel FlightConfig::Camera() const {
  CameraModel camera;
  camera.fx = camera.fy = focal_px;
  camera.cx = 0.5 * image_width;
  camera.cy = 0.5 * image_height;
  return camera;
}

std::vector<Pose> GenerateFlightPlan(const FlightConfig& config) {
  config.Validate();
  std::vector<Pose> poses;
  const double along = config.AlongTrackSpacing();
  const double cross = config.CrossTrackSpacing();
  const double altitude = config.terrain_base + config.FlyingHeight();
  for (size_t s = 0; s < config.strips; ++s) {
    const bool reversed = s % 2 == 1;
    const Eigen::Quaterniond rotation(NadirRotation(reversed));
    for (size_t k = 0; k < config.images_per_strip; ++k) {
      const size_t step = reversed ? config.images_per_strip - 1 - k : k;
      Pose pose;
      pose.rotation = rotation;
      pose.center = {config.origin_easting + static_cast<double>(step) * along,
                     config.origin_northing + static_cast<double>(s) * cross,
                     altitude};
      poses.push_back(pose);
    }
  }
  return poses;
}

double TerrainSpec::Height(double easting, double northing,
                           const FlightConfig& flight) const {
  const double u = 2.0 * std::numbers::pi * (easting - flight.origin_easting) /
                   wavelength;
  const double v = 2.0 * std::numbers::pi *
                   (northing - flight.origin_northing) / wavelength;
  return amplitude * std::sin(u) * std::cos(v);
}

void SceneConfig::Validate() const {
  flight.Validate();
  if (num_points < 50) {
    throw Error(ErrorCode::kConfigError, "scene needs >= 50 points");
  }
  if (!(std::abs(terrain.amplitude) < 0.5 * flight.FlyingHeight()) ||
      !(terrain.wavelength > 0.0)) {
    throw Error(ErrorCode::kConfigError,
                "terrain amplitude must stay below half the flying height");
  }
  if (descriptor_dim < 2 || noise.keypoint_sigma < 0.0 ||
      noise.descriptor_sigma < 0.0 || noise.gnss_horizontal_sigma < 0.0 ||
      noise.gnss_vertical_sigma < 0.0) {
    throw Error(ErrorCode::kConfigError,
                "descriptor dimension >= 2 and non-negative noise required");
  }
}

SynthDataset GenerateScene(const SceneConfig& config) {
  config.Validate();
  const FlightConfig& flight = config.flight;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SynthDataset data;
  data.camera = flight.Camera();
  data.camera.k1 = config.k1;
  data.camera.k2 = config.k2;
  data.true_poses = GenerateFlightPlan(flight);
  const size_t num_images = data.true_poses.size();
  for (size_t i = 0; i < num_images; ++i) data.image_ids.push_back(ImageId(i));

  double min_e = data.true_poses[0].center.x();
  double max_e = min_e;
  double min_n = data.true_poses[0].center.y();
  double max_n = min_n;
  for (const Pose& p : data.true_poses) {
    min_e = std::min(min_e, p.center.x());
    max_e = std::max(max_e, p.center.x());
    min_n = std::min(min_n, p.center.y());
    max_n = std::max(max_n, p.center.y());
  }
  std::uniform_real_distribution<double> sample_e(
      min_e - 0.5 * flight.FootprintLength(), max_e + 0.5 * flight.FootprintLength());
  std::uniform_real_distribution<double> sample_n(
      min_n - 0.5 * flight.FootprintWidth(), max_n + 0.5 * flight.FootprintWidth());
  const auto ground = [&](double e, double n) {
    return Eigen::Vector3d(
        e, n, flight.terrain_base + config.terrain.Height(e, n, flight));
  };

  // Per point: observing images and exact pixels.
  struct Visibility {
    std::vector<size_t> images;
    std::vector<Eigen::Vector2d> pixels;
  };
  std::vector<Visibility> visibility;
  for (size_t p = 0; p < config.num_points; ++p) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const double e = sample_e(rng);
      const double n = sample_n(rng);
      const Eigen::Vector3d x = ground(e, n);
      Visibility vis;
      for (size_t i = 0; i < num_images; ++i) {
        Eigen::Vector2d pixel;
        if (ProjectInside(data.camera, data.true_poses[i], x,
                          flight.image_width, flight.image_height, &pixel)) {
          vis.images.push_back(i);
          vis.pixels.push_back(pixel);
        }
      }
      if (vis.images.size() >= 2) {
        data.true_points.push_back(x);
        visibility.push_back(std::move(vis));
        placed = true;
      }
    }
    if (!placed) {
      throw Error(ErrorCode::kNoVisibility,
                  "point " + std::to_string(p) +
                      " not visible in two images after 100 attempts");
    }
  }

  const std::vector<Eigen::VectorXd> descriptors =
      UniqueDescriptors(data.true_points.size(), config.descriptor_dim,
                        config.min_descriptor_angle_deg, &rng);

  // Keypoints per image, in a per-image shuffled order.
  struct Pending {
    size_t point;
    Eigen::Vector2d pixel;
  };
  std::vector<std::vector<Pending>> per_image(num_images);
  for (size_t p = 0; p < visibility.size(); ++p) {
    for (size_t k = 0; k < visibility[p].images.size(); ++k) {
      Eigen::Vector2d pixel = visibility[p].pixels[k];
      pixel.x() += config.noise.keypoint_sigma * normal(rng);
      pixel.y() += config.noise.keypoint_sigma * normal(rng);
      pixel.x() = std::clamp(pixel.x(), 0.0, flight.image_width - kEdgeClearancePx);
      pixel.y() = std::clamp(pixel.y(), 0.0, flight.image_height - kEdgeClearancePx);
      per_image[visibility[p].images[k]].push_back({p, pixel});
    }
  }
  data.feature_sets.resize(num_images);
  data.keypoint_points.resize(num_images);
  for (size_t i = 0; i < num_images; ++i) {
    std::vector<Pending>& list = per_image[i];
    std::shuffle(list.begin(), list.end(), rng);
    FeatureSet& fs = data.feature_sets[i];
    fs.image_id = data.image_ids[i];
    fs.image_width = flight.image_width;
    fs.image_height = flight.image_height;
    fs.descriptors.resize(static_cast<Eigen::Index>(list.size()),
                          config.descriptor_dim);
    for (const Pending& item : list) {
      const auto row = static_cast<Eigen::Index>(fs.keypoints.size());
      fs.keypoints.push_back({item.pixel.x(), item.pixel.y(), 1.0});
      data.keypoint_points[i].push_back(item.point);
      Eigen::VectorXd d = descriptors[item.point];
      if (config.noise.descriptor_sigma > 0.0) {
        for (int k = 0; k < config.descriptor_dim; ++k) {
          d(k) += config.noise.descriptor_sigma * normal(rng);
        }
        d.normalize();
      }
      fs.descriptors.row(row) = d.transpose();
    }
  }

  for (size_t i = 0; i < num_images; ++i) {
    const Eigen::Vector3d& c = data.true_poses[i].center;
    geo::PosRecord record;
    record.image_id = data.image_ids[i];
    // Noise-free records still declare the nominal receiver accuracy.
    if (config.noise.gnss_horizontal_sigma > 0.0) {
      record.horizontal_sigma = config.noise.gnss_horizontal_sigma;
    }
    if (config.noise.gnss_vertical_sigma > 0.0) {
      record.vertical_sigma = config.noise.gnss_vertical_sigma;
    }
    geo::ProjectedCoord p;
    p.easting = c.x() + config.noise.gnss_horizontal_sigma * normal(rng);
    p.northing = c.y() + config.noise.gnss_horizontal_sigma * normal(rng);
    p.altitude = c.z() + config.noise.gnss_vertical_sigma * normal(rng);
    record.position = p;
    data.pos_records.push_back(record);
  }

  data.checkpoint = ground(0.5 * (min_e + max_e), 0.5 * (min_n + max_n));
  for (size_t i = 0; i < num_images; ++i) {
    Eigen::Vector2d pixel;
    if (!ProjectInside(data.camera, data.true_poses[i], data.checkpoint,
                       flight.image_width, flight.image_height, &pixel)) {
      continue;
    }
    pixel.x() += config.noise.keypoint_sigma * normal(rng);
    pixel.y() += config.noise.keypoint_sigma * normal(rng);
    data.checkpoint_observations.push_back(
        {data.image_ids[i], Keypoint{pixel.x(), pixel.y(), 1.0}});
  }
  return data;
}

GroundTruthCorrespondence SynthDataset::TruthBetween(size_t a, size_t b) const {
  GroundTruthCorrespondence truth;
  const FeatureSet& fb = feature_sets.at(b);
  for (const Keypoint& kp : fb.keypoints) truth.keypoints_b.push_back(kp.Position());
  for (size_t point : keypoint_points.at(a)) {
    Eigen::Vector2d pixel;
    if (ProjectInside(camera, true_poses[b], true_points[point],
                      fb.image_width, fb.image_height, &pixel)) {
      truth.expected_in_b.emplace_back(pixel);
    } else {
      truth.expected_in_b.emplace_back(std::nullopt);
    }
  }
  return truth;
}

std::vector<Match> SynthDataset::TrueMatches(size_t a, size_t b) const {
  std::map<size_t, size_t> in_b;
  for (size_t k = 0; k < keypoint_points.at(b).size(); ++k) {
    in_b.emplace(keypoint_points[b][k], k);
  }
  std::vector<Match> matches;
  for (size_t k = 0; k < keypoint_points.at(a).size(); ++k) {
    const auto it = in_b.find(keypoint_points[a][k]);
    if (it != in_b.end()) {
      matches.push_back({static_cast<int>(k), static_cast<int>(it->second), 0.0});
    }
  }
  return matches;
}

void WriteDataset(const SynthDataset& dataset, const std::filesystem::path& dir,
                  const geo::ZoneConfig& zone) {
  std::filesystem::create_directories(dir / "features");
  for (const FeatureSet& fs : dataset.feature_sets) {
    SaveFeatureFile(dir / "features" / (fs.image_id + ".feat"), fs);
  }
  WriteTextFile(dir / "pos.csv", geo::FormatPosFile(dataset.pos_records));

  std::vector<geo::PosRecord> geodetic = dataset.pos_records;
  for (geo::PosRecord& r : geodetic) {
    r.position = geo::GaussKrugerToGeodetic(r.Projected(), geo::Ellipsoid{}, zone);
  }
  WriteTextFile(dir / "pos_geodetic.csv", geo::FormatPosFile(geodetic));
  WriteTextFile(dir / "camera.csv", FormatCameraCsv(dataset.camera));

  std::ostringstream points;
  points << "point_id,x,y,z\n";
  for (size_t p = 0; p < dataset.true_points.size(); ++p) {
    const Eigen::Vector3d& x = dataset.true_points[p];
    points << p << ',' << FormatDouble(x.x()) << ',' << FormatDouble(x.y())
           << ',' << FormatDouble(x.z()) << '\n';
  }
  WriteTextFile(dir / "truth_points.csv", points.str());

  std::ostringstream obs;
  obs << "image_id,keypoint_index,point_id\n";
  for (size_t i = 0; i < dataset.feature_sets.size(); ++i) {
    for (size_t k = 0; k < dataset.keypoint_points[i].size(); ++k) {
      obs << dataset.image_ids[i] << ',' << k << ','
          << dataset.keypoint_points[i][k] << '\n';
    }
  }
  WriteTextFile(dir / "truth_observations.csv", obs.str());

  std::ostringstream poses;
  poses << "image_id,qw,qx,qy,qz,cx,cy,cz\n";
  for (size_t i = 0; i < dataset.true_poses.size(); ++i) {
    const Pose& p = dataset.true_poses[i];
    poses << dataset.image_ids[i] << ',' << FormatDouble(p.rotation.w()) << ','
          << FormatDouble(p.rotation.x()) << ',' << FormatDouble(p.rotation.y())
          << ',' << FormatDouble(p.rotation.z()) << ','
          << FormatDouble(p.center.x()) << ',' << FormatDouble(p.center.y())
          << ',' << FormatDouble(p.center.z()) << '\n';
  }
  WriteTextFile(dir / "truth_poses.csv", poses.str());

  const Eigen::Vector3d& c = dataset.checkpoint;
  WriteTextFile(dir / "checkpoint_truth.csv",
                "x,y,z\n" + FormatDouble(c.x()) + ',' + FormatDouble(c.y()) +
                    ',' + FormatDouble(c.z()) + '\n');
  std::ostringstream cp;
  cp << "image_id,x,y\n";
  for (const CheckpointObservation& o : dataset.checkpoint_observations) {
    cp << o.image_id << ',' << FormatDouble(o.keypoint.x) << ','
       << FormatDouble(o.keypoint.y) << '\n';
  }
  WriteTextFile(dir / "checkpoint_obs.csv", cp.str());
}

std::vector<CheckpointObservation> ParseCheckpointObservations(
    std::string_view content) {
  const std::vector<std::string_view> lines = SplitLines(content);
  if (lines.empty() || Trim(lines[0]) != "image_id,x,y") {
    throw Error(ErrorCode::kParseError,
                "checkpoint observations: expected header 'image_id,x,y'");
  }
  std::vector<CheckpointObservation> out;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    const auto fields = SplitCsvFields(lines[i]);
    const auto x = fields.size() == 3 ? ParseDouble(Trim(fields[1])) : std::nullopt;
    const auto y = fields.size() == 3 ? ParseDouble(Trim(fields[2])) : std::nullopt;
    if (!x || !y) {
      throw Error(ErrorCode::kParseError,
                  "checkpoint observations line " + std::to_string(i + 1));
    }
    out.push_back({std::string(Trim(fields[0])), Keypoint{*x, *y, 1.0}});
  }
  return out;
}

Eigen::Vector3d ParseCheckpointTruth(std::string_view content) {
  const std::vector<std::string_view> lines = SplitLines(content);
  if (lines.size() < 2 || Trim(lines[0]) != "x,y,z") {
    throw Error(ErrorCode::kParseError,
                "checkpoint truth: expected header 'x,y,z' and one row");
  }
  const auto fields = SplitCsvFields(lines[1]);
  Eigen::Vector3d truth;
  for (int k = 0; k < 3; ++k) {
    const auto v = fields.size() == 3
                       ? ParseDouble(Trim(fields[static_cast<size_t>(k)]))
                       : std::nullopt;
    if (!v) {
      throw Error(ErrorCode::kParseError, "checkpoint truth: invalid row");
    }
    truth(k) = *v;
  }
  return truth;
}

}  // namespace aerotri::synth
