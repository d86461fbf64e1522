#include "aerotri/sfm/reconstruction.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"

namespace aerotri {
namespace {

std::vector<std::vector<std::string_view>> ParseCsvTable(
    std::string_view content, std::string_view expected_header,
    const std::string& name) {
  const std::vector<std::string_view> lines = SplitLines(content);
  if (lines.empty() || Trim(lines[0]) != expected_header) {
    throw Error(ErrorCode::kParseError,
                name + ": expected header '" + std::string(expected_header) + "'");
  }
  const size_t num_fields = SplitCsvFields(expected_header).size();
  std::vector<std::vector<std::string_view>> rows;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (Trim(lines[i]).empty()) continue;
    std::vector<std::string_view> fields = SplitCsvFields(lines[i]);
    if (fields.size() != num_fields) {
      throw Error(ErrorCode::kParseError,
                  name + " line " + std::to_string(i + 1) + ": expected " +
                      std::to_string(num_fields) + " fields");
    }
    for (auto& f : fields) f = Trim(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

double FieldDouble(std::string_view field, const std::string& where) {
  const auto value = ParseDouble(field);
  if (!value || !std::isfinite(*value)) {
    throw Error(ErrorCode::kParseError,
                where + ": invalid number '" + std::string(field) + "'");
  }
  return *value;
}

size_t FieldIndex(std::string_view field, const std::string& where) {
  const auto value = ParseInt(field);
  if (!value || *value < 0) {
    throw Error(ErrorCode::kParseError,
                where + ": invalid index '" + std::string(field) + "'");
  }
  return static_cast<size_t>(*value);
}

int DominantAxis(const Eigen::Vector3d& v) {
  int axis = 0;
  v.cwiseAbs().maxCoeff(&axis);
  return axis;
}

}  // namespace

size_t Reconstruction::NumObservations() const {
  size_t n = 0;
  for (const auto& [id, point] : points) n += point.observations.size();
  return n;
}

double ObservationError(const Reconstruction& recon,
                        const ReconstructedPoint& point,
                        const PointObservation& obs) {
  Eigen::Vector2d pixel;
  if (!ProjectCameraPoint(recon.camera,
                          recon.poses.at(obs.image).ToCamera(point.position),
                          &pixel)) {
    return std::numeric_limits<double>::infinity();
  }
  return (pixel - obs.pixel).norm();
}

ReprojectionSummary SummarizeReprojection(const Reconstruction& recon) {
  ReprojectionSummary summary;
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& [id, point] : recon.points) {
    for (const PointObservation& obs : point.observations) {
      const double err = ObservationError(recon, point, obs);
      if (!std::isfinite(err)) {
        throw Error(ErrorCode::kBehindCamera,
                    "point " + std::to_string(id) + " is behind image " +
                        recon.image_ids.at(obs.image));
      }
      sum += err;
      sq += err * err;
      summary.max = std::max(summary.max, err);
      ++summary.num_observations;
    }
  }
  if (summary.num_observations > 0) {
    const auto n = static_cast<double>(summary.num_observations);
    summary.mean = sum / n;
    summary.rms = std::sqrt(sq / n);
  }
  return summary;
}

FilterStats FilterOutliers(Reconstruction* recon, double max_reprojection,
                           double min_angle_deg) {
  FilterStats stats;
  for (auto it = recon->points.begin(); it != recon->points.end();) {
    ReconstructedPoint& point = it->second;
    const size_t before = point.observations.size();
    std::erase_if(point.observations, [&](const PointObservation& obs) {
      return !(ObservationError(*recon, point, obs) <= max_reprojection);
    });
    stats.observations_removed += before - point.observations.size();

    bool keep = point.observations.size() >= 2;
    if (keep) {
      std::vector<Eigen::Vector3d> centers;
      centers.reserve(point.observations.size());
      for (const PointObservation& obs : point.observations) {
        centers.push_back(recon->poses.at(obs.image).center);
      }
      keep = MaxTriangulationAngleDeg(point.position, centers) >= min_angle_deg;
    }
    if (keep) {
      ++it;
    } else {
      ++stats.points_removed;
      it = recon->points.erase(it);
    }
  }
  return stats;
}

std::string FormatCameraCsv(const CameraModel& camera) {
  std::ostringstream out;
  out << "fx,fy,cx,cy,k1,k2\n"
      << FormatDouble(camera.fx) << ',' << FormatDouble(camera.fy) << ','
      << FormatDouble(camera.cx) << ',' << FormatDouble(camera.cy) << ','
      << FormatDouble(camera.k1) << ',' << FormatDouble(camera.k2) << '\n';
  return out.str();
}

CameraModel ParseCameraCsv(std::string_view content) {
  const auto rows = ParseCsvTable(content, "fx,fy,cx,cy,k1,k2", "camera.csv");
  if (rows.size() != 1) {
    throw Error(ErrorCode::kParseError, "camera.csv: expected one data row");
  }
  Eigen::Matrix<double, CameraModel::kNumParams, 1> params;
  for (int k = 0; k < CameraModel::kNumParams; ++k) {
    params(k) = FieldDouble(rows[0][static_cast<size_t>(k)], "camera.csv");
  }
  CameraModel camera;
  camera.SetParams(params);
  camera.Validate();
  return camera;
}

void ExportReconstruction(const Reconstruction& recon,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  std::ostringstream points;
  points << "track_id,x,y,z,n_obs,rms_px\n";
  std::ostringstream observations;
  observations << "track_id,image_id,keypoint_index\n";
  for (const auto& [id, point] : recon.points) {
    double sq = 0.0;
    for (const PointObservation& obs : point.observations) {
      const double err = ObservationError(recon, point, obs);
      sq += err * err;
      observations << id << ',' << recon.image_ids.at(obs.image) << ','
                   << obs.keypoint << '\n';
    }
    const double rms =
        point.observations.empty()
            ? 0.0
            : std::sqrt(sq / static_cast<double>(point.observations.size()));
    points << id << ',' << FormatDouble(point.position.x()) << ','
           << FormatDouble(point.position.y()) << ','
           << FormatDouble(point.position.z()) << ','
           << point.observations.size() << ',' << FormatDouble(rms) << '\n';
  }

  std::ostringstream poses;
  poses << "image_id,qw,qx,qy,qz,cx,cy,cz\n";
  for (const auto& [image, pose] : recon.poses) {
    const Eigen::Quaterniond& q = pose.rotation;
    poses << recon.image_ids.at(image) << ',' << FormatDouble(q.w()) << ','
          << FormatDouble(q.x()) << ',' << FormatDouble(q.y()) << ','
          << FormatDouble(q.z()) << ',' << FormatDouble(pose.center.x()) << ','
          << FormatDouble(pose.center.y()) << ','
          << FormatDouble(pose.center.z()) << '\n';
  }

  WriteTextFile(dir / "points.csv", points.str());
  WriteTextFile(dir / "observations.csv", observations.str());
  WriteTextFile(dir / "poses.csv", poses.str());
  WriteTextFile(dir / "camera.csv", FormatCameraCsv(recon.camera));
}

Reconstruction ImportReconstruction(const std::filesystem::path& dir,
                                    const std::vector<FeatureSet>& images) {
  Reconstruction recon;
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < images.size(); ++i) {
    recon.image_ids.push_back(images[i].image_id);
    index.emplace(images[i].image_id, i);
  }
  const auto image_index = [&](std::string_view id, const std::string& where) {
    const auto it = index.find(std::string(id));
    if (it == index.end()) {
      throw Error(ErrorCode::kInvariantViolation,
                  where + ": unknown image id '" + std::string(id) + "'");
    }
    return it->second;
  };

  recon.camera = ParseCameraCsv(ReadTextFile(dir / "camera.csv"));
  // Parsed rows view into these buffers.
  const std::string poses_csv = ReadTextFile(dir / "poses.csv");
  const std::string points_csv = ReadTextFile(dir / "points.csv");
  const std::string observations_csv = ReadTextFile(dir / "observations.csv");

  for (const auto& row : ParseCsvTable(poses_csv,
                                       "image_id,qw,qx,qy,qz,cx,cy,cz",
                                       "poses.csv")) {
    const size_t image = image_index(row[0], "poses.csv");
    Pose pose;
    pose.rotation = Eigen::Quaterniond(
        FieldDouble(row[1], "poses.csv"), FieldDouble(row[2], "poses.csv"),
        FieldDouble(row[3], "poses.csv"), FieldDouble(row[4], "poses.csv"));
    if (std::abs(pose.rotation.norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvariantViolation,
                  "poses.csv: quaternion for '" + std::string(row[0]) +
                      "' is not unit");
    }
    pose.center = {FieldDouble(row[5], "poses.csv"),
                   FieldDouble(row[6], "poses.csv"),
                   FieldDouble(row[7], "poses.csv")};
    recon.poses[image] = pose;
  }

  for (const auto& row : ParseCsvTable(points_csv,
                                       "track_id,x,y,z,n_obs,rms_px",
                                       "points.csv")) {
    ReconstructedPoint& point =
        recon.points[FieldIndex(row[0], "points.csv")];
    point.position = {FieldDouble(row[1], "points.csv"),
                      FieldDouble(row[2], "points.csv"),
                      FieldDouble(row[3], "points.csv")};
  }

  for (const auto& row :
       ParseCsvTable(observations_csv,
                     "track_id,image_id,keypoint_index", "observations.csv")) {
    const size_t track = FieldIndex(row[0], "observations.csv");
    const auto it = recon.points.find(track);
    if (it == recon.points.end()) {
      throw Error(ErrorCode::kInvariantViolation,
                  "observations.csv: unknown track " + std::to_string(track));
    }
    PointObservation obs;
    obs.image = image_index(row[1], "observations.csv");
    obs.keypoint = FieldIndex(row[2], "observations.csv");
    if (!recon.IsRegistered(obs.image) ||
        obs.keypoint >= images[obs.image].NumFeatures()) {
      throw Error(ErrorCode::kInvariantViolation,
                  "observations.csv: observation of track " +
                      std::to_string(track) + " is invalid");
    }
    obs.pixel = images[obs.image].keypoints[obs.keypoint].Position();
    it->second.observations.push_back(obs);
  }

  if (recon.poses.size() >= 2) {
    auto it = recon.poses.begin();
    recon.gauge.fixed_image = it->first;
    const Eigen::Vector3d first_center = it->second.center;
    ++it;
    recon.gauge.scale_image = it->first;
    recon.gauge.scale_axis = DominantAxis(it->second.center - first_center);
  }
  return recon;
}

}  // namespace aerotri
