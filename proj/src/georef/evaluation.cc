#include "aerotri/georef/evaluation.h"

#include <cmath>
#include <sstream>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"
#include "aerotri/geometry/triangulation.h"
#include "aerotri/sfm/bundle_problem.h"

namespace aerotri {
namespace {

const geo::PosRecord* FindRecord(const std::vector<geo::PosRecord>& pos,
                                 const std::string& image_id) {
  for (const geo::PosRecord& r : pos) {
    if (r.image_id == image_id) return &r;
  }
  return nullptr;
}

void CollectAlignmentPairs(const Reconstruction& recon,
                           const std::vector<geo::PosRecord>& pos,
                           std::vector<Eigen::Vector3d>* source,
                           std::vector<Eigen::Vector3d>* target) {
  for (const auto& [image, position] : PosPositions(recon, pos)) {
    source->push_back(recon.poses.at(image).center);
    target->push_back(position);
  }
}

}  // namespace

AxisErrors ComposeAxisErrors(double x, double y, double z) {
  AxisErrors e;
  e.x = x;
  e.y = y;
  e.z = z;
  e.xy = std::hypot(x, y);
  e.xyz = std::hypot(e.xy, z);
  return e;
}

std::map<size_t, Eigen::Vector3d> PosPositions(
    const Reconstruction& recon, const std::vector<geo::PosRecord>& pos) {
  std::map<size_t, Eigen::Vector3d> out;
  for (const auto& [image, pose] : recon.poses) {
    const std::string& id = recon.image_ids.at(image);
    const geo::PosRecord* record = FindRecord(pos, id);
    if (record == nullptr || !record->IsProjected()) {
      throw Error(ErrorCode::kMissingPos,
                  "no projected POS record for image '" + id + "'");
    }
    const geo::ProjectedCoord& p = record->Projected();
    out.emplace(image, Eigen::Vector3d(p.easting, p.northing, p.altitude));
  }
  return out;
}

AxisErrors CameraPositionErrors(const Reconstruction& recon,
                                const std::vector<geo::PosRecord>& pos) {
  const std::map<size_t, Eigen::Vector3d> positions = PosPositions(recon, pos);
  Eigen::Vector3d sq = Eigen::Vector3d::Zero();
  for (const auto& [image, position] : positions) {
    sq += (recon.poses.at(image).center - position).cwiseAbs2();
  }
  if (!positions.empty()) {
    sq /= static_cast<double>(positions.size());
  }
  return ComposeAxisErrors(std::sqrt(sq.x()), std::sqrt(sq.y()),
                           std::sqrt(sq.z()));
}

AxisErrors CheckpointError(const Reconstruction& recon,
                           const std::vector<CheckpointObservation>& observations,
                           const Eigen::Vector3d& truth) {
  std::vector<TriangulationObservation> obs;
  for (const CheckpointObservation& o : observations) {
    for (const auto& [image, pose] : recon.poses) {
      if (recon.image_ids.at(image) == o.image_id) {
        obs.push_back({pose, recon.camera, o.keypoint});
        break;
      }
    }
  }
  if (obs.size() < 2) {
    throw Error(ErrorCode::kDegenerateGeometry,
                "checkpoint observed in fewer than two registered images");
  }
  const Eigen::Vector3d estimate = Triangulate(obs);
  const Eigen::Vector3d d = estimate - truth;
  return ComposeAxisErrors(d.x(), d.y(), d.z());
}

ReprojectionReport RelativeOrientationReport(const TwoViewGeometry& geometry) {
  if (geometry.points.empty()) {
    throw Error(ErrorCode::kEmptyPair, "relative orientation has no points");
  }
  ReprojectionReport report;
  double sum = 0.0;
  double sq = 0.0;
  for (const TwoViewPoint& p : geometry.points) {
    const Keypoint ka{p.pixel_a.x(), p.pixel_a.y(), 0.0};
    const Keypoint kb{p.pixel_b.x(), p.pixel_b.y(), 0.0};
    for (const double err :
         {ReprojectionError(p.position, geometry.pose_a, geometry.camera, ka),
          ReprojectionError(p.position, geometry.pose_b, geometry.camera, kb)}) {
      sum += err;
      sq += err * err;
      ++report.num_residuals;
    }
  }
  const auto n = static_cast<double>(report.num_residuals);
  report.mean = sum / n;
  report.rms = std::sqrt(sq / n);
  return report;
}

SimilarityTransform AlignToPos(Reconstruction* recon,
                               const std::vector<geo::PosRecord>& pos) {
  std::vector<Eigen::Vector3d> source;
  std::vector<Eigen::Vector3d> target;
  CollectAlignmentPairs(*recon, pos, &source, &target);
  const SimilarityTransform transform = EstimateSimilarity(source, target);
  *recon = ApplySimilarity(*recon, transform);
  return transform;
}

BAResult AdjustWithPosPriors(Reconstruction* recon,
                             const std::vector<geo::PosRecord>& pos,
                             const SolverOptions& solver,
                             const LossSpec& loss) {
  AlignToPos(recon, pos);
  const std::map<size_t, Eigen::Vector3d> positions = PosPositions(*recon, pos);
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (const auto& [image, p] : positions) origin += p;
  origin /= static_cast<double>(positions.size());

  SimilarityTransform to_local;
  to_local.translation = -origin;
  *recon = ApplySimilarity(*recon, to_local);

  BundleOptions options;
  options.fix_gauge_anchor = false;
  options.loss = loss;
  for (const auto& [image, p] : positions) {
    const geo::PosRecord* record = FindRecord(pos, recon->image_ids.at(image));
    CenterPrior prior;
    prior.center = p - origin;
    prior.sigma = {record->horizontal_sigma, record->horizontal_sigma,
                   record->vertical_sigma};
    options.priors.emplace(image, prior);
  }
  const BAResult result = AdjustBundle(recon, options, solver);
  *recon = ApplySimilarity(*recon, to_local.Inverse());
  return result;
}

void AppendAxisErrors(const std::string& section, const std::string& scene,
                      const AxisErrors& errors, std::vector<ReportRow>* rows) {
  rows->push_back({section, scene, "x", errors.x});
  rows->push_back({section, scene, "y", errors.y});
  rows->push_back({section, scene, "z", errors.z});
  rows->push_back({section, scene, "xy", errors.xy});
  rows->push_back({section, scene, "xyz", errors.xyz});
}

std::string FormatReportCsv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "# relative_orientation: mean_px and rms_px over both observations "
         "of every triangulated inlier of the pair\n"
      << "# bundle_adjustment: mean_px and rms_px over all observations "
         "after the final adjustment\n"
      << "# camera_position: per-axis RMSE over registered cameras against "
         "POS; xy = hypot(x, y), xyz = hypot(xy, z)\n"
      << "# checkpoint: signed error estimate - truth per axis; xy and xyz "
         "on magnitudes\n"
      << "section,scene,metric,value\n";
  for (const ReportRow& row : rows) {
    out << row.section << ',' << row.scene << ',' << row.metric << ','
        << FormatDouble(row.value) << '\n';
  }
  return out.str();
}

}  // namespace aerotri
