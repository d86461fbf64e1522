#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "aerotri/ba/bundle_adjustment.h"
#include "aerotri/features/feature_set.h"
#include "aerotri/geo/pos.h"
#include "aerotri/georef/similarity.h"
#include "aerotri/sfm/reconstruction.h"
#include "aerotri/sfm/two_view.h"

namespace aerotri {

// Per-axis errors with horizontal and total compositions taken on
// magnitudes. The axis fields keep their sign.
struct AxisErrors {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double xy = 0.0;
  double xyz = 0.0;
};

AxisErrors ComposeAxisErrors(double x, double y, double z);

// POS position (easting, northing, altitude) per image index, matched by
// image id. Geodetic records must be projected beforehand.
std::map<size_t, Eigen::Vector3d> PosPositions(
    const Reconstruction& recon, const std::vector<geo::PosRecord>& pos);

// Per-axis RMSE over registered cameras between reconstructed centers and
// POS positions. Throws MissingPos when a registered image has no projected
// POS record.
AxisErrors CameraPositionErrors(const Reconstruction& recon,
                                const std::vector<geo::PosRecord>& pos);

struct CheckpointObservation {
  std::string image_id;
  Keypoint keypoint;
};

// Triangulates the checkpoint from its observations in registered images and
// returns the signed error estimate - truth. Throws DegenerateGeometry with
// fewer than two usable observations.
AxisErrors CheckpointError(const Reconstruction& recon,
                           const std::vector<CheckpointObservation>& observations,
                           const Eigen::Vector3d& truth);

struct ReprojectionReport {
  size_t num_residuals = 0;
  double mean = 0.0;
  double rms = 0.0;
};

// Reprojection error over both observations of every triangulated point of
// the pair. Throws EmptyPair when nothing was triangulated.
ReprojectionReport RelativeOrientationReport(const TwoViewGeometry& geometry);

// Route (a): similarity from reconstructed centers to POS positions applied
// to the whole reconstruction.
SimilarityTransform AlignToPos(Reconstruction* recon,
                               const std::vector<geo::PosRecord>& pos);

// Route (b): AlignToPos, then bundle adjustment with the POS positions as
// center priors (horizontal and vertical sigmas from the records) instead of
// a fixed datum. Runs in a frame centered on the POS centroid.
BAResult AdjustWithPosPriors(Reconstruction* recon,
                             const std::vector<geo::PosRecord>& pos,
                             const SolverOptions& solver = {},
                             const LossSpec& loss = {});

struct ReportRow {
  std::string section;
  std::string scene;
  std::string metric;
  double value = 0.0;
};

void AppendAxisErrors(const std::string& section, const std::string& scene,
                      const AxisErrors& errors, std::vector<ReportRow>* rows);

// Header `section,scene,metric,value`, preceded by `#` comment lines that
// document the aggregation of each section.
std::string FormatReportCsv(const std::vector<ReportRow>& rows);

}  // namespace aerotri
