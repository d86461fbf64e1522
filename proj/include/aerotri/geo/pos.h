#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aerotri/geo/gauss_kruger.h"

namespace aerotri::geo {

// GNSS precision defaults: 1 cm horizontal, 3 cm vertical.
inline constexpr double kDefaultHorizontalSigma = 0.01;
inline constexpr double kDefaultVerticalSigma = 0.03;

struct PosRecord {
  std::string image_id;
  std::variant<GeodeticCoord, ProjectedCoord> position;
  double horizontal_sigma = kDefaultHorizontalSigma;
  double vertical_sigma = kDefaultVerticalSigma;

  bool IsProjected() const {
    return std::holds_alternative<ProjectedCoord>(position);
  }
  const ProjectedCoord& Projected() const {
    return std::get<ProjectedCoord>(position);
  }
  const GeodeticCoord& Geodetic() const {
    return std::get<GeodeticCoord>(position);
  }
};

// Parses either POS CSV flavor, chosen by the header:
//   image_id,lat_deg,lon_deg,alt_m[,hsigma_m,vsigma_m]
//   image_id,easting_m,northing_m,alt_m[,hsigma_m,vsigma_m]
// Errors carry the 1-based line number.
std::vector<PosRecord> ParsePosFile(std::string_view content);

// Emits the canonical CSV for the records' coordinate flavor. All records
// must share one flavor.
std::string FormatPosFile(const std::vector<PosRecord>& records);

// Converts geodetic records to projected ones; projected records pass
// through unchanged.
std::vector<PosRecord> ProjectPosRecords(const std::vector<PosRecord>& records,
                                         const Ellipsoid& ellipsoid,
                                         const ZoneConfig& zone);

}  // namespace aerotri::geo
