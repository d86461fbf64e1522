#include "aerotri/geo/pos.h"

#include <cmath>
#include <optional>
#include <unordered_set>

#include "aerotri/common/error.h"
#include "aerotri/common/text_io.h"

namespace aerotri::geo {
namespace {

[[noreturn]] void ThrowParse(size_t line_number, const std::string& what) {
  throw Error(ErrorCode::kParseError,
              "line " + std::to_string(line_number) + ": " + what);
}

double RequireNumber(std::string_view field, size_t line_number,
                     const char* name) {
  const std::optional<double> value = ParseDouble(field);
  if (!value) {
    ThrowParse(line_number,
               std::string("invalid ") + name + " '" + std::string(field) + "'");
  }
  return *value;
}

}  // namespace

std::vector<PosRecord> ParsePosFile(std::string_view content) {
  const std::vector<std::string_view> lines = SplitLines(content);
  if (lines.empty()) {
    ThrowParse(1, "missing header");
  }

  const std::vector<std::string_view> header = SplitCsvFields(lines[0]);
  bool projected = false;
  if (header.size() >= 4 && header[0] == "image_id" &&
      header[1] == "lat_deg" && header[2] == "lon_deg" &&
      header[3] == "alt_m") {
    projected = false;
  } else if (header.size() >= 4 && header[0] == "image_id" &&
             header[1] == "easting_m" && header[2] == "northing_m" &&
             header[3] == "alt_m") {
    projected = true;
  } else {
    ThrowParse(1, "unrecognized header '" + std::string(lines[0]) + "'");
  }
  const bool has_sigmas = header.size() == 6;
  if (header.size() != 4 &&
      !(has_sigmas && header[4] == "hsigma_m" && header[5] == "vsigma_m")) {
    ThrowParse(1, "unrecognized header '" + std::string(lines[0]) + "'");
  }

  std::vector<PosRecord> records;
  std::unordered_set<std::string> seen;
  for (size_t i = 1; i < lines.size(); ++i) {
    const size_t line_number = i + 1;
    if (Trim(lines[i]).empty()) {
      continue;
    }
    const std::vector<std::string_view> fields = SplitCsvFields(lines[i]);
    if (fields.size() != 4 && fields.size() != 6) {
      ThrowParse(line_number, "expected 4 or 6 fields, got " +
                                  std::to_string(fields.size()));
    }
    if (fields.size() == 6 && !has_sigmas) {
      ThrowParse(line_number, "sigma columns not declared in header");
    }
    if (fields[0].empty()) {
      ThrowParse(line_number, "empty image_id");
    }

    PosRecord record;
    record.image_id = std::string(fields[0]);
    const double c1 = RequireNumber(fields[1], line_number,
                                    projected ? "easting_m" : "lat_deg");
    const double c2 = RequireNumber(fields[2], line_number,
                                    projected ? "northing_m" : "lon_deg");
    const double alt = RequireNumber(fields[3], line_number, "alt_m");
    if (projected) {
      record.position = ProjectedCoord{c1, c2, alt};
    } else {
      if (c1 < -90.0 || c1 > 90.0) {
        ThrowParse(line_number, "latitude out of range [-90, 90]");
      }
      if (c2 <= -180.0 || c2 > 180.0) {
        ThrowParse(line_number, "longitude out of range (-180, 180]");
      }
      record.position = GeodeticCoord{c1, c2, alt};
    }
    if (fields.size() == 6) {
      record.horizontal_sigma = RequireNumber(fields[4], line_number,
                                              "hsigma_m");
      record.vertical_sigma = RequireNumber(fields[5], line_number,
                                            "vsigma_m");
      if (!(record.horizontal_sigma > 0.0) ||
          !(record.vertical_sigma > 0.0)) {
        ThrowParse(line_number, "sigmas must be positive");
      }
    }
    if (!seen.insert(record.image_id).second) {
      throw Error(ErrorCode::kDuplicateImageId,
                  "line " + std::to_string(line_number) + ": image_id '" +
                      record.image_id + "' repeated");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::string FormatPosFile(const std::vector<PosRecord>& records) {
  const bool projected = records.empty() || records.front().IsProjected();
  std::string out = projected
                        ? "image_id,easting_m,northing_m,alt_m,hsigma_m,vsigma_m\n"
                        : "image_id,lat_deg,lon_deg,alt_m,hsigma_m,vsigma_m\n";
  for (const PosRecord& r : records) {
    if (r.IsProjected() != projected) {
      throw Error(ErrorCode::kInvariantViolation,
                  "mixed coordinate flavors in POS records");
    }
    out += r.image_id;
    if (projected) {
      const ProjectedCoord& p = r.Projected();
      out += "," + FormatDouble(p.easting) + "," + FormatDouble(p.northing) +
             "," + FormatDouble(p.altitude);
    } else {
      const GeodeticCoord& g = r.Geodetic();
      out += "," + FormatDouble(g.latitude) + "," + FormatDouble(g.longitude) +
             "," + FormatDouble(g.altitude);
    }
    out += "," + FormatDouble(r.horizontal_sigma) + "," +
           FormatDouble(r.vertical_sigma) + "\n";
  }
  return out;
}

std::vector<PosRecord> ProjectPosRecords(const std::vector<PosRecord>& records,
                                         const Ellipsoid& ellipsoid,
                                         const ZoneConfig& zone) {
  std::vector<PosRecord> out;
  out.reserve(records.size());
  for (const PosRecord& r : records) {
    PosRecord projected = r;
    if (!r.IsProjected()) {
      projected.position = GeodeticToGaussKruger(r.Geodetic(), ellipsoid, zone);
    }
    out.push_back(std::move(projected));
  }
  return out;
}

}  // namespace aerotri::geo
