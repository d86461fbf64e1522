#pragma once

namespace aerotri::geo {

struct GeodeticCoord {
  double latitude = 0.0;   // degrees, [-90, 90]
  double longitude = 0.0;  // degrees, (-180, 180]
  double altitude = 0.0;   // meters above the ellipsoid
};

struct ProjectedCoord {
  double easting = 0.0;   // meters, false easting included
  double northing = 0.0;  // meters
  double altitude = 0.0;  // meters, carried through untouched
};

struct Ellipsoid {
  double semi_major_axis = 6378137.0;
  double inverse_flattening = 298.257222101;

  double Flattening() const { return 1.0 / inverse_flattening; }
  double EccentricitySquared() const;
  // n = f / (2 - f); the Krueger series are expanded in this quantity.
  double ThirdFlattening() const;

  void Validate() const;
};

struct ZoneConfig {
  double central_meridian = 0.0;  // degrees
  double false_easting = 500000.0;  // meters
  double scale_factor = 1.0;

  void Validate() const;
};

// Largest allowed |longitude - central_meridian| for the forward mapping.
inline constexpr double kMaxZoneOffsetDegrees = 3.5;

// Transverse Mercator forward mapping (Krueger series to sixth order in the
// third flattening). Throws OutOfZone when the point is more than 3.5 degrees
// from the central meridian.
ProjectedCoord GeodeticToGaussKruger(const GeodeticCoord& p,
                                     const Ellipsoid& ellipsoid = {},
                                     const ZoneConfig& zone = {});

// Inverse mapping. The conformal-to-geodetic latitude step is solved by
// Newton iteration and throws NoConvergence after 50 iterations.
GeodeticCoord GaussKrugerToGeodetic(const ProjectedCoord& p,
                                    const Ellipsoid& ellipsoid = {},
                                    const ZoneConfig& zone = {});

}  // namespace aerotri::geo
