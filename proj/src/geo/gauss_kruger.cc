#include "aerotri/geo/gauss_kruger.h"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "aerotri/common/error.h"

namespace aerotri::geo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr int kOrder = 6;
constexpr int kMaxInverseIterations = 50;

struct SeriesCoefficients {
  double rectifying_radius = 0.0;
  // Index j holds the coefficient of the (j+1)-th harmonic.
  std::array<double, kOrder> alpha{};
  std::array<double, kOrder> beta{};
};

SeriesCoefficients ComputeCoefficients(const Ellipsoid& ellipsoid) {
  const double n = ellipsoid.ThirdFlattening();
  const double n2 = n * n;
  const double n3 = n2 * n;
  const double n4 = n3 * n;
  const double n5 = n4 * n;
  const double n6 = n5 * n;

  SeriesCoefficients c;
  c.rectifying_radius = ellipsoid.semi_major_axis / (1.0 + n) *
                        (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);

  c.alpha[0] = n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 +
               41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 +
               7891.0 * n6 / 37800.0;
  c.alpha[1] = 13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 +
               281.0 * n5 / 630.0 - 1983433.0 * n6 / 1935360.0;
  c.alpha[2] = 61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 +
               15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0;
  c.alpha[3] = 49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 +
               6601661.0 * n6 / 7257600.0;
  c.alpha[4] = 34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0;
  c.alpha[5] = 212378941.0 * n6 / 319334400.0;

  c.beta[0] = n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 -
              81.0 * n5 / 512.0 + 96199.0 * n6 / 604800.0;
  c.beta[1] = n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 +
              46.0 * n5 / 105.0 - 1118711.0 * n6 / 3870720.0;
  c.beta[2] = 17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 +
              5569.0 * n6 / 90720.0;
  c.beta[3] = 4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 -
              830251.0 * n6 / 7257600.0;
  c.beta[4] = 4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0;
  c.beta[5] = 20648693.0 * n6 / 638668800.0;
  return c;
}

// tan of the conformal latitude as a function of tan of the geodetic
// latitude.
double ConformalTangent(double tau, double e) {
  const double tau1 = std::hypot(1.0, tau);
  const double sigma = std::sinh(e * std::atanh(e * tau / tau1));
  return tau * std::hypot(1.0, sigma) - sigma * tau1;
}

// Inverts ConformalTangent by Newton's method.
double GeodeticTangent(double taup, double e) {
  const double e2 = e * e;
  const double e2m = 1.0 - e2;
  constexpr double kTolerance = 1e-15;
  double tau = taup / e2m;
  for (int iter = 0; iter < kMaxInverseIterations; ++iter) {
    const double taupa = ConformalTangent(tau, e);
    const double dtau = (taup - taupa) * (1.0 + e2m * tau * tau) /
                        (e2m * std::hypot(1.0, tau) * std::hypot(1.0, taupa));
    tau += dtau;
    if (!std::isfinite(tau)) {
      break;
    }
    if (std::abs(dtau) <= kTolerance * std::max(1.0, std::abs(tau))) {
      return tau;
    }
  }
  throw Error(ErrorCode::kNoConvergence,
              "geodetic latitude iteration did not converge in " +
                  std::to_string(kMaxInverseIterations) + " iterations");
}

double WrapDegrees(double angle) {
  angle = std::remainder(angle, 360.0);
  return angle == -180.0 ? 180.0 : angle;
}

}  // namespace

double Ellipsoid::EccentricitySquared() const {
  const double f = Flattening();
  return f * (2.0 - f);
}

double Ellipsoid::ThirdFlattening() const {
  const double f = Flattening();
  return f / (2.0 - f);
}

void Ellipsoid::Validate() const {
  if (!(semi_major_axis > 0.0) || !(inverse_flattening > 1.0)) {
    throw Error(ErrorCode::kConfigError,
                "ellipsoid requires a > 0 and 1/f > 1");
  }
}

void ZoneConfig::Validate() const {
  if (!(scale_factor > 0.0) || !std::isfinite(central_meridian) ||
      !std::isfinite(false_easting)) {
    throw Error(ErrorCode::kConfigError,
                "zone requires a finite central meridian and scale > 0");
  }
}

ProjectedCoord GeodeticToGaussKruger(const GeodeticCoord& p,
                                     const Ellipsoid& ellipsoid,
                                     const ZoneConfig& zone) {
  ellipsoid.Validate();
  zone.Validate();
  if (!(std::abs(p.latitude) <= 90.0) || !std::isfinite(p.longitude)) {
    throw Error(ErrorCode::kOutOfZone, "latitude outside [-90, 90]");
  }
  const double dlon = WrapDegrees(p.longitude - zone.central_meridian);
  if (std::abs(dlon) > kMaxZoneOffsetDegrees) {
    throw Error(ErrorCode::kOutOfZone,
                "longitude " + std::to_string(p.longitude) +
                    " is more than 3.5 deg from central meridian " +
                    std::to_string(zone.central_meridian));
  }

  const SeriesCoefficients c = ComputeCoefficients(ellipsoid);
  const double e = std::sqrt(ellipsoid.EccentricitySquared());
  const double lambda = dlon * kDegToRad;

  double xip;
  double etap;
  if (std::abs(p.latitude) == 90.0) {
    xip = std::copysign(std::numbers::pi / 2.0, p.latitude);
    etap = 0.0;
  } else {
    const double tau = std::tan(p.latitude * kDegToRad);
    const double taup = ConformalTangent(tau, e);
    const double cos_lambda = std::cos(lambda);
    xip = std::atan2(taup, cos_lambda);
    etap = std::asinh(std::sin(lambda) / std::hypot(taup, cos_lambda));
  }

  double xi = xip;
  double eta = etap;
  for (int j = 1; j <= kOrder; ++j) {
    const double alpha = c.alpha[j - 1];
    xi += alpha * std::sin(2.0 * j * xip) * std::cosh(2.0 * j * etap);
    eta += alpha * std::cos(2.0 * j * xip) * std::sinh(2.0 * j * etap);
  }

  const double k = zone.scale_factor * c.rectifying_radius;
  return ProjectedCoord{zone.false_easting + k * eta, k * xi, p.altitude};
}

GeodeticCoord GaussKrugerToGeodetic(const ProjectedCoord& p,
                                    const Ellipsoid& ellipsoid,
                                    const ZoneConfig& zone) {
  ellipsoid.Validate();
  zone.Validate();
  if (!std::isfinite(p.easting) || !std::isfinite(p.northing) ||
      !std::isfinite(p.altitude)) {
    throw Error(ErrorCode::kNoConvergence, "non-finite projected coordinate");
  }

  const SeriesCoefficients c = ComputeCoefficients(ellipsoid);
  const double e = std::sqrt(ellipsoid.EccentricitySquared());
  const double k = zone.scale_factor * c.rectifying_radius;
  const double xi = p.northing / k;
  const double eta = (p.easting - zone.false_easting) / k;

  double xip = xi;
  double etap = eta;
  for (int j = 1; j <= kOrder; ++j) {
    const double beta = c.beta[j - 1];
    xip -= beta * std::sin(2.0 * j * xi) * std::cosh(2.0 * j * eta);
    etap -= beta * std::cos(2.0 * j * xi) * std::sinh(2.0 * j * eta);
  }

  const double sinh_etap = std::sinh(etap);
  const double cos_xip = std::cos(xip);
  const double taup = std::sin(xip) / std::hypot(sinh_etap, cos_xip);
  const double lambda = std::atan2(sinh_etap, cos_xip);
  const double tau = GeodeticTangent(taup, e);

  GeodeticCoord out;
  out.latitude = std::atan(tau) * kRadToDeg;
  out.longitude = WrapDegrees(zone.central_meridian + lambda * kRadToDeg);
  out.altitude = p.altitude;
  return out;
}

}  // namespace aerotri::geo
