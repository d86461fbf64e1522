#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "aerotri/features/feature_set.h"
#include "aerotri/geometry/camera.h"

namespace aerotri::testing {

inline CameraModel TestCamera() {
  CameraModel camera;
  camera.fx = 1000.0;
  camera.fy = 1000.0;
  camera.cx = 500.0;
  camera.cy = 375.0;
  return camera;
}

inline Eigen::Quaterniond RandomRotation(std::mt19937_64& rng,
                                         double max_angle_rad) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, max_angle_rad);
  Eigen::Vector3d axis(normal(rng), normal(rng), normal(rng));
  axis.normalize();
  return Eigen::Quaterniond(Eigen::AngleAxisd(uniform(rng), axis));
}

// Camera at `center` looking down the world -z axis, perturbed by a small
// random rotation.
inline Pose NadirPose(const Eigen::Vector3d& center, std::mt19937_64& rng,
                      double tilt_rad) {
  Eigen::Matrix3d nadir;
  nadir << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  Pose pose;
  pose.rotation = RandomRotation(rng, tilt_rad) * Eigen::Quaterniond(nadir);
  pose.rotation.normalize();
  pose.center = center;
  return pose;
}

// Pose whose optical axis points from `center` towards `target`.
inline Pose LookAt(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                   const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ()) {
  const Eigen::Vector3d z = (target - center).normalized();
  Eigen::Vector3d x = z.cross(up);
  if (x.norm() < 1e-9) x = z.cross(Eigen::Vector3d::UnitX());
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  Pose pose;
  pose.rotation = Eigen::Quaterniond(r);
  pose.center = center;
  return pose;
}

// Pixel of a world point, computed directly from the camera equations.
inline Eigen::Vector2d ProjectPixel(const CameraModel& camera, const Pose& pose,
                                    const Eigen::Vector3d& world) {
  const Eigen::Vector3d c = pose.rotation.toRotationMatrix() * (world - pose.center);
  const double x = c.x() / c.z();
  const double y = c.y() / c.z();
  const double r2 = x * x + y * y;
  const double f = 1.0 + camera.k1 * r2 + camera.k2 * r2 * r2;
  return {camera.fx * f * x + camera.cx, camera.fy * f * y + camera.cy};
}

inline Keypoint ProjectKeypoint(const CameraModel& camera, const Pose& pose,
                                const Eigen::Vector3d& world) {
  const Eigen::Vector2d p = ProjectPixel(camera, pose, world);
  return {p.x(), p.y(), 1.0};
}

inline double DepthIn(const Pose& pose, const Eigen::Vector3d& world) {
  return (pose.rotation.toRotationMatrix() * (world - pose.center)).z();
}

// Random unit descriptors, one per row.
inline DescriptorMatrix RandomDescriptors(std::mt19937_64& rng, int rows,
                                          int dim) {
  std::normal_distribution<double> normal;
  DescriptorMatrix d(rows, dim);
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < dim; ++k) d(i, k) = normal(rng);
    d.row(i).normalize();
  }
  return d;
}

inline FeatureSet MakeFeatureSet(const std::string& id,
                                 const DescriptorMatrix& descriptors,
                                 uint32_t width = 1000, uint32_t height = 750) {
  FeatureSet fs;
  fs.image_id = id;
  fs.image_width = width;
  fs.image_height = height;
  fs.descriptors = descriptors;
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
    fs.keypoints.push_back({static_cast<double>(i % width),
                            static_cast<double>(i / width), 1.0});
  }
  return fs;
}

}  // namespace aerotri::testing
