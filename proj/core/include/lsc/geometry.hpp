#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lsc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Integer voxel index (x, y, z).
struct Index3 {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  friend bool operator==(const Index3&, const Index3&) = default;
};

/// Rotation plus translation in millimeters. Maps p to rotation * p + translation.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidPose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidPose inverse() const;
  /// (this ∘ other)(p) = this(other(p)).
  RigidPose compose(const RigidPose& other) const;

  /// True when R^T R = I and det R = 1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

Mat3 rotation_x(double radians);
Mat3 rotation_y(double radians);
Mat3 rotation_z(double radians);

/// Extrinsic x-then-y-then-z rotation: Rz(rz) * Ry(ry) * Rx(rx). Angles in degrees.
Mat3 rotation_from_euler_deg(double rx, double ry, double rz);

/// Inverse of rotation_from_euler_deg for |ry| < 90 degrees.
std::array<double, 3> euler_deg_from_rotation(const Mat3& r);

/// Geodesic angle between two rotations, in degrees.
double rotation_angle_deg(const Mat3& a, const Mat3& b);

/// Angle between two vectors in degrees.
double angle_between_deg(const Vec3& a, const Vec3& b);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

}  // namespace lsc
