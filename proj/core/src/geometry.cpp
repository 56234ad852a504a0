#include "lsc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>

namespace lsc {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidPose RigidPose::compose(const RigidPose& other) const {
  RigidPose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool RigidPose::is_valid(double tol) const {
  const Mat3 gram = rotation.transpose() * rotation;
  return (gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(rotation.determinant() - 1.0) <= tol && translation.allFinite();
}

Mat3 rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 rotation_from_euler_deg(double rx, double ry, double rz) {
  return rotation_z(deg_to_rad(rz)) * rotation_y(deg_to_rad(ry)) * rotation_x(deg_to_rad(rx));
}

std::array<double, 3> euler_deg_from_rotation(const Mat3& r) {
  // r = Rz Ry Rx: r(2,0) = -sin(ry), r(2,1) = cos(ry) sin(rx), r(1,0) = sin(rz) cos(ry).
  const double ry = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double rx = std::atan2(r(2, 1), r(2, 2));
  const double rz = std::atan2(r(1, 0), r(0, 0));
  return {rad_to_deg(rx), rad_to_deg(ry), rad_to_deg(rz)};
}

double rotation_angle_deg(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a.transpose() * b;
  const Vec3 skew(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return rad_to_deg(std::atan2(0.5 * skew.norm(), 0.5 * (rel.trace() - 1.0)));
}

double angle_between_deg(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate for nearly parallel vectors.
  return rad_to_deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

}  // namespace lsc
