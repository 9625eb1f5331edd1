#pragma once

#include "qrfsim/error.hpp"
#include "qrfsim/linalg.hpp"

#include <cmath>
#include <numbers>
#include <span>

namespace qrfsim {

/// Angle between the reference axis e1 and a vector a, together with the axis
/// u = (e1 x a)/|e1 x a|. In two dimensions the axis is fixed to +z and the
/// angle is signed in (-pi, pi]; in three dimensions the angle lies in [0, pi].
struct RotationSpec {
  double angle = 0.0;  // rad
  Vec3 axis = Vec3::UnitZ();
  int dimension = 3;
};

/// Rotation by `angle` about the unit vector `axis` (right-hand rule).
inline Mat3 axis_angle_matrix(double angle, const Vec3& axis) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double t = 1.0 - c;
  const double x = axis.x(), y = axis.y(), z = axis.z();
  Mat3 r;
  r << c + x * x * t, x * y * t - z * s, x * z * t + y * s,  //
      y * x * t + z * s, c + y * y * t, y * z * t - x * s,  //
      z * x * t - y * s, z * y * t + x * s, c + z * z * t;
  return r;
}

/// Lexicographically smallest unit vector orthogonal to the unit vector `n`.
inline Vec3 lexicographic_orthogonal(const Vec3& n) {
  for (int k = 0; k < 3; ++k) {
    Vec3 p = Vec3::Unit(k) - n[k] * n;
    const double len = p.norm();
    if (len > 1e-12) return -p / len;
  }
  return Vec3::UnitX();  // unreachable for unit n
}

inline RotationSpec rotation_from_vectors(const Vec3& e1, const Vec3& a, int dimension = 3) {
  const double ne = e1.norm();
  const double na = a.norm();
  if (!(ne > 0.0) || !(na > 0.0)) fail(ErrorCode::ZeroVector, "rotation generators must be non-zero");
  const Vec3 ue = e1 / ne;
  const Vec3 ua = a / na;
  RotationSpec spec;
  spec.dimension = dimension;
  if (dimension == 2) {
    const double cross = ue.x() * ua.y() - ue.y() * ua.x();
    const double dot = ue.x() * ua.x() + ue.y() * ua.y();
    double angle = std::atan2(cross, dot);
    if (angle <= -std::numbers::pi) angle = std::numbers::pi;
    spec.angle = angle;
    spec.axis = Vec3::UnitZ();
    return spec;
  }
  const Vec3 cross = ue.cross(ua);
  const double sin_angle = cross.norm();
  const double cos_angle = std::clamp(ue.dot(ua), -1.0, 1.0);
  spec.angle = std::atan2(sin_angle, cos_angle);
  if (sin_angle > 1e-15) {
    spec.axis = cross / sin_angle;
  } else if (cos_angle > 0.0) {
    spec.angle = 0.0;
    spec.axis = lexicographic_orthogonal(ue);
  } else {
    // Antiparallel: any half-turn about an axis orthogonal to e1 works.
    spec.angle = std::numbers::pi;
    spec.axis = lexicographic_orthogonal(ue);
  }
  return spec;
}

/// The aligning rotation of a spec: R(-angle) about its axis, which takes the
/// direction of a onto the direction of e1.
inline Mat3 rotation_matrix(const RotationSpec& spec) {
  if (spec.dimension == 2) {
    const double c = std::cos(spec.angle);
    const double s = std::sin(spec.angle);
    Mat3 r = Mat3::Identity();
    r(0, 0) = c;
    r(0, 1) = s;
    r(1, 0) = -s;
    r(1, 1) = c;
    return r;
  }
  return axis_angle_matrix(-spec.angle, spec.axis);
}

/// Euclidean isometry x -> rotation * x + translation.
struct RigidMap {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 operator()(const Vec3& x) const { return rotation * x + translation; }
  RigidMap inverse() const {
    RigidMap inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }
};

/// Proper rigid map taking `from` onto `to` in the least-squares sense
/// (Kabsch alignment). Dimension 2 aligns in the xy-plane only.
inline RigidMap rigid_map_between(std::span<const Vec3> from, std::span<const Vec3> to, int dimension = 3) {
  if (from.size() != to.size() || from.empty()) {
    fail(ErrorCode::ValidationError, "rigid alignment needs two non-empty configurations of equal size");
  }
  const int d = dimension;
  Eigen::Vector3d cf = Vec3::Zero(), ct = Vec3::Zero();
  for (std::size_t i = 0; i < from.size(); ++i) {
    cf += from[i];
    ct += to[i];
  }
  cf /= static_cast<double>(from.size());
  ct /= static_cast<double>(to.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < from.size(); ++i) {
    cov += (from[i] - cf).head(d) * (to[i] - ct).head(d).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::MatrixXd correction = Eigen::MatrixXd::Identity(d, d);
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) correction(d - 1, d - 1) = -1.0;
  const Eigen::MatrixXd rot = svd.matrixV() * correction * svd.matrixU().transpose();
  RigidMap map;
  map.rotation.topLeftCorner(d, d) = rot;
  map.translation = ct - map.rotation * cf;
  return map;
}

}  // namespace qrfsim
