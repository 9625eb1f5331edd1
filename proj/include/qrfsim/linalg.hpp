#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace qrfsim {

// Positions are always stored as 3-vectors; components beyond the scenario
// dimension stay zero.
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline double max_abs_component(const Vec3& v) { return v.cwiseAbs().maxCoeff(); }

inline bool within(const Vec3& a, const Vec3& b, double tol) {
  return max_abs_component(a - b) <= tol;
}

/// Truncates to the first `dimension` components (the rest are zeroed).
inline Vec3 project_to_dimension(const Vec3& v, int dimension) {
  Vec3 out = Vec3::Zero();
  for (int k = 0; k < dimension; ++k) out[k] = v[k];
  return out;
}

}  // namespace qrfsim
