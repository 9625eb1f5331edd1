#pragma once

// Quantum-reference-frame changes acting branchwise on BranchState values.
//
// qrf_supp1 / qrf_shift_one_mass  controlled translation plus parity swap.
// s_r_to_m / s_r_to_m_inverse     N-mass change into the frame of the masses:
//                                 relative coordinates, controlled rotation and
//                                 shift, generalized parity swap, back to
//                                 ordinary coordinates.
// ancilla_transform               branch-tag controlled coordinate maps.

#include "qrfsim/error.hpp"
#include "qrfsim/linalg.hpp"
#include "qrfsim/rotation.hpp"
#include "qrfsim/state.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qrfsim {

// ---------------------------------------------------------------------------
// Translations

/// S^{A->B}: shifts every system by minus the position of `new_frame` in each
/// branch, so `new_frame` sits at the origin and the old frame appears at
/// minus its former coordinate. Amplitudes are untouched.
inline BranchState qrf_supp1(BranchState state, const SystemId& new_frame) {
  state.registry.at(new_frame);
  if (state.registry.at(new_frame).kind == SystemKind::ancilla) {
    fail(ErrorCode::ValidationError, "an ancilla carries no position and cannot serve as frame");
  }
  if (state.frame && *state.frame == new_frame) {
    fail(ErrorCode::ValidationError, "state is already in the frame of '" + new_frame.label + "'");
  }
  for (auto& b : state.branches) {
    const Vec3 shift = b.position(new_frame);
    const Vec3 boost = b.velocity(new_frame);
    for (auto& [id, x] : b.positions) x -= shift;
    b.positions[new_frame] = Vec3::Zero();
    if (boost.squaredNorm() > 0.0) {
      for (const auto& id : state.registry.positioned()) b.velocities[id] = b.velocity(id) - boost;
    }
    b.velocities.erase(new_frame);
  }
  state.frame = new_frame;
  return state;
}

/// One-mass change of frame R -> M (and back, by passing the old frame).
inline BranchState qrf_shift_one_mass(BranchState state, const SystemId& new_frame) {
  if (!state.frame) fail(ErrorCode::ValidationError, "state has no frame system to change away from");
  return qrf_supp1(std::move(state), new_frame);
}

// ---------------------------------------------------------------------------
// Relative coordinates of the mass configuration

/// Origin x1, axes a, b (, c) spanning the configuration, and for every further
/// mass the coefficients r_n with x_n - x1 = sum_k r_n^k axis_k.
struct RelCoords {
  Vec3 origin = Vec3::Zero();
  std::vector<Vec3> axes;
  std::vector<Vec3> residuals;
};

namespace detail {

inline void require_rigid_dimension(int dimension) {
  if (dimension != 2 && dimension != 3) {
    fail(ErrorCode::ValidationError, "mass-frame change with rotations needs dimension 2 or 3");
  }
}

inline RelCoords relative_coordinates(const Branch& b, const std::vector<SystemId>& masses, int dimension) {
  const std::size_t n_axes = static_cast<std::size_t>(dimension);
  if (masses.size() < n_axes + 1) {
    fail(ErrorCode::SingularDecomposition, "need at least " + std::to_string(n_axes + 1) + " masses in dimension " +
                                               std::to_string(dimension));
  }
  RelCoords rc;
  rc.origin = b.position(masses[0]);
  double scale = 0.0;
  for (std::size_t k = 1; k <= n_axes; ++k) {
    rc.axes.push_back(b.position(masses[k]) - rc.origin);
    scale = std::max(scale, rc.axes.back().norm());
  }
  Eigen::MatrixXd basis(dimension, dimension);
  for (int k = 0; k < dimension; ++k) basis.col(k) = rc.axes[k].head(dimension);
  const double det = basis.determinant();
  if (!(std::abs(det) > 1e-12 * std::pow(scale, dimension))) {
    fail(ErrorCode::SingularDecomposition, "mass axes are degenerate (|det| = " + std::to_string(std::abs(det)) + ")");
  }
  if (masses.size() > n_axes + 1) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
    for (std::size_t n = n_axes + 1; n < masses.size(); ++n) {
      const Eigen::VectorXd rhs = (b.position(masses[n]) - rc.origin).head(dimension);
      const Eigen::VectorXd r = lu.solve(rhs);
      Vec3 coeff = Vec3::Zero();
      coeff.head(dimension) = r;
      rc.residuals.push_back(coeff);
    }
  }
  return rc;
}

inline void assign_mass_positions(Branch& b, const std::vector<SystemId>& masses, const RelCoords& rc) {
  b.positions[masses[0]] = rc.origin;
  for (std::size_t k = 0; k < rc.axes.size(); ++k) b.positions[masses[k + 1]] = rc.origin + rc.axes[k];
  for (std::size_t n = 0; n < rc.residuals.size(); ++n) {
    Vec3 x = rc.origin;
    for (std::size_t k = 0; k < rc.axes.size(); ++k) x += rc.residuals[n][static_cast<int>(k)] * rc.axes[k];
    b.positions[masses[rc.axes.size() + 1 + n]] = x;
  }
}

/// Perpendicular reference direction used to fix the residual twist about e1
/// in three dimensions.
inline Vec3 twist_reference(const Vec3& unit_e1) {
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(unit_e1[k]) < std::abs(unit_e1[best])) best = k;
  }
  Vec3 w = Vec3::Unit(best) - unit_e1[best] * unit_e1;
  return w.normalized();
}

/// Proper rotation W with W a parallel to e1; in 3D additionally W b has its
/// component perpendicular to e1 along the twist reference direction.
inline Mat3 frame_rotation(const Vec3& e1, const Vec3& a, const Vec3* b, int dimension) {
  const Mat3 align = rotation_matrix(rotation_from_vectors(e1, a, dimension));
  if (dimension == 2 || b == nullptr) return align;
  const Vec3 ue = e1.normalized();
  const Vec3 rb = align * (*b);
  const Vec3 perp = rb - rb.dot(ue) * ue;
  if (!(perp.norm() > 1e-12 * b->norm())) {
    fail(ErrorCode::DegenerateAxis, "second mass axis is collinear with the first; orientation undefined");
  }
  const Vec3 p = perp.normalized();
  const Vec3 w = twist_reference(ue);
  const double twist = std::atan2(ue.dot(p.cross(w)), p.dot(w));
  return axis_angle_matrix(twist, ue) * align;
}

struct ReferencePair {
  SystemId origin;
  SystemId axis;
};

inline ReferencePair reference_pair(const SystemRegistry& registry) {
  const auto refs = registry.of_kind(SystemKind::reference);
  if (refs.size() < 2) {
    fail(ErrorCode::ValidationError, "mass-frame change with rotations needs a two-particle reference (R1, R2)");
  }
  return {refs[0], refs[1]};
}

}  // namespace detail

/// Relative coordinates of the masses in every branch. R and S are untouched.
inline std::vector<RelCoords> t_rel(const BranchState& state) {
  detail::require_rigid_dimension(state.dimension);
  const auto masses = state.masses();
  std::vector<RelCoords> out;
  out.reserve(state.branches.size());
  for (const auto& b : state.branches) out.push_back(detail::relative_coordinates(b, masses, state.dimension));
  return out;
}

/// Writes relative coordinates back as ordinary mass positions.
inline BranchState t_rel_inverse(BranchState state, const std::vector<RelCoords>& rel) {
  if (rel.size() != state.branches.size()) {
    fail(ErrorCode::IndexOutOfRange, "one RelCoords entry per branch required");
  }
  const auto masses = state.masses();
  for (std::size_t i = 0; i < rel.size(); ++i) detail::assign_mass_positions(state.branches[i], masses, rel[i]);
  return state;
}

// ---------------------------------------------------------------------------
// N-mass change into the frame of the masses

struct RigidFrameOptions {
  /// Maximal relative deviation of any inter-mass distance across branches.
  double rigidity_tolerance = 1e-9;
};

/// Largest relative deviation of inter-mass distances from branch 0.
inline double rigidity_deviation(const BranchState& state) {
  const auto masses = state.masses();
  double scale = 0.0;
  std::vector<double> ref;
  const Branch& b0 = state.branch(0);
  for (std::size_t i = 0; i < masses.size(); ++i) {
    for (std::size_t j = i + 1; j < masses.size(); ++j) {
      ref.push_back((b0.position(masses[i]) - b0.position(masses[j])).norm());
      scale = std::max(scale, ref.back());
    }
  }
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (const auto& b : state.branches) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < masses.size(); ++i) {
      for (std::size_t j = i + 1; j < masses.size(); ++j, ++k) {
        const double d = (b.position(masses[i]) - b.position(masses[j])).norm();
        worst = std::max(worst, std::abs(d - ref[k]) / scale);
      }
    }
  }
  return worst;
}

inline double mass_definiteness_deviation(const BranchState& state) {
  double worst = 0.0;
  for (const auto& m : state.masses()) {
    const Vec3& first = state.branch(0).position(m);
    for (const auto& b : state.branches) worst = std::max(worst, max_abs_component(b.position(m) - first));
  }
  return worst;
}

/// S^{R->M}. Expects frame R1 with R2 at the common axis e1 in every branch and
/// mass configurations related by proper rigid motions. In each branch the
/// controlled rotation W takes a = x2 - x1 onto e1 and everything is shifted
/// by -x1; R2 is first rescaled to |a| (the original axis is recorded). The
/// masses end up identical across branches and M1 becomes the frame.
inline BranchState s_r_to_m(BranchState state, const RigidFrameOptions& opts = {}) {
  detail::require_rigid_dimension(state.dimension);
  const auto ref = detail::reference_pair(state.registry);
  if (!state.frame || *state.frame != ref.origin) {
    fail(ErrorCode::ValidationError, "s_r_to_m expects the state in the frame of '" + ref.origin.label + "'");
  }
  const auto masses = state.masses();
  const Vec3 e1 = state.branch(0).position(ref.axis);
  for (const auto& b : state.branches) {
    if (!within(b.position(ref.axis), e1, 0.0)) {
      fail(ErrorCode::InvalidState, "reference axis particle must be definite in the reference frame");
    }
  }
  if (!(e1.norm() > 0.0)) fail(ErrorCode::ZeroVector, "reference axis e1 has zero length");
  const double deviation = rigidity_deviation(state);
  if (deviation > opts.rigidity_tolerance) {
    fail(ErrorCode::NotRigidlyRelated,
         "inter-mass distances differ across branches (relative deviation " + std::to_string(deviation) + ")");
  }

  double scale = 0.0;
  for (auto& b : state.branches) {
    // (i) relative coordinates
    RelCoords rc = detail::relative_coordinates(b, masses, state.dimension);
    // (ii) controlled rotation and shift; R2 rescaled to |a|
    const Vec3* second = rc.axes.size() > 1 ? &rc.axes[1] : nullptr;
    const Mat3 w = detail::frame_rotation(e1, rc.axes[0], second, state.dimension);
    const Vec3 x1 = rc.origin;
    const double stretch = rc.axes[0].norm() / e1.norm();
    scale = std::max(scale, rc.axes[0].norm());

    std::map<SystemId, Vec3> moved;
    for (const auto& [id, x] : b.positions) {
      if (id == ref.axis) {
        moved[id] = project_to_dimension(w * (stretch * e1 - x1), state.dimension);
      } else {
        moved[id] = project_to_dimension(w * (x - x1), state.dimension);
      }
    }
    for (auto& [id, v] : b.velocities) v = project_to_dimension(w * v, state.dimension);
    // (iii) generalized parity swap: the mass origin becomes the frame and the
    // rotated axes carry the new orientation; residual coefficients are invariant
    RelCoords out;
    out.origin = Vec3::Zero();
    for (const auto& axis : rc.axes) out.axes.push_back(project_to_dimension(w * axis, state.dimension));
    out.residuals = rc.residuals;
    b.positions = std::move(moved);
    // (iv) back to ordinary coordinates, now relative to M1
    detail::assign_mass_positions(b, masses, out);
    b.frame_record = FrameRecord{w, x1, e1, ref.origin};
  }
  state.frame = masses[0];

  const double spread = mass_definiteness_deviation(state);
  if (spread > std::max(opts.rigidity_tolerance, 1e-12) * std::max(scale, 1.0)) {
    fail(ErrorCode::NotRigidlyRelated, "configurations are congruent but not related by a proper rigid motion");
  }
  return state;
}

/// S^{M->R}: exact inverse of s_r_to_m using the per-branch frame record.
inline BranchState s_r_to_m_inverse(BranchState state) {
  detail::require_rigid_dimension(state.dimension);
  const auto masses = state.masses();
  const auto ref = detail::reference_pair(state.registry);
  if (!state.frame || *state.frame != masses.at(0)) {
    fail(ErrorCode::ValidationError, "s_r_to_m_inverse expects the state in the frame of the first mass");
  }
  for (auto& b : state.branches) {
    if (!b.frame_record) fail(ErrorCode::MissingFrameRecord, "branch carries no record of the forward map");
    const FrameRecord rec = *b.frame_record;
    RelCoords rc = detail::relative_coordinates(b, masses, state.dimension);
    RelCoords out;
    out.origin = rec.origin;
    for (const auto& axis : rc.axes) out.axes.push_back(project_to_dimension(rec.rotation.transpose() * axis, state.dimension));
    out.residuals = rc.residuals;
    for (auto& [id, x] : b.positions) x = project_to_dimension(rec.backward(x), state.dimension);
    for (auto& [id, v] : b.velocities) v = project_to_dimension(rec.rotation.transpose() * v, state.dimension);
    b.positions[ref.origin] = Vec3::Zero();
    b.positions[ref.axis] = rec.reference_axis;
    detail::assign_mass_positions(b, masses, out);
    b.frame_record.reset();
  }
  state.frame = ref.origin;
  return state;
}

// ---------------------------------------------------------------------------
// Dispatch between the one-mass translation and the N-mass rigid change

inline bool uses_rigid_reference(const BranchState& state) {
  return state.registry.of_kind(SystemKind::reference).size() >= 2;
}

/// Changes into the frame where the masses are definite.
inline BranchState to_mass_frame(BranchState state, const RigidFrameOptions& opts = {}) {
  if (uses_rigid_reference(state)) return s_r_to_m(std::move(state), opts);
  const auto masses = state.masses();
  if (masses.empty()) fail(ErrorCode::ValidationError, "no mass system registered");
  return qrf_shift_one_mass(std::move(state), masses.front());
}

/// Inverse of to_mass_frame; `previous_frame` is the frame before the change.
inline BranchState from_mass_frame(BranchState state, const SystemId& previous_frame) {
  if (uses_rigid_reference(state)) return s_r_to_m_inverse(std::move(state));
  return qrf_shift_one_mass(std::move(state), previous_frame);
}

/// Map from mass-frame coordinates back to the previous frame for one branch.
inline FrameRecord branch_frame_record(const BranchState& mass_frame_state, std::size_t branch,
                                       const SystemId& previous_frame) {
  const Branch& b = mass_frame_state.branch(branch);
  if (b.frame_record) return *b.frame_record;
  FrameRecord rec;
  rec.origin = -b.position(previous_frame);
  rec.previous_frame = previous_frame;
  return rec;
}

// ---------------------------------------------------------------------------
// Ancilla-controlled coordinate maps

/// Invertible coordinate map f with its inverse.
struct CoordinateMap {
  std::function<Vec3(const Vec3&)> forward;
  std::function<Vec3(const Vec3&)> inverse;

  static CoordinateMap rigid(const RigidMap& map) {
    const RigidMap inv = map.inverse();
    return {[map](const Vec3& x) { return map(x); }, [inv](const Vec3& x) { return inv(x); }};
  }
  static CoordinateMap identity() {
    return {[](const Vec3& x) { return x; }, [](const Vec3& x) { return x; }};
  }
};

using AncillaMaps = std::map<int, CoordinateMap>;

struct AncillaOptions {
  double tolerance = 1e-9;  // relative to the configuration scale
};

namespace detail {

inline double configuration_scale(const BranchState& state) {
  double scale = 1.0;
  for (const auto& b : state.branches) {
    for (const auto& [id, x] : b.positions) scale = std::max(scale, x.norm());
  }
  return scale;
}

inline const CoordinateMap& map_for(const Branch& b, const AncillaMaps& maps) {
  if (!b.ancilla_tag) fail(ErrorCode::TagMissing, "branch carries no ancilla tag");
  auto it = maps.find(*b.ancilla_tag);
  if (it == maps.end()) fail(ErrorCode::TagMissing, "no coordinate map for tag " + std::to_string(*b.ancilla_tag));
  return it->second;
}

inline Vec3 pushforward(const CoordinateMap& f, const Vec3& x, const Vec3& v, double scale) {
  const double speed = v.norm();
  if (speed == 0.0) return Vec3::Zero();
  const double h = 1e-6 * scale;
  const Vec3 dir = v / speed;
  return speed * (f.forward(x + h * dir) - f.forward(x - h * dir)) / (2.0 * h);
}

inline void snap_frame(BranchState& state, double tol) {
  state.frame.reset();
  for (const auto& id : state.registry.positioned()) {
    bool at_origin = true;
    for (const auto& b : state.branches) at_origin = at_origin && max_abs_component(b.position(id)) <= tol;
    if (at_origin) {
      for (auto& b : state.branches) b.positions[id] = Vec3::Zero();
      state.frame = id;
      return;
    }
  }
}

}  // namespace detail

/// V: applies f_k to every position in the branches tagged k. Refuses maps
/// that are not invertible, not distance-preserving on the supplied
/// configurations, or that leave the masses indefinite.
inline BranchState ancilla_transform(BranchState state, const AncillaMaps& maps, const AncillaOptions& opts = {}) {
  const double scale = detail::configuration_scale(state);
  const double tol = opts.tolerance * scale;
  for (auto& b : state.branches) {
    const CoordinateMap& f = detail::map_for(b, maps);
    Branch out = b;
    for (auto& [id, x] : out.positions) {
      const Vec3 y = f.forward(x);
      if (!within(f.inverse(y), x, tol)) fail(ErrorCode::NonInvertibleMap, "map does not invert at '" + id.label + "'");
      x = project_to_dimension(y, state.dimension);
    }
    for (auto& [id, v] : out.velocities) v = detail::pushforward(f, b.position(id), v, scale);
    for (const auto& [i, xi] : b.positions) {
      for (const auto& [j, xj] : b.positions) {
        if (!(i < j)) continue;
        const double before = (xi - xj).norm();
        const double after = (out.positions[i] - out.positions[j]).norm();
        if (std::abs(before - after) > tol) {
          fail(ErrorCode::NotDistancePreserving, "map changes |" + i.label + " " + j.label + "|");
        }
      }
    }
    b = std::move(out);
  }
  if (mass_definiteness_deviation(state) > tol) {
    fail(ErrorCode::NonDefiniteResult, "maps do not send every mass to a common position across tags");
  }
  detail::snap_frame(state, tol);
  return state;
}

/// V^dagger: applies f_k^{-1} branchwise; `frame` is the frame to restore.
inline BranchState ancilla_transform_inverse(BranchState state, const AncillaMaps& maps,
                                             std::optional<SystemId> frame = std::nullopt) {
  const double scale = detail::configuration_scale(state);
  for (auto& b : state.branches) {
    const CoordinateMap& f = detail::map_for(b, maps);
    const CoordinateMap inv{f.inverse, f.forward};
    for (auto& [id, v] : b.velocities) v = detail::pushforward(inv, b.position(id), v, scale);
    for (auto& [id, x] : b.positions) x = project_to_dimension(f.inverse(x), state.dimension);
  }
  state.frame = frame;
  if (frame) {
    for (auto& b : state.branches) b.positions[*frame] = Vec3::Zero();
  }
  return state;
}

/// Rigid maps that carry each tag's mass configuration onto the configuration
/// of the first branch with its first mass moved to the origin.
inline AncillaMaps ancilla_alignment_maps(const BranchState& state) {
  const auto masses = state.masses();
  if (masses.empty()) fail(ErrorCode::ValidationError, "no mass system registered");
  std::vector<Vec3> target;
  const Branch& b0 = state.branch(0);
  for (const auto& m : masses) target.push_back(b0.position(m) - b0.position(masses[0]));
  AncillaMaps maps;
  for (const auto& b : state.branches) {
    if (!b.ancilla_tag) fail(ErrorCode::TagMissing, "branch carries no ancilla tag");
    if (maps.contains(*b.ancilla_tag)) continue;
    std::vector<Vec3> from;
    for (const auto& m : masses) from.push_back(b.position(m));
    RigidMap rigid;
    if (masses.size() == 1) {
      rigid.translation = -from[0];
    } else {
      rigid = rigid_map_between(from, target, state.dimension);
    }
    maps.emplace(*b.ancilla_tag, CoordinateMap::rigid(rigid));
  }
  return maps;
}

}  // namespace qrfsim
