#pragma once

// Branch-superposition states: every branch is a semi-classical configuration
// in which each registered system sits at a definite position.

#include "qrfsim/error.hpp"
#include "qrfsim/linalg.hpp"

#include <compare>
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qrfsim {

using Complex = std::complex<double>;

/// Branches closer than this in every system are the same position eigenstate.
inline constexpr double kDefaultPositionTolerance = 1e-9;  // m
inline constexpr double kNormTolerance = 1e-12;

struct SystemId {
  std::string label;

  SystemId() = default;
  SystemId(std::string l) : label(std::move(l)) {}  // NOLINT(google-explicit-constructor)
  SystemId(const char* l) : label(l) {}            // NOLINT(google-explicit-constructor)

  auto operator<=>(const SystemId&) const = default;
  bool operator==(const SystemId&) const = default;
};

enum class SystemKind { reference, mass, probe, clock, ancilla };

constexpr const char* to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::reference: return "reference";
    case SystemKind::mass: return "mass";
    case SystemKind::probe: return "probe";
    case SystemKind::clock: return "clock";
    case SystemKind::ancilla: return "ancilla";
  }
  return "unknown";
}

struct SystemInfo {
  SystemId id;
  SystemKind kind = SystemKind::probe;
  double mass = 0.0;  // kg

  bool operator==(const SystemInfo&) const = default;
};

/// Ordered set of named systems. Registration order is significant: the first
/// registered mass acts as the origin when changing into the mass frame.
class SystemRegistry {
 public:
  SystemRegistry() = default;
  SystemRegistry(std::initializer_list<SystemInfo> systems) {
    for (const auto& s : systems) add(s.id, s.kind, s.mass);
  }

  void add(SystemId id, SystemKind kind, double mass = 0.0) {
    if (id.label.empty()) fail(ErrorCode::ValidationError, "system label must not be empty");
    if (contains(id)) fail(ErrorCode::ValidationError, "duplicate system label '" + id.label + "'");
    if ((kind == SystemKind::mass || kind == SystemKind::probe) && !(mass > 0.0)) {
      fail(ErrorCode::ValidationError,
           std::string(to_string(kind)) + " '" + id.label + "' needs a strictly positive mass");
    }
    if (mass < 0.0) fail(ErrorCode::ValidationError, "negative mass for '" + id.label + "'");
    systems_.push_back(SystemInfo{std::move(id), kind, mass});
  }

  bool contains(const SystemId& id) const { return find(id) != nullptr; }

  const SystemInfo* find(const SystemId& id) const {
    for (const auto& s : systems_) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  const SystemInfo& at(const SystemId& id) const {
    const SystemInfo* s = find(id);
    if (s == nullptr) fail(ErrorCode::UnknownSystem, "no system '" + id.label + "' in registry");
    return *s;
  }

  std::vector<SystemId> of_kind(SystemKind kind) const {
    std::vector<SystemId> out;
    for (const auto& s : systems_) {
      if (s.kind == kind) out.push_back(s.id);
    }
    return out;
  }

  /// Every system that carries a position (ancillas are discrete tags).
  std::vector<SystemId> positioned() const {
    std::vector<SystemId> out;
    for (const auto& s : systems_) {
      if (s.kind != SystemKind::ancilla) out.push_back(s.id);
    }
    return out;
  }

  const std::vector<SystemInfo>& systems() const { return systems_; }
  std::size_t size() const { return systems_.size(); }

  bool operator==(const SystemRegistry&) const = default;

 private:
  std::vector<SystemInfo> systems_;
};

/// Internal two-level state: amplitude on |0> with energy E0 and |1> with E1.
struct ClockState {
  Complex ground{1.0, 0.0};
  Complex excited{0.0, 0.0};

  static ClockState plus() {
    const double s = 1.0 / std::sqrt(2.0);
    return {Complex(s, 0.0), Complex(s, 0.0)};
  }
  static ClockState minus() {
    const double s = 1.0 / std::sqrt(2.0);
    return {Complex(s, 0.0), Complex(-s, 0.0)};
  }

  double norm() const { return std::sqrt(std::norm(ground) + std::norm(excited)); }

  friend Complex overlap(const ClockState& a, const ClockState& b) {
    return std::conj(a.ground) * b.ground + std::conj(a.excited) * b.excited;
  }
};

/// Rigid map applied by a mass-frame change: x_new = rotation * (x_old - origin).
/// The original reference axis is kept so the rescaled second reference
/// particle can be restored exactly.
struct FrameRecord {
  Mat3 rotation = Mat3::Identity();
  Vec3 origin = Vec3::Zero();
  Vec3 reference_axis = Vec3::Zero();
  SystemId previous_frame;

  Vec3 forward(const Vec3& x) const { return rotation * (x - origin); }
  Vec3 backward(const Vec3& x) const { return rotation.transpose() * x + origin; }
};

struct Branch {
  Complex amplitude{1.0, 0.0};
  std::map<SystemId, Vec3> positions;
  std::map<SystemId, Vec3> velocities;  // absent entry means at rest
  std::map<SystemId, ClockState> clocks;
  std::optional<int> ancilla_tag;
  std::optional<FrameRecord> frame_record;

  const Vec3& position(const SystemId& id) const {
    auto it = positions.find(id);
    if (it == positions.end()) fail(ErrorCode::UnknownSystem, "branch has no position for '" + id.label + "'");
    return it->second;
  }

  Vec3 velocity(const SystemId& id) const {
    auto it = velocities.find(id);
    return it == velocities.end() ? Vec3::Zero() : it->second;
  }
};

struct BranchState {
  SystemRegistry registry;
  int dimension = 3;
  std::vector<Branch> branches;
  /// System sitting at the origin of every branch; empty for an abstract
  /// quantum coordinate system (as produced by the ancilla-controlled map).
  std::optional<SystemId> frame;

  const Branch& branch(std::size_t i) const {
    if (i >= branches.size()) {
      fail(ErrorCode::IndexOutOfRange,
           "branch index " + std::to_string(i) + " out of range (" + std::to_string(branches.size()) + " branches)");
    }
    return branches[i];
  }

  std::vector<SystemId> masses() const { return registry.of_kind(SystemKind::mass); }
};

inline double total_weight(const BranchState& state) {
  double sum = 0.0;
  for (const auto& b : state.branches) sum += std::norm(b.amplitude);
  return sum;
}

/// Throws InvalidState naming the first violated invariant.
inline void validate(const BranchState& state, double tol = kNormTolerance) {
  if (state.dimension < 1 || state.dimension > 3) {
    fail(ErrorCode::InvalidState, "dimension must be 1, 2 or 3");
  }
  if (state.branches.empty()) fail(ErrorCode::InvalidState, "branch list is empty");
  if (std::abs(total_weight(state) - 1.0) > tol) {
    fail(ErrorCode::InvalidState, "branch weights do not sum to one");
  }
  if (state.frame && !state.registry.contains(*state.frame)) {
    fail(ErrorCode::UnknownSystem, "frame '" + state.frame->label + "' not registered");
  }
  const auto positioned = state.registry.positioned();
  for (std::size_t i = 0; i < state.branches.size(); ++i) {
    const Branch& b = state.branches[i];
    for (const auto& id : positioned) {
      const Vec3& x = b.position(id);
      for (int k = state.dimension; k < 3; ++k) {
        if (x[k] != 0.0) fail(ErrorCode::InvalidState, "position of '" + id.label + "' exceeds the dimension");
      }
    }
    for (const auto& [id, _] : b.positions) {
      if (!state.registry.contains(id)) fail(ErrorCode::UnknownSystem, "branch mentions '" + id.label + "'");
    }
    for (const auto& [id, clock] : b.clocks) {
      if (!state.registry.contains(id)) fail(ErrorCode::UnknownSystem, "branch mentions clock '" + id.label + "'");
      if (std::abs(clock.norm() - 1.0) > tol) {
        fail(ErrorCode::InvalidState, "internal state of '" + id.label + "' is not unit norm");
      }
    }
    if (state.frame && max_abs_component(b.position(*state.frame)) != 0.0) {
      fail(ErrorCode::InvalidState, "frame system '" + state.frame->label + "' is not at the origin in branch " +
                                        std::to_string(i));
    }
  }
}

/// Rescales all amplitudes by one positive real so the weights sum to one.
inline BranchState normalize(BranchState state) {
  const double weight = total_weight(state);
  if (!(weight > 0.0)) fail(ErrorCode::AllZeroAmplitudes, "every branch amplitude is zero");
  // Already unit norm to rounding: leave untouched so normalize is idempotent.
  if (std::abs(weight - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return state;
  const double scale = 1.0 / std::sqrt(weight);
  for (auto& b : state.branches) b.amplitude *= scale;
  return state;
}

/// True iff every listed system occupies the same position in all branches.
inline bool is_definite(const BranchState& state, const std::vector<SystemId>& systems,
                        double tol = kDefaultPositionTolerance) {
  for (const auto& id : systems) {
    state.registry.at(id);
    const Vec3& first = state.branch(0).position(id);
    for (const auto& b : state.branches) {
      if (!within(b.position(id), first, tol)) return false;
    }
  }
  return true;
}

using SystemPair = std::pair<SystemId, SystemId>;

/// Euclidean distance for every unordered pair (including each system with
/// itself) in one branch. Keys are stored with the smaller label first.
inline std::map<SystemPair, double> relative_distances(const BranchState& state, std::size_t branch_index) {
  const Branch& b = state.branch(branch_index);
  const auto ids = state.registry.positioned();
  std::map<SystemPair, double> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i; j < ids.size(); ++j) {
      const auto& lo = std::min(ids[i], ids[j]);
      const auto& hi = std::max(ids[i], ids[j]);
      out[{lo, hi}] = (b.position(ids[i]) - b.position(ids[j])).norm();
    }
  }
  return out;
}

inline double distance(const std::map<SystemPair, double>& d, const SystemId& a, const SystemId& b) {
  return d.at({std::min(a, b), std::max(a, b)});
}

/// Whether two branches are the same position eigenstate (positions within
/// tolerance, identical ancilla tags).
inline bool same_configuration(const Branch& a, const Branch& b, const std::vector<SystemId>& ids, double pos_tol) {
  if (a.ancilla_tag != b.ancilla_tag) return false;
  for (const auto& id : ids) {
    if (!within(a.position(id), b.position(id), pos_tol)) return false;
  }
  return true;
}

/// <a|b> with position eigenstates orthonormal beyond pos_tol. The double sum
/// over branch pairs is bilinear, so coincident branches within one state are
/// accounted for exactly as if they had been merged first.
inline Complex inner_product(const BranchState& a, const BranchState& b,
                             double pos_tol = kDefaultPositionTolerance) {
  if (!(a.registry == b.registry) || a.dimension != b.dimension) {
    fail(ErrorCode::RegistryMismatch, "states are defined over different registries or dimensions");
  }
  const auto ids = a.registry.positioned();
  const auto clocks = a.registry.of_kind(SystemKind::clock);
  Complex sum{0.0, 0.0};
  for (const auto& bi : a.branches) {
    for (const auto& bj : b.branches) {
      if (!same_configuration(bi, bj, ids, pos_tol)) continue;
      Complex term = std::conj(bi.amplitude) * bj.amplitude;
      for (const auto& c : clocks) {
        auto ci = bi.clocks.find(c);
        auto cj = bj.clocks.find(c);
        if (ci != bi.clocks.end() && cj != bj.clocks.end()) {
          term *= overlap(ci->second, cj->second);
        } else if ((ci == bi.clocks.end()) != (cj == bj.clocks.end())) {
          fail(ErrorCode::RegistryMismatch, "clock '" + c.label + "' has an internal state in only one state");
        }
      }
      sum += term;
    }
  }
  return sum;
}

}  // namespace qrfsim
