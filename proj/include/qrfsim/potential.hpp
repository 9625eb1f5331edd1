#pragma once

// Newtonian gravitational potentials (per unit probe mass) and two analytic
// substitutes used as numerical controls.

#include "qrfsim/error.hpp"
#include "qrfsim/linalg.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/units.hpp"

#include <cmath>
#include <concepts>
#include <limits>
#include <vector>

namespace qrfsim {

template <class P>
concept Potential = requires(const P& p, const Vec3& x) {
  { p.value(x) } -> std::convertible_to<double>;     // J/kg
  { p.gradient(x) } -> std::convertible_to<Vec3>;    // m/s^2
};

struct PointMass {
  Vec3 position = Vec3::Zero();
  double mass = 0.0;  // kg
};

/// V(x) = -sum G M_i / |x - x_i|, optionally Plummer-softened by `softening`.
struct PotentialModel {
  std::vector<PointMass> masses;
  UnitSystem units;
  double softening = 0.0;  // m

  double value(const Vec3& x) const {
    double v = 0.0;
    for (const auto& m : masses) {
      const double r2 = (x - m.position).squaredNorm() + softening * softening;
      v -= units.G * m.mass / std::sqrt(r2);
    }
    return v;
  }

  Vec3 gradient(const Vec3& x) const {
    Vec3 g = Vec3::Zero();
    for (const auto& m : masses) {
      const Vec3 d = x - m.position;
      const double r2 = d.squaredNorm() + softening * softening;
      g += units.G * m.mass * d / (r2 * std::sqrt(r2));
    }
    return g;
  }

  double g00(const Vec3& x) const { return -1.0 - 2.0 * value(x) / (units.c * units.c); }

  double min_distance(const Vec3& x) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : masses) best = std::min(best, (x - m.position).norm());
    return best;
  }

  static PotentialModel single(double mass, const Vec3& at = Vec3::Zero(), const UnitSystem& units = {}) {
    return {{PointMass{at, mass}}, units, 0.0};
  }
};

/// Potential sourced by the mass systems of one branch.
inline PotentialModel branch_potential(const BranchState& state, std::size_t branch, const UnitSystem& units,
                                       double softening = 0.0) {
  PotentialModel pot;
  pot.units = units;
  pot.softening = softening;
  const Branch& b = state.branch(branch);
  for (const auto& id : state.masses()) pot.masses.push_back({b.position(id), state.registry.at(id).mass});
  return pot;
}

/// Branch-weighted mean potential sum_i |a_i|^2 V_i.
inline PotentialModel mean_potential(const BranchState& state, const UnitSystem& units, double softening = 0.0) {
  PotentialModel pot;
  pot.units = units;
  pot.softening = softening;
  for (std::size_t i = 0; i < state.branches.size(); ++i) {
    const double w = std::norm(state.branches[i].amplitude);
    if (w == 0.0) continue;
    for (const auto& id : state.masses()) {
      pot.masses.push_back({state.branches[i].position(id), w * state.registry.at(id).mass});
    }
  }
  return pot;
}

/// Homogeneous field: the probe accelerates with `g`, V(x) = -g.x.
struct UniformField {
  Vec3 g = Vec3::Zero();
  double value(const Vec3& x) const { return -g.dot(x); }
  Vec3 gradient(const Vec3&) const { return -g; }
};

/// V(x) = omega^2 |x - center|^2 / 2.
struct HarmonicPotential {
  double omega = 1.0;  // rad/s
  Vec3 center = Vec3::Zero();
  double value(const Vec3& x) const { return 0.5 * omega * omega * (x - center).squaredNorm(); }
  Vec3 gradient(const Vec3& x) const { return omega * omega * (x - center); }
};

}  // namespace qrfsim
