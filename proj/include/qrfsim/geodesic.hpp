#pragma once

// Weak-field geodesics: x'' = -grad V, plus the closed-form radial infall.

#include "qrfsim/error.hpp"
#include "qrfsim/linalg.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace qrfsim {

struct Trajectory {
  std::vector<double> times;      // s
  std::vector<Vec3> positions;    // m
  std::vector<Vec3> velocities;   // m/s
  std::vector<double> phase;      // rad, accumulated; phase[0] == 0
  std::size_t branch_index = 0;
  SystemId system;

  std::size_t size() const { return times.size(); }
  const Vec3& final_position() const { return positions.back(); }
};

// ---------------------------------------------------------------------------
// Closed forms for a single point mass

namespace detail {
inline double infall_rate(double mass, const UnitSystem& units) { return 3.0 * std::sqrt(mass * units.G / 2.0); }
}  // namespace detail

/// Time at which the parabolic infall from x0 reaches the centre.
inline double singularity_time(double x0, double mass, const UnitSystem& units = {}) {
  if (!(mass > 0.0)) return std::numeric_limits<double>::infinity();
  return std::pow(x0, 1.5) / detail::infall_rate(mass, units);
}

/// x(t) = (x0^{3/2} - 3 sqrt(GM/2) t)^{2/3}: radial fall on the parabolic
/// (zero-energy) orbit, i.e. with initial speed sqrt(2GM/x0) towards the mass.
inline double radial_freefall(double x0, double mass, double t, const UnitSystem& units = {}) {
  if (!(x0 > 0.0)) fail(ErrorCode::ValidationError, "radial_freefall needs x0 > 0");
  if (mass < 0.0) fail(ErrorCode::ValidationError, "negative mass");
  const double t_sing = singularity_time(x0, mass, units);
  if (t > t_sing) {
    fail(ErrorCode::PastSingularity,
         "t = " + std::to_string(t) + " s exceeds the infall time " + std::to_string(t_sing) + " s");
  }
  if (t == t_sing) return 0.0;
  const double base = std::pow(x0, 1.5) - detail::infall_rate(mass, units) * t;
  return std::pow(base, 2.0 / 3.0);
}

/// Radial velocity along radial_freefall (negative: towards the mass).
inline double radial_freefall_velocity(double x0, double mass, double t, const UnitSystem& units = {}) {
  const double x = radial_freefall(x0, mass, t, units);
  if (x == 0.0) fail(ErrorCode::PastSingularity, "velocity diverges at the centre");
  return -std::sqrt(2.0 * units.G * mass / x);
}

/// Initial velocity that puts a probe on the radial_freefall orbit.
inline double parabolic_infall_speed(double x0, double mass, const UnitSystem& units = {}) {
  return std::sqrt(2.0 * units.G * mass / x0);
}

/// Displacement r(t) - d for a fall from rest at distance d (negative). Solved
/// on the cycloid r = d cos^2(eta), t = sqrt(d^3/2GM)(eta + sin(eta)cos(eta)).
inline double fall_from_rest_displacement(double d, double mass, double t, const UnitSystem& units = {}) {
  if (!(d > 0.0)) fail(ErrorCode::ValidationError, "fall distance must be positive");
  if (mass == 0.0 || t == 0.0) return 0.0;
  const double scale = std::sqrt(d * d * d / (2.0 * units.G * mass));
  const double target = t / scale;
  if (target > std::numbers::pi / 2.0) fail(ErrorCode::PastSingularity, "fall from rest reaches the centre");
  double lo = 0.0, hi = std::numbers::pi / 2.0;
  double eta = std::min(0.5 * target, hi);
  for (int it = 0; it < 200; ++it) {
    const double f = eta + std::sin(eta) * std::cos(eta) - target;
    if (f > 0.0) hi = eta; else lo = eta;
    const double df = 2.0 * std::cos(eta) * std::cos(eta);
    double next = df > 0.0 ? eta - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - eta) <= 1e-16 * std::max(eta, 1e-300)) {
      eta = next;
      break;
    }
    eta = next;
  }
  const double s = std::sin(eta);
  return -d * s * s;
}

// ---------------------------------------------------------------------------
// RK4 integration

struct GeodesicOptions {
  /// Singularity guard as a fraction of the initial closest distance to a mass.
  double r_min_factor = 1e-3;
  std::optional<double> r_min;  // m, overrides the factor
  /// Allowed per-step change of E = v^2/2 + V relative to |T| + |V|.
  double energy_tolerance = 1e-6;
  int dimension = 3;
};

namespace detail {

template <Potential P>
double closest_mass_distance(const P& pot, const Vec3& x) {
  if constexpr (requires { pot.min_distance(x); }) {
    return pot.min_distance(x);
  } else {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace detail

/// N = ceil(t_end/dt) equal RK4 steps of ẍ = -grad V from (x0, v0).
template <Potential P>
Trajectory geodesic_integrate(const P& pot, const Vec3& x0, const Vec3& v0, double t_end, double dt,
                              const GeodesicOptions& opts = {}) {
  if (!(dt > 0.0)) fail(ErrorCode::ValidationError, "time step must be positive");
  if (!(t_end >= 0.0)) fail(ErrorCode::ValidationError, "duration must be non-negative");
  const double d0 = detail::closest_mass_distance(pot, x0);
  const double r_min = opts.r_min ? *opts.r_min : (std::isfinite(d0) ? opts.r_min_factor * d0 : 0.0);
  if (d0 <= r_min) fail(ErrorCode::SingularityApproach, "initial position lies within r_min of a mass");

  std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  if (t_end > 0.0 && steps == 0) steps = 1;
  const double h = steps == 0 ? 0.0 : t_end / static_cast<double>(steps);
  const int dim = opts.dimension;

  Trajectory tr;
  tr.times.reserve(steps + 1);
  tr.positions.reserve(steps + 1);
  tr.velocities.reserve(steps + 1);
  Vec3 x = project_to_dimension(x0, dim);
  Vec3 v = project_to_dimension(v0, dim);
  tr.times.push_back(0.0);
  tr.positions.push_back(x);
  tr.velocities.push_back(v);

  auto accel = [&](const Vec3& p) { return project_to_dimension(-pot.gradient(p), dim); };
  double energy = 0.5 * v.squaredNorm() + pot.value(x);
  for (std::size_t n = 1; n <= steps; ++n) {
    const Vec3 k1x = v, k1v = accel(x);
    const Vec3 k2x = v + 0.5 * h * k1v, k2v = accel(x + 0.5 * h * k1x);
    const Vec3 k3x = v + 0.5 * h * k2v, k3v = accel(x + 0.5 * h * k2x);
    const Vec3 k4x = v + h * k3v, k4v = accel(x + h * k3x);
    x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (detail::closest_mass_distance(pot, x) <= r_min) {
      fail(ErrorCode::SingularityApproach, "trajectory enters r_min of a mass at t = " +
                                               std::to_string(static_cast<double>(n) * h) + " s");
    }
    const double kinetic = 0.5 * v.squaredNorm();
    const double potential = pot.value(x);
    const double next = kinetic + potential;
    const double scale = std::abs(kinetic) + std::abs(potential);
    if (scale > 0.0 && std::abs(next - energy) > opts.energy_tolerance * scale) {
      fail(ErrorCode::StepTooLarge, "energy drift per step exceeds tolerance; reduce dt");
    }
    energy = next;
    tr.times.push_back(static_cast<double>(n) * h);
    tr.positions.push_back(x);
    tr.velocities.push_back(v);
  }
  tr.phase.assign(tr.times.size(), 0.0);
  return tr;
}

/// Path of a system held at x for duration t, sampled like geodesic_integrate.
inline Trajectory static_path(const Vec3& x, double t_end, double dt) {
  if (!(dt > 0.0)) fail(ErrorCode::ValidationError, "time step must be positive");
  std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  if (t_end > 0.0 && steps == 0) steps = 1;
  const double h = steps == 0 ? 0.0 : t_end / static_cast<double>(steps);
  Trajectory tr;
  for (std::size_t n = 0; n <= steps; ++n) {
    tr.times.push_back(static_cast<double>(n) * h);
    tr.positions.push_back(x);
    tr.velocities.push_back(Vec3::Zero());
  }
  tr.phase.assign(tr.times.size(), 0.0);
  return tr;
}

}  // namespace qrfsim
