#pragma once

// Proper-time action phases along semi-classical paths.

#include "qrfsim/error.hpp"
#include "qrfsim/geodesic.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/quadrature.hpp"
#include "qrfsim/units.hpp"

#include <cmath>
#include <vector>

namespace qrfsim {

/// A phase split into the rest-mass part m c^2 t / hbar, which is common to
/// every branch of equal duration, and the remainder. Keeping the two apart
/// preserves the remainder's precision: for laboratory masses the rest part
/// exceeds 1e20 rad while branch differences are of order one.
struct ProperPhase {
  double rest = 0.0;    // rad
  double excess = 0.0;  // rad
  double total() const { return rest + excess; }
};

namespace detail {

inline double sample_spacing(const Trajectory& tr) {
  if (tr.times.size() < 2) return 0.0;
  return (tr.times.back() - tr.times.front()) / static_cast<double>(tr.times.size() - 1);
}

/// sqrt(1 + e) - 1 without cancellation.
inline double sqrt1pm1(double e) { return e / (std::sqrt(1.0 + e) + 1.0); }

template <Potential P>
std::vector<double> stodolsky_integrand(const P& pot, const Trajectory& tr, const UnitSystem& units) {
  const double c2 = units.c * units.c;
  std::vector<double> f(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double speed = tr.velocities[k].norm();
    if (speed > 0.1 * units.c) {
      fail(ErrorCode::RelativisticVelocity, "sample speed exceeds 0.1 c; weak-field phase not applicable");
    }
    const double e = (2.0 * pot.value(tr.positions[k]) - speed * speed) / c2;
    f[k] = sqrt1pm1(e);
  }
  return f;
}

}  // namespace detail

/// (m c^2 / hbar) * integral of dtau along the path in the weak-field metric
/// g00 = -1 - 2V/c^2, by composite Simpson on the trajectory's time grid.
template <Potential P>
ProperPhase stodolsky_phase(const P& pot, const Trajectory& tr, double probe_mass, const UnitSystem& units = {}) {
  const double scale = probe_mass * units.c * units.c / units.hbar;
  const double duration = tr.times.empty() ? 0.0 : tr.times.back() - tr.times.front();
  const auto f = detail::stodolsky_integrand(pot, tr, units);
  return {scale * duration, scale * simpson(f, detail::sample_spacing(tr))};
}

/// Fills tr.phase with the running excess part of stodolsky_phase.
template <Potential P>
void accumulate_phase(const P& pot, Trajectory& tr, double probe_mass, const UnitSystem& units = {}) {
  const double scale = probe_mass * units.c * units.c / units.hbar;
  const auto f = detail::stodolsky_integrand(pot, tr, units);
  tr.phase = cumulative_simpson(f, detail::sample_spacing(tr));
  for (auto& p : tr.phase) p *= scale;
}

/// (m c^2 / hbar) * integral of sqrt(1 - v^2/c^2) dt.
inline ProperPhase sr_phase(const Trajectory& tr, double probe_mass, const UnitSystem& units = {}) {
  const double c2 = units.c * units.c;
  const double scale = probe_mass * c2 / units.hbar;
  std::vector<double> f(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double v2 = tr.velocities[k].squaredNorm();
    if (!(v2 < c2)) fail(ErrorCode::SuperluminalSample, "sample speed reaches c");
    f[k] = detail::sqrt1pm1(-v2 / c2);
  }
  const double duration = tr.times.empty() ? 0.0 : tr.times.back() - tr.times.front();
  return {scale * duration, scale * simpson(f, detail::sample_spacing(tr))};
}

/// (m / hbar) * integral of V along the path.
template <Potential P>
double grav_phase(const P& pot, const Trajectory& tr, double probe_mass, const UnitSystem& units = {}) {
  std::vector<double> f(tr.size());
  for (std::size_t k = 0; k < tr.size(); ++k) f[k] = pot.value(tr.positions[k]);
  return probe_mass / units.hbar * simpson(f, detail::sample_spacing(tr));
}

/// Gravitational phase of a system held at x for time t: m V(x) t / hbar.
template <Potential P>
double static_grav_phase(const P& pot, const Vec3& x, double t, double probe_mass, const UnitSystem& units = {}) {
  return probe_mass * pot.value(x) * t / units.hbar;
}

/// (m/hbar) * integral of V along radial_freefall, in closed form:
/// (m/hbar) sqrt(2GM) ((x0^{3/2} - 3 sqrt(GM/2) t)^{1/3} - x0^{1/2}).
inline double grav_phase_closed(double x0, double mass, double t, double probe_mass, const UnitSystem& units = {}) {
  if (mass == 0.0) return 0.0;
  const double x = radial_freefall(x0, mass, t, units);
  // (x0^{3/2} - k t)^{1/3} is sqrt(x(t)).
  return probe_mass / units.hbar * std::sqrt(2.0 * mass * units.G) * (std::sqrt(x) - std::sqrt(x0));
}

}  // namespace qrfsim
