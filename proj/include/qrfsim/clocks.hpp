#pragma once

// Two-level clocks held at fixed positions in the field of (possibly
// superposed) masses.

#include "qrfsim/error.hpp"
#include "qrfsim/phase.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/transforms.hpp"
#include "qrfsim/units.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace qrfsim {

/// Internal Hamiltonian E0|0><0| + E1|1><1| and initial internal state.
struct ClockSpec {
  double E0 = 0.0;  // J
  double E1 = 0.0;  // J
  ClockState initial = ClockState::plus();

  void validate() const {
    if (E0 == E1) fail(ErrorCode::ValidationError, "clock levels must differ (E1 != E0)");
    if (std::abs(initial.norm() - 1.0) > kNormTolerance) {
      fail(ErrorCode::ValidationError, "clock internal state must have unit norm");
    }
  }

  /// Levels with exactly one oscillation over `duration`.
  static ClockSpec one_period(double duration, const UnitSystem& units = {}) {
    return {0.0, 2.0 * std::numbers::pi * units.hbar / duration, ClockState::plus()};
  }
};

/// tau = t (1 + V/c^2) kept as coordinate time plus offset t V / c^2, so that
/// differences between branches survive at the 1e-32 s level.
struct ProperTime {
  double coordinate = 0.0;  // s
  double offset = 0.0;      // s
  double value() const { return coordinate + offset; }
};

inline constexpr double kStrongFieldLimit = 1e-2;

template <Potential P>
ProperTime proper_time(const P& pot, const Vec3& x, double t, const UnitSystem& units = {}) {
  const double phi = pot.value(x) / (units.c * units.c);
  if (std::abs(phi) > kStrongFieldLimit) {
    fail(ErrorCode::StrongField, "|V|/c^2 = " + std::to_string(std::abs(phi)) + " exceeds the weak-field limit");
  }
  return {t, t * phi};
}

namespace detail {
inline Complex level_phase(double energy, const ProperTime& tau, double hbar) {
  // e^{-i E tau / hbar} with the coordinate and offset parts applied separately.
  return std::polar(1.0, -energy * tau.coordinate / hbar) * std::polar(1.0, -energy * tau.offset / hbar);
}
}  // namespace detail

inline ClockState evolve_clock(const ClockSpec& spec, const ClockState& in, const ProperTime& tau,
                               const UnitSystem& units = {}) {
  if (std::abs(in.norm() - 1.0) > kNormTolerance) fail(ErrorCode::ValidationError, "clock state not unit norm");
  return {in.ground * detail::level_phase(spec.E0, tau, units.hbar),
          in.excited * detail::level_phase(spec.E1, tau, units.hbar)};
}

inline ClockState evolve_clock(const ClockSpec& spec, const ProperTime& tau, const UnitSystem& units = {}) {
  return evolve_clock(spec, spec.initial, tau, units);
}

/// Probability of |+> after time t at distance x from a point mass M:
/// cos^2((E0 - E1) tau / (2 hbar)) with tau = t (1 - GM/(c^2 x)).
inline double p_plus(const ClockSpec& spec, double mass, double x, double t, const UnitSystem& units = {}) {
  const auto pot = PotentialModel::single(mass, Vec3::Zero(), units);
  const ProperTime tau = proper_time(pot, Vec3(x, 0.0, 0.0), t, units);
  const double w = (spec.E0 - spec.E1) / (2.0 * units.hbar);
  const double c = std::cos(w * tau.coordinate + w * tau.offset);
  return c * c;
}

/// Probability of |+> for an arbitrary internal state.
inline double plus_probability(const ClockState& s) { return std::norm(overlap(ClockState::plus(), s)); }

struct ClockScenarioResult {
  BranchState state;             // back in the original frame
  std::vector<ProperTime> tau;   // per branch, first clock
  double delta_tau = 0.0;        // tau^(2) - tau^(1), s
  double visibility = 1.0;       // |<s1|s2>|^2
  std::vector<double> p_plus;    // per branch, first clock
};

/// Shift to the mass frame, evolve every clock by its branch proper time and
/// attach the static-path gravitational phase, shift back.
inline ClockScenarioResult run_clock_scenario(const BranchState& state, const ClockSpec& spec, double t,
                                              const UnitSystem& units = {}, const RigidFrameOptions& frame_opts = {}) {
  spec.validate();
  if (!state.frame) fail(ErrorCode::ValidationError, "state has no frame system");
  const auto clocks = state.registry.of_kind(SystemKind::clock);
  if (clocks.empty()) fail(ErrorCode::ValidationError, "scenario has no clock system");
  for (const auto& c : clocks) {
    if (!is_definite(state, {c}, 0.0)) fail(ErrorCode::ValidationError, "clock '" + c.label + "' must be held fixed");
  }
  const SystemId previous = *state.frame;
  BranchState in_m = to_mass_frame(state, frame_opts);

  ClockScenarioResult out;
  const double c2 = units.c * units.c;
  for (std::size_t i = 0; i < in_m.branches.size(); ++i) {
    Branch& b = in_m.branches[i];
    const PotentialModel pot = branch_potential(in_m, i, units);
    double phase = 0.0;
    for (const auto& c : clocks) {
      const Vec3& x = b.position(c);
      const ProperTime tau = proper_time(pot, x, t, units);
      auto it = b.clocks.find(c);
      const ClockState start = it == b.clocks.end() ? spec.initial : it->second;
      b.clocks[c] = evolve_clock(spec, start, tau, units);
      const double m = in_m.registry.at(c).mass;
      phase += m * c2 * t / units.hbar * detail::sqrt1pm1(2.0 * pot.value(x) / c2);
      if (c == clocks.front()) {
        out.tau.push_back(tau);
        out.p_plus.push_back(plus_probability(b.clocks[c]));
      }
    }
    b.amplitude *= std::polar(1.0, -phase);
  }
  if (out.tau.size() >= 2) {
    out.delta_tau = out.tau[1].offset - out.tau[0].offset;
    const ClockState& s1 = in_m.branches[0].clocks.at(clocks.front());
    const ClockState& s2 = in_m.branches[1].clocks.at(clocks.front());
    out.visibility = std::norm(overlap(s1, s2));
  }
  out.state = from_mass_frame(std::move(in_m), previous);
  return out;
}

}  // namespace qrfsim
