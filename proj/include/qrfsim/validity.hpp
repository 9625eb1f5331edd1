#pragma once

// Checks that a far-away laboratory frame R is a good approximation of a
// frame that does not itself fall towards the superposed masses.

#include "qrfsim/clocks.hpp"
#include "qrfsim/error.hpp"
#include "qrfsim/geodesic.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

namespace qrfsim {

/// How the displacement of R towards the closest mass is computed.
enum class FallModel {
  from_rest,          // exact radial fall from rest (cycloid solution)
  parabolic,          // zero-energy infall x(t), minus the start distance d
  parabolic_printed,  // zero-energy infall x(t), minus d^{2/3}
};

constexpr std::string_view to_string(FallModel f) {
  switch (f) {
    case FallModel::from_rest: return "from_rest";
    case FallModel::parabolic: return "parabolic";
    case FallModel::parabolic_printed: return "parabolic_printed";
  }
  return "unknown";
}

struct ValidityConfig {
  std::optional<double> delta_x_R;  // m, position uncertainty of R
  double duration = 0.0;            // s
  double dt = 0.0;                  // s, 0 selects duration / 1000
  double tracking_ratio = 100.0;    // |dr_R| <= |dr_S| / ratio
  double overlap_epsilon = 1e-6;    // overlap >= 1 - epsilon
  FallModel fall = FallModel::from_rest;
  std::optional<ClockSpec> clock;
};

struct ValidityReport {
  double delta_r_R = 0.0;               // m
  double delta_x_R = 0.0;               // m
  double probe_displacement = 0.0;      // m
  double branch_pull_difference = 0.0;  // m
  double clock_overlap = 1.0;
  bool bound_ok = false;
  bool tracking_ok = false;
  bool branch_ok = false;
  bool overlap_ok = false;

  bool all_ok() const { return bound_ok && tracking_ok && branch_ok && overlap_ok; }
};

inline double fall_displacement(FallModel model, double d, double mass, double t, const UnitSystem& units) {
  if (mass == 0.0) return 0.0;
  switch (model) {
    case FallModel::from_rest: return fall_from_rest_displacement(d, mass, t, units);
    case FallModel::parabolic: return radial_freefall(d, mass, t, units) - d;
    case FallModel::parabolic_printed: return radial_freefall(d, mass, t, units) - std::pow(d, 2.0 / 3.0);
  }
  return 0.0;
}

/// Worst-case pull on R by the closest mass in each branch, the probe's own
/// free-fall displacement from rest, the branch difference of the pull on R,
/// and the clock overlap between branches.
inline ValidityReport validate_far_frame(const BranchState& state, const ValidityConfig& cfg,
                                         const UnitSystem& units = {}) {
  if (!cfg.delta_x_R) fail(ErrorCode::MissingUncertainty, "reference position uncertainty delta_x_R is required");
  if (!(cfg.duration > 0.0)) fail(ErrorCode::ValidationError, "validity check needs a positive duration");
  if (!state.frame) fail(ErrorCode::ValidationError, "state has no frame system");
  const auto masses = state.masses();
  const SystemId frame = *state.frame;

  std::optional<SystemId> probe;
  if (auto p = state.registry.of_kind(SystemKind::probe); !p.empty()) probe = p.front();
  else if (auto c = state.registry.of_kind(SystemKind::clock); !c.empty()) probe = c.front();

  ValidityReport rep;
  rep.delta_x_R = *cfg.delta_x_R;
  std::vector<double> pulls;
  double probe_disp = std::numeric_limits<double>::infinity();
  const double dt = cfg.dt > 0.0 ? cfg.dt : cfg.duration / 1000.0;
  for (std::size_t i = 0; i < state.branches.size(); ++i) {
    const Branch& b = state.branches[i];
    double pull = 0.0;
    if (!masses.empty()) {
      std::size_t closest = 0;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < masses.size(); ++k) {
        const double r = (b.position(masses[k]) - b.position(frame)).norm();
        if (r < d) {
          d = r;
          closest = k;
        }
      }
      pull = std::abs(fall_displacement(cfg.fall, d, state.registry.at(masses[closest]).mass, cfg.duration, units));
    }
    pulls.push_back(pull);
    rep.delta_r_R = std::max(rep.delta_r_R, pull);
    if (probe) {
      const PotentialModel pot = branch_potential(state, i, units);
      GeodesicOptions go;
      go.dimension = state.dimension;
      const Trajectory tr = geodesic_integrate(pot, b.position(*probe), Vec3::Zero(), cfg.duration, dt, go);
      probe_disp = std::min(probe_disp, (tr.final_position() - tr.positions.front()).norm());
    }
  }
  rep.probe_displacement = std::isfinite(probe_disp) ? probe_disp : 0.0;
  for (double a : pulls) {
    for (double b : pulls) rep.branch_pull_difference = std::max(rep.branch_pull_difference, std::abs(a - b));
  }

  const auto clocks = state.registry.of_kind(SystemKind::clock);
  if (cfg.clock && !clocks.empty() && state.branches.size() >= 2) {
    double worst = 1.0;
    for (std::size_t i = 0; i < state.branches.size(); ++i) {
      for (std::size_t j = i + 1; j < state.branches.size(); ++j) {
        const auto ti = proper_time(branch_potential(state, i, units), state.branches[i].position(clocks.front()),
                                    cfg.duration, units);
        const auto tj = proper_time(branch_potential(state, j, units), state.branches[j].position(clocks.front()),
                                    cfg.duration, units);
        const double c = std::cos((cfg.clock->E0 - cfg.clock->E1) * (ti.offset - tj.offset) / (2.0 * units.hbar));
        worst = std::min(worst, c * c);
      }
    }
    rep.clock_overlap = worst;
  }

  rep.bound_ok = rep.delta_r_R < rep.delta_x_R;
  rep.tracking_ok = rep.delta_r_R <= rep.probe_displacement / cfg.tracking_ratio;
  rep.branch_ok = rep.branch_pull_difference < rep.delta_x_R;
  rep.overlap_ok = rep.clock_overlap >= 1.0 - cfg.overlap_epsilon;
  return rep;
}

}  // namespace qrfsim
