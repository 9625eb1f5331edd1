#pragma once

// Branchwise semi-classical evolution: each probe follows the geodesic of its
// branch's potential and the branch amplitude picks up the Stodolsky phase.

#include "qrfsim/error.hpp"
#include "qrfsim/geodesic.hpp"
#include "qrfsim/parallel.hpp"
#include "qrfsim/phase.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/transforms.hpp"
#include "qrfsim/units.hpp"

#include <complex>
#include <vector>

namespace qrfsim {

struct EvolveOptions {
  GeodesicOptions geodesic;
  /// Require the masses to be definite (frame of the masses).
  bool require_definite = true;
  double definite_tolerance = kDefaultPositionTolerance;  // m
  /// Multiply amplitudes by the common rest phase too. Off by default: it is a
  /// global phase of order m c^2 t / hbar and only degrades precision.
  bool include_rest_phase = false;
  double softening = 0.0;  // m
};

struct SemiclassicalResult {
  BranchState state;
  std::vector<Trajectory> trajectories;  // branch-major, probe-minor
  std::vector<ProperPhase> phases;       // per trajectory
};

namespace detail {

inline void require_static_masses(const BranchState& state) {
  for (const auto& b : state.branches) {
    for (const auto& m : state.masses()) {
      if (b.velocity(m).squaredNorm() != 0.0) {
        fail(ErrorCode::ValidationError, "masses must be static; '" + m.label + "' carries a velocity");
      }
    }
  }
}

}  // namespace detail

/// Core evolution with one potential per branch.
inline SemiclassicalResult evolve_in_potentials(BranchState state, const std::vector<PotentialModel>& potentials,
                                                double t, double dt, const UnitSystem& units,
                                                const EvolveOptions& opts = {}) {
  if (potentials.size() != state.branches.size()) {
    fail(ErrorCode::IndexOutOfRange, "one potential per branch required");
  }
  detail::require_static_masses(state);
  const auto probes = state.registry.of_kind(SystemKind::probe);
  const std::size_t np = probes.size();
  const std::size_t nb = state.branches.size();
  GeodesicOptions gopts = opts.geodesic;
  gopts.dimension = state.dimension;

  SemiclassicalResult out;
  out.trajectories.resize(nb * np);
  out.phases.resize(nb * np);
  parallel_for(nb * np, [&](std::size_t k) {
    const std::size_t i = k / np;
    const SystemId& p = probes[k % np];
    const Branch& b = state.branches[i];
    const double mass = state.registry.at(p).mass;
    Trajectory tr = geodesic_integrate(potentials[i], b.position(p), b.velocity(p), t, dt, gopts);
    tr.branch_index = i;
    tr.system = p;
    accumulate_phase(potentials[i], tr, mass, units);
    out.phases[k] = stodolsky_phase(potentials[i], tr, mass, units);
    out.trajectories[k] = std::move(tr);
  });

  for (std::size_t i = 0; i < nb; ++i) {
    Branch& b = state.branches[i];
    double phase = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
      const Trajectory& tr = out.trajectories[i * np + j];
      b.positions[probes[j]] = tr.final_position();
      b.velocities[probes[j]] = tr.velocities.back();
      const ProperPhase& ph = out.phases[i * np + j];
      phase += opts.include_rest_phase ? ph.total() : ph.excess;
    }
    b.amplitude *= std::polar(1.0, -phase);
  }
  out.state = std::move(state);
  return out;
}

/// Evolution in the frame where the masses are definite (or, with
/// require_definite off, directly in any frame using each branch's masses).
inline SemiclassicalResult evolve_semiclassical(const BranchState& state, double t, double dt,
                                                const UnitSystem& units = {}, const EvolveOptions& opts = {}) {
  if (opts.require_definite && !is_definite(state, state.masses(), opts.definite_tolerance)) {
    fail(ErrorCode::ValidationError, "masses are not definite; change into the mass frame first");
  }
  std::vector<PotentialModel> pots;
  for (std::size_t i = 0; i < state.branches.size(); ++i) {
    pots.push_back(branch_potential(state, i, units, opts.softening));
  }
  return evolve_in_potentials(state, pots, t, dt, units, opts);
}

/// Maps a trajectory recorded in the mass frame back to the previous frame.
inline Trajectory map_trajectory_back(Trajectory tr, const FrameRecord& rec, int dimension) {
  for (auto& x : tr.positions) x = project_to_dimension(rec.backward(x), dimension);
  for (auto& v : tr.velocities) v = project_to_dimension(rec.rotation.transpose() * v, dimension);
  return tr;
}

/// Transform into the mass frame, evolve, transform back. Trajectories are
/// reported in the original frame.
inline SemiclassicalResult evolve_covariant(const BranchState& state, double t, double dt,
                                            const UnitSystem& units = {}, const EvolveOptions& opts = {},
                                            const RigidFrameOptions& frame_opts = {}) {
  if (!state.frame) fail(ErrorCode::ValidationError, "state has no frame system");
  const SystemId previous = *state.frame;
  const BranchState in_m = to_mass_frame(state, frame_opts);
  SemiclassicalResult res = evolve_semiclassical(in_m, t, dt, units, opts);
  for (auto& tr : res.trajectories) {
    const FrameRecord rec = branch_frame_record(in_m, tr.branch_index, previous);
    tr = map_trajectory_back(std::move(tr), rec, state.dimension);
  }
  res.state = from_mass_frame(std::move(res.state), previous);
  return res;
}

}  // namespace qrfsim
