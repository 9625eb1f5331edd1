#pragma once

// Predictions of three gravity models for the same scenario: covariant
// (frame of the masses and back), semi-classical mean field, and collapse.

#include "qrfsim/error.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/semiclassical.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/transforms.hpp"
#include "qrfsim/units.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace qrfsim {

enum class GravityModel { covariant, semiclassical, collapse };

constexpr std::string_view to_string(GravityModel m) {
  switch (m) {
    case GravityModel::covariant: return "covariant";
    case GravityModel::semiclassical: return "semiclassical";
    case GravityModel::collapse: return "collapse";
  }
  return "unknown";
}

/// Branches sharing one mass configuration form one collapse outcome.
struct Outcome {
  double weight = 0.0;
  std::vector<std::size_t> branches;
};

struct ModelPrediction {
  GravityModel model = GravityModel::covariant;
  std::vector<Trajectory> trajectories;
  std::vector<double> weights;  // per trajectory
  bool entanglement_flag = false;
  /// For collapse: the outcomes stored side by side as branches (a mixture
  /// over `outcomes`), each with amplitude of modulus sqrt(weight).
  BranchState final_state;
  std::vector<Outcome> outcomes;
};

struct CompareOptions {
  EvolveOptions evolve;
  RigidFrameOptions frame;
  double position_tolerance = kDefaultPositionTolerance;  // m
  double collapse_time = 0.0;                             // s
};

namespace detail {

inline std::vector<double> trajectory_weights(const BranchState& initial, const std::vector<Trajectory>& trs) {
  std::vector<double> w;
  for (const auto& tr : trs) w.push_back(std::norm(initial.branch(tr.branch_index).amplitude));
  return w;
}

inline std::vector<Outcome> group_by_mass_configuration(const BranchState& state, double tol) {
  const auto masses = state.masses();
  std::vector<Outcome> out;
  for (std::size_t i = 0; i < state.branches.size(); ++i) {
    const Branch& b = state.branches[i];
    const double w = std::norm(b.amplitude);
    bool placed = false;
    for (auto& o : out) {
      const Branch& rep = state.branches[o.branches.front()];
      bool same = true;
      for (const auto& m : masses) same = same && within(rep.position(m), b.position(m), tol);
      if (same) {
        o.branches.push_back(i);
        o.weight += w;
        placed = true;
        break;
      }
    }
    if (!placed) out.push_back({w, {i}});
  }
  return out;
}

}  // namespace detail

inline ModelPrediction predict_semiclassical(const BranchState& state, double t, double dt,
                                             const UnitSystem& units = {}, const CompareOptions& opts = {}) {
  const PotentialModel mean = mean_potential(state, units, opts.evolve.softening);
  const std::vector<PotentialModel> pots(state.branches.size(), mean);
  SemiclassicalResult res = evolve_in_potentials(state, pots, t, dt, units, opts.evolve);
  ModelPrediction p;
  p.model = GravityModel::semiclassical;
  p.weights = detail::trajectory_weights(state, res.trajectories);
  p.trajectories = std::move(res.trajectories);
  p.final_state = std::move(res.state);
  p.outcomes = {{1.0, {}}};
  for (std::size_t i = 0; i < state.branches.size(); ++i) p.outcomes[0].branches.push_back(i);
  p.entanglement_flag = false;
  return p;
}

inline ModelPrediction predict_covariant(const BranchState& state, double t, double dt, const UnitSystem& units = {},
                                         const CompareOptions& opts = {}) {
  SemiclassicalResult res = evolve_covariant(state, t, dt, units, opts.evolve, opts.frame);
  ModelPrediction p;
  p.model = GravityModel::covariant;
  p.weights = detail::trajectory_weights(state, res.trajectories);
  p.trajectories = std::move(res.trajectories);
  p.final_state = std::move(res.state);
  p.outcomes = {{1.0, {}}};
  for (std::size_t i = 0; i < state.branches.size(); ++i) p.outcomes[0].branches.push_back(i);
  p.entanglement_flag =
      !is_definite(p.final_state, p.final_state.registry.of_kind(SystemKind::probe), opts.position_tolerance);
  return p;
}

/// Collapse at opts.collapse_time (covariant evolution before it). Every
/// outcome evolves in its own classical potential with Born weight.
inline ModelPrediction predict_collapse(const BranchState& state, double t, double dt, const UnitSystem& units = {},
                                        const CompareOptions& opts = {}) {
  if (opts.collapse_time < 0.0 || opts.collapse_time > t) {
    fail(ErrorCode::ValidationError, "collapse time must lie within [0, t]");
  }
  BranchState start = state;
  std::vector<Trajectory> before;
  if (opts.collapse_time > 0.0) {
    SemiclassicalResult pre = evolve_covariant(state, opts.collapse_time, dt, units, opts.evolve, opts.frame);
    start = std::move(pre.state);
    before = std::move(pre.trajectories);
  }
  const double remaining = t - opts.collapse_time;
  ModelPrediction p;
  p.model = GravityModel::collapse;
  p.outcomes = detail::group_by_mass_configuration(start, opts.position_tolerance);
  p.final_state = start;
  std::vector<Trajectory> trs(start.branches.size() * start.registry.of_kind(SystemKind::probe).size());
  const std::size_t np = start.registry.of_kind(SystemKind::probe).size();
  for (const auto& o : p.outcomes) {
    BranchState sub = start;
    sub.branches.clear();
    for (std::size_t i : o.branches) sub.branches.push_back(start.branches[i]);
    const double scale = 1.0 / std::sqrt(o.weight);
    for (auto& b : sub.branches) b.amplitude *= scale;
    EvolveOptions eo = opts.evolve;
    eo.require_definite = false;  // one classical potential per outcome
    std::vector<PotentialModel> pots(sub.branches.size(), branch_potential(sub, 0, units, eo.softening));
    SemiclassicalResult res = evolve_in_potentials(sub, pots, remaining, dt, units, eo);
    for (std::size_t k = 0; k < o.branches.size(); ++k) {
      Branch b = res.state.branches[k];
      b.amplitude /= scale;
      p.final_state.branches[o.branches[k]] = std::move(b);
    }
    for (std::size_t k = 0; k < res.trajectories.size(); ++k) {
      Trajectory& tr = res.trajectories[k];
      const std::size_t global = o.branches[tr.branch_index];
      const std::size_t slot = global * np + k % np;
      tr.branch_index = global;
      for (auto& time : tr.times) time += opts.collapse_time;
      trs[slot] = std::move(tr);
    }
  }
  if (!before.empty()) {
    for (std::size_t k = 0; k < trs.size(); ++k) {
      Trajectory joined = before[k];
      const double offset = joined.phase.back();
      for (std::size_t s = 1; s < trs[k].size(); ++s) {
        joined.times.push_back(trs[k].times[s]);
        joined.positions.push_back(trs[k].positions[s]);
        joined.velocities.push_back(trs[k].velocities[s]);
        joined.phase.push_back(offset + trs[k].phase[s]);
      }
      trs[k] = std::move(joined);
    }
  }
  p.trajectories = std::move(trs);
  p.weights = detail::trajectory_weights(state, p.trajectories);
  p.entanglement_flag = false;
  return p;
}

inline ModelPrediction predict(GravityModel model, const BranchState& state, double t, double dt,
                               const UnitSystem& units = {}, const CompareOptions& opts = {}) {
  switch (model) {
    case GravityModel::covariant: return predict_covariant(state, t, dt, units, opts);
    case GravityModel::semiclassical: return predict_semiclassical(state, t, dt, units, opts);
    case GravityModel::collapse: return predict_collapse(state, t, dt, units, opts);
  }
  fail(ErrorCode::ValidationError, "unknown model");
}

/// Seeded Born-rule sampling of outcome indices; returns counts per outcome.
inline std::vector<std::size_t> sample_outcomes(const std::vector<Outcome>& outcomes, std::size_t trials,
                                                std::uint64_t seed) {
  std::vector<double> w;
  for (const auto& o : outcomes) w.push_back(o.weight);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  std::vector<std::size_t> counts(outcomes.size(), 0);
  for (std::size_t k = 0; k < trials; ++k) ++counts[dist(rng)];
  return counts;
}

struct ModelDiscrepancy {
  GravityModel model = GravityModel::covariant;
  double position = 0.0;   // m, max over branches and probes at t
  double phase = 0.0;      // rad, max branch amplitude phase difference
  double coherence = 0.0;  // difference in purity of the two predictions
};

namespace detail {

inline double purity(const std::vector<Outcome>& outcomes) {
  double p = 0.0;
  for (const auto& o : outcomes) p += o.weight * o.weight;
  return p;
}

inline ModelDiscrepancy compare_states(GravityModel model, const BranchState& direct, const BranchState& round_trip) {
  ModelDiscrepancy d;
  d.model = model;
  const auto probes = direct.registry.of_kind(SystemKind::probe);
  for (std::size_t i = 0; i < direct.branches.size(); ++i) {
    const Branch& a = direct.branches[i];
    const Branch& b = round_trip.branch(i);
    for (const auto& p : probes) d.position = std::max(d.position, (a.position(p) - b.position(p)).norm());
    if (std::abs(a.amplitude) > 0.0 && std::abs(b.amplitude) > 0.0) {
      d.phase = std::max(d.phase, std::abs(std::arg(b.amplitude * std::conj(a.amplitude))));
    }
  }
  return d;
}

}  // namespace detail

/// For every model: prediction computed directly in the given frame versus
/// the same model applied in the mass frame and mapped back.
inline std::vector<ModelDiscrepancy> covariance_violation_report(const BranchState& state, double t, double dt,
                                                                 const UnitSystem& units = {},
                                                                 const CompareOptions& opts = {}) {
  if (!state.frame) fail(ErrorCode::ValidationError, "state has no frame system");
  const SystemId previous = *state.frame;
  const BranchState in_m = to_mass_frame(state, opts.frame);
  std::vector<ModelDiscrepancy> out;

  {
    EvolveOptions eo = opts.evolve;
    eo.require_definite = false;
    const SemiclassicalResult direct = evolve_semiclassical(state, t, dt, units, eo);
    const ModelPrediction rt = predict_covariant(state, t, dt, units, opts);
    out.push_back(detail::compare_states(GravityModel::covariant, direct.state, rt.final_state));
  }
  for (GravityModel m : {GravityModel::semiclassical, GravityModel::collapse}) {
    const ModelPrediction direct = predict(m, state, t, dt, units, opts);
    const ModelPrediction in_frame = predict(m, in_m, t, dt, units, opts);
    const BranchState back = from_mass_frame(in_frame.final_state, previous);
    ModelDiscrepancy d = detail::compare_states(m, direct.final_state, back);
    d.coherence = std::abs(detail::purity(direct.outcomes) - detail::purity(in_frame.outcomes));
    out.push_back(d);
  }
  return out;
}

}  // namespace qrfsim
