#pragma once

// CSV tables for the command line tool. Rows are time-major, branch-minor.

#include "qrfsim/clocks.hpp"
#include "qrfsim/format.hpp"
#include "qrfsim/geodesic.hpp"
#include "qrfsim/grid.hpp"
#include "qrfsim/model_compare.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/validity.hpp"

#include <string>
#include <vector>

namespace qrfsim {

namespace detail {

inline void axis_columns(std::vector<std::string>& header, const std::string& prefix, const std::string& unit, int d) {
  for (int k = 1; k <= d; ++k) header.push_back(prefix + std::to_string(k) + "_" + unit);
}

inline void axis_cells(std::vector<std::string>& row, const Vec3& v, int d) {
  for (int k = 0; k < d; ++k) row.push_back(format_double(v[k]));
}

inline std::string flag(bool b) { return b ? "true" : "false"; }

}  // namespace detail

/// One row per (branch, positioned system) with the branch amplitude.
inline CsvTable state_table(const BranchState& st) {
  CsvTable t;
  t.header = {"branch", "system", "frame"};
  detail::axis_columns(t.header, "x", "m", st.dimension);
  t.header.insert(t.header.end(), {"amplitude_re", "amplitude_im"});
  const auto ids = st.registry.positioned();
  for (std::size_t i = 0; i < st.branches.size(); ++i) {
    const Branch& b = st.branches[i];
    for (const auto& id : ids) {
      std::vector<std::string> row{std::to_string(i), id.label, st.frame ? st.frame->label : ""};
      detail::axis_cells(row, b.position(id), st.dimension);
      row.push_back(format_double(b.amplitude.real()));
      row.push_back(format_double(b.amplitude.imag()));
      t.add(std::move(row));
    }
  }
  return t;
}

/// Columns t_s, branch, x*_m, v*_mps, phase_rad, weight. Trajectories must
/// share one time grid; they are emitted in the given order at each time.
inline CsvTable trajectory_table(const std::vector<Trajectory>& trs, const std::vector<double>& weights, int d,
                                 const std::string& leading = "", const std::string& leading_value = "") {
  CsvTable t;
  if (!leading.empty()) t.header.push_back(leading);
  t.header.insert(t.header.end(), {"t_s", "branch"});
  detail::axis_columns(t.header, "x", "m", d);
  detail::axis_columns(t.header, "v", "mps", d);
  t.header.insert(t.header.end(), {"phase_rad", "weight"});
  if (trs.empty()) return t;
  const std::size_t samples = trs.front().size();
  for (const auto& tr : trs) {
    if (tr.size() != samples) fail(ErrorCode::ValidationError, "trajectories do not share a time grid");
  }
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < trs.size(); ++k) {
      const Trajectory& tr = trs[k];
      std::vector<std::string> row;
      if (!leading.empty()) row.push_back(leading_value);
      row.push_back(format_double(tr.times[s]));
      row.push_back(std::to_string(tr.branch_index));
      detail::axis_cells(row, tr.positions[s], d);
      detail::axis_cells(row, tr.velocities[s], d);
      row.push_back(format_double(tr.phase[s]));
      row.push_back(format_double(weights.at(k)));
      t.add(std::move(row));
    }
  }
  return t;
}

inline CsvTable clock_table(const ClockScenarioResult& r) {
  CsvTable t;
  t.header = {"quantity", "branch", "value", "unit"};
  for (std::size_t i = 0; i < r.tau.size(); ++i) {
    t.add({"tau_offset", std::to_string(i), format_double(r.tau[i].offset), "s"});
    t.add({"tau", std::to_string(i), format_double(r.tau[i].value()), "s"});
    t.add({"p_plus", std::to_string(i), format_double(r.p_plus[i]), "1"});
  }
  t.add({"delta_tau", "", format_double(r.delta_tau), "s"});
  t.add({"visibility", "", format_double(r.visibility), "1"});
  return t;
}

inline CsvTable validity_table(const ValidityReport& v) {
  CsvTable t;
  t.header = {"quantity", "value", "unit", "verdict"};
  t.add({"delta_r_R", format_double(v.delta_r_R), "m", ""});
  t.add({"delta_x_R", format_double(v.delta_x_R), "m", ""});
  t.add({"probe_displacement", format_double(v.probe_displacement), "m", ""});
  t.add({"branch_pull_difference", format_double(v.branch_pull_difference), "m", ""});
  t.add({"clock_overlap", format_double(v.clock_overlap), "1", ""});
  t.add({"bound", "", "", v.bound_ok ? "pass" : "fail"});
  t.add({"tracking", "", "", v.tracking_ok ? "pass" : "fail"});
  t.add({"branch", "", "", v.branch_ok ? "pass" : "fail"});
  t.add({"overlap", "", "", v.overlap_ok ? "pass" : "fail"});
  return t;
}

/// Prediction blocks, one per model, each time-major.
inline CsvTable prediction_table(const std::vector<ModelPrediction>& preds, int d) {
  CsvTable out;
  for (const auto& p : preds) {
    CsvTable block = trajectory_table(p.trajectories, p.weights, d, "model", std::string(to_string(p.model)));
    block.header.push_back("entangled");
    for (auto& r : block.rows) r.push_back(detail::flag(p.entanglement_flag));
    if (out.header.empty()) out.header = block.header;
    for (auto& r : block.rows) out.rows.push_back(std::move(r));
  }
  if (out.header.empty()) {
    out = trajectory_table({}, {}, d, "model");
    out.header.push_back("entangled");
  }
  return out;
}

inline CsvTable compare_table(const std::vector<ModelPrediction>& preds, const std::vector<ModelDiscrepancy>& disc) {
  CsvTable t;
  t.header = {"model", "entangled", "outcomes", "position_discrepancy_m", "phase_discrepancy_rad",
              "coherence_discrepancy"};
  for (const auto& p : preds) {
    std::vector<std::string> row{std::string(to_string(p.model)), detail::flag(p.entanglement_flag),
                                 std::to_string(p.outcomes.size())};
    bool found = false;
    for (const auto& d : disc) {
      if (d.model != p.model) continue;
      row.insert(row.end(), {format_double(d.position), format_double(d.phase), format_double(d.coherence)});
      found = true;
    }
    if (!found) row.insert(row.end(), {"", "", ""});
    t.add(std::move(row));
  }
  return t;
}

inline CsvTable grid_table(const std::vector<GridWavefunction>& psis) {
  CsvTable t;
  const int d = psis.empty() ? 1 : psis.front().geometry.dimension;
  t.header = {"branch"};
  detail::axis_columns(t.header, "x", "m", 3);
  t.header.insert(t.header.end(), {"psi_re", "psi_im", "density_per_m" + (d == 2 ? std::string("2") : "")});
  for (std::size_t i = 0; i < psis.size(); ++i) {
    const auto& w = psis[i];
    for (std::size_t k = 0; k < w.psi.size(); ++k) {
      std::vector<std::string> row{std::to_string(i)};
      detail::axis_cells(row, w.geometry.point_at(k), 3);
      row.push_back(format_double(w.psi[k].real()));
      row.push_back(format_double(w.psi[k].imag()));
      row.push_back(format_double(std::norm(w.psi[k])));
      t.add(std::move(row));
    }
  }
  return t;
}

}  // namespace qrfsim
