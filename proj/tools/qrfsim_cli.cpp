// qrfsim: command line driver for scenario files.
//
//   qrfsim <run|transform|clock|compare|validate> --scenario FILE [--out DIR]
//          [--strict] [--seed N] [--dt SECONDS]
//
// Exit codes: 0 success, 1 error, 2 validity failure in strict mode.

#include "qrfsim/qrfsim.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace qrfsim;

namespace {

struct Args {
  std::string scenario;
  std::string out;
  bool strict = false;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
};

constexpr int kValidityFailure = 2;

struct Context {
  Scenario sc;
  BranchState state;
  fs::path out;
  bool strict = false;
};

Context load(const Args& a) {
  Context ctx;
  ctx.sc = load_scenario(a.scenario);
  if (a.seed) ctx.sc.seed = *a.seed;
  if (a.dt) {
    if (!(*a.dt > 0.0)) fail(ErrorCode::ValidationError, "--dt must be positive");
    ctx.sc.dt = *a.dt;
  }
  for (const auto& w : ctx.sc.warnings) std::cerr << "warning: " << w << "\n";
  ctx.state = build_state(ctx.sc);
  ctx.out = !a.out.empty() ? fs::path(a.out) : (ctx.sc.output.empty() ? fs::path(".") : fs::path(ctx.sc.output));
  ctx.strict = a.strict || (ctx.sc.validity && ctx.sc.validity->strict);
  return ctx;
}

/// Writes validity.csv; returns false when a condition fails.
bool check_validity(const Context& ctx, bool required) {
  if (!ctx.sc.validity && !required) return true;
  const ValidityReport rep = validate_far_frame(ctx.state, validity_config(ctx.sc), ctx.sc.units);
  emit_csv(validity_table(rep), ctx.out / "validity.csv");
  if (!rep.all_ok()) {
    std::cerr << (ctx.strict ? "error" : "warning") << ": validity conditions for frame '"
              << (ctx.state.frame ? ctx.state.frame->label : "") << "' not met (bound "
              << (rep.bound_ok ? "pass" : "fail") << ", tracking " << (rep.tracking_ok ? "pass" : "fail")
              << ", branch " << (rep.branch_ok ? "pass" : "fail") << ", overlap " << (rep.overlap_ok ? "pass" : "fail")
              << ")\n";
  }
  return rep.all_ok();
}

void write_trajectories(const Context& ctx, const std::vector<Trajectory>& trs, const BranchState& initial) {
  const auto probes = initial.registry.of_kind(SystemKind::probe);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    std::vector<Trajectory> sel;
    std::vector<double> w;
    for (const auto& tr : trs) {
      if (tr.system != probes[p]) continue;
      sel.push_back(tr);
      w.push_back(std::norm(initial.branch(tr.branch_index).amplitude));
    }
    const std::string name = p == 0 ? "trajectory.csv" : "trajectory_" + probes[p].label + ".csv";
    emit_csv(trajectory_table(sel, w, initial.dimension), ctx.out / name);
  }
  if (probes.empty()) emit_csv(trajectory_table({}, {}, initial.dimension), ctx.out / "trajectory.csv");
}

int cmd_transform(const Args& a) {
  const Context ctx = load(a);
  RigidFrameOptions fo;
  fo.rigidity_tolerance = ctx.sc.rigidity_tolerance;
  const BranchState in_m = to_mass_frame(ctx.state, fo);
  emit_csv(state_table(in_m), ctx.out / "transform.csv");
  return 0;
}

int cmd_run(const Args& a) {
  const Context ctx = load(a);
  if (!check_validity(ctx, false) && ctx.strict) return kValidityFailure;
  const CompareOptions opts = compare_options(ctx.sc);
  if (ctx.sc.dynamics == Dynamics::grid) {
    const GridWavefunction psi = grid_wavefunction(ctx.sc);
    const double soft = ctx.sc.grid->softening;
    const auto evolved = evolve_grid_covariant(ctx.state, psi, ctx.sc.duration, ctx.sc.dt, ctx.sc.units, {}, soft);
    emit_csv(grid_table(evolved), ctx.out / "grid.csv");
    const CovarianceReport rep =
        transform_hamiltonian_check(ctx.state, psi, ctx.sc.duration, ctx.sc.dt, ctx.sc.units, {}, soft);
    CsvTable t;
    t.header = {"branch", "l2_distance", "steps"};
    for (std::size_t i = 0; i < rep.branch_distance.size(); ++i) {
      t.add({std::to_string(i), format_double(rep.branch_distance[i]), std::to_string(rep.steps)});
    }
    emit_csv(t, ctx.out / "covariance_report.csv");
    return 0;
  }
  const SemiclassicalResult res =
      evolve_covariant(ctx.state, ctx.sc.duration, ctx.sc.dt, ctx.sc.units, opts.evolve, opts.frame);
  write_trajectories(ctx, res.trajectories, ctx.state);
  emit_csv(state_table(res.state), ctx.out / "final_state.csv");
  return 0;
}

int cmd_clock(const Args& a) {
  const Context ctx = load(a);
  if (!check_validity(ctx, false) && ctx.strict) return kValidityFailure;
  const auto spec = clock_spec(ctx.sc);
  if (!spec) fail(ErrorCode::ValidationError, "scenario has no clock system");
  RigidFrameOptions fo;
  fo.rigidity_tolerance = ctx.sc.rigidity_tolerance;
  const ClockScenarioResult r = run_clock_scenario(ctx.state, *spec, ctx.sc.duration, ctx.sc.units, fo);
  emit_csv(clock_table(r), ctx.out / "clock_report.csv");
  emit_csv(state_table(r.state), ctx.out / "final_state.csv");
  return 0;
}

int cmd_compare(const Args& a) {
  const Context ctx = load(a);
  if (!check_validity(ctx, false) && ctx.strict) return kValidityFailure;
  const CompareOptions opts = compare_options(ctx.sc);
  std::vector<GravityModel> models = ctx.sc.models;
  if (models.empty()) models = {GravityModel::semiclassical, GravityModel::collapse, GravityModel::covariant};
  std::vector<ModelPrediction> preds;
  for (auto m : models) preds.push_back(predict(m, ctx.state, ctx.sc.duration, ctx.sc.dt, ctx.sc.units, opts));
  const auto disc = covariance_violation_report(ctx.state, ctx.sc.duration, ctx.sc.dt, ctx.sc.units, opts);
  emit_csv(prediction_table(preds, ctx.state.dimension), ctx.out / "predictions.csv");
  emit_csv(compare_table(preds, disc), ctx.out / "compare_report.csv");
  if (ctx.sc.collapse_trials > 0) {
    for (const auto& p : preds) {
      if (p.model != GravityModel::collapse) continue;
      const auto counts = sample_outcomes(p.outcomes, ctx.sc.collapse_trials, ctx.sc.seed);
      CsvTable t;
      t.header = {"outcome", "weight", "count", "trials", "seed"};
      for (std::size_t k = 0; k < counts.size(); ++k) {
        t.add({std::to_string(k), format_double(p.outcomes[k].weight), std::to_string(counts[k]),
               std::to_string(ctx.sc.collapse_trials), std::to_string(ctx.sc.seed)});
      }
      emit_csv(t, ctx.out / "collapse_samples.csv");
    }
  }
  return 0;
}

int cmd_validate(const Args& a) {
  const Context ctx = load(a);
  const bool ok = check_validity(ctx, true);
  return ok || !ctx.strict ? 0 : kValidityFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-reference-frame gravity simulator"};
  app.require_subcommand(1);
  Args args;
  std::uint64_t seed = 0;
  double dt = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", args.scenario, "Scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "Output directory");
    sub->add_flag("--strict", args.strict, "Abort with exit code 2 when a validity condition fails");
    sub->add_option("--seed", seed, "RNG seed for collapse sampling")->each([&](const std::string&) {
      args.seed = seed;
    });
    sub->add_option("--dt", dt, "Time step in seconds")->each([&](const std::string&) { args.dt = dt; });
  };

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Args&);
  };
  const Command commands[] = {
      {"run", "Transform to the mass frame, evolve, transform back", cmd_run},
      {"transform", "Write the state in the frame of the masses", cmd_transform},
      {"clock", "Proper times and clock visibility", cmd_clock},
      {"compare", "Covariant, semi-classical and collapse predictions", cmd_compare},
      {"validate", "Far-frame validity conditions", cmd_validate},
  };
  int (*selected)(const Args&) = nullptr;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    sub->callback([&selected, run = c.run] { selected = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    return selected(args);
  } catch (const Error& e) {
    std::cerr << "error: " << args.scenario << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
