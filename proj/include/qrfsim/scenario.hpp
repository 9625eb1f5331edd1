#pragma once

// Scenario files: INI-style sections of `key = value` lines where every
// physical quantity carries its unit. See README.md for the grammar.

#include "qrfsim/clocks.hpp"
#include "qrfsim/error.hpp"
#include "qrfsim/format.hpp"
#include "qrfsim/grid.hpp"
#include "qrfsim/model_compare.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/units.hpp"
#include "qrfsim/validity.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace qrfsim {

enum class Dynamics { semiclassical, grid };

struct SystemSpec {
  std::string label;
  SystemKind kind = SystemKind::probe;
  std::optional<double> mass;  // kg
  std::optional<double> E0, E1;  // J
  std::optional<ClockState> internal;
};

struct BranchSpec {
  Complex amplitude{1.0, 0.0};
  std::optional<int> tag;
  std::map<std::string, Vec3> positions;
  std::map<std::string, Vec3> velocities;
};

struct ValiditySpec {
  std::optional<double> delta_x_R;  // m
  double tracking_ratio = 100.0;
  double overlap_epsilon = 1e-6;
  FallModel fall = FallModel::from_rest;
  bool strict = false;
};

struct GridSpec {
  std::array<std::size_t, 2> points{0, 0};
  int dimension = 1;
  double spacing = 0.0;          // m
  Vec3 origin = Vec3::Zero();    // m, frame coordinates of grid index 0
  double sigma = 0.0;            // m
  Vec3 k0 = Vec3::Zero();        // 1/m
  double softening = 0.0;        // m
};

struct Scenario {
  std::string name;
  UnitSystem units;
  int dimension = 3;
  std::optional<std::string> frame;
  Dynamics dynamics = Dynamics::semiclassical;
  double duration = 0.0;  // s
  double dt = 0.0;        // s
  std::uint64_t seed = 0;
  bool rest_phase = false;
  std::string output;

  double position_tolerance = kDefaultPositionTolerance;
  double rigidity_tolerance = 1e-9;
  double norm_tolerance = kNormTolerance;

  std::vector<SystemSpec> systems;
  std::vector<BranchSpec> branches;
  std::optional<ValiditySpec> validity;
  std::vector<GravityModel> models;
  double collapse_time = 0.0;
  std::size_t collapse_trials = 0;  // 0: enumerate outcomes
  std::optional<GridSpec> grid;

  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Units

enum class Quantity { length, time, mass, velocity, energy, action, gravitational, wavenumber, none };

namespace detail {

struct UnitEntry {
  std::string_view name;
  Quantity quantity;
  double factor;
};

inline constexpr UnitEntry kUnits[] = {
    {"m", Quantity::length, 1.0},          {"km", Quantity::length, 1e3},
    {"cm", Quantity::length, 1e-2},        {"mm", Quantity::length, 1e-3},
    {"um", Quantity::length, 1e-6},        {"nm", Quantity::length, 1e-9},
    {"s", Quantity::time, 1.0},            {"ms", Quantity::time, 1e-3},
    {"us", Quantity::time, 1e-6},          {"ns", Quantity::time, 1e-9},
    {"kg", Quantity::mass, 1.0},           {"g", Quantity::mass, 1e-3},
    {"mg", Quantity::mass, 1e-6},          {"ug", Quantity::mass, 1e-9},
    {"m/s", Quantity::velocity, 1.0},      {"km/s", Quantity::velocity, 1e3},
    {"mm/s", Quantity::velocity, 1e-3},    {"um/s", Quantity::velocity, 1e-6},
    {"J", Quantity::energy, 1.0},          {"eV", Quantity::energy, 1.602176634e-19},
    {"J*s", Quantity::action, 1.0},        {"eV*s", Quantity::action, 1.602176634e-19},
    {"m^3/(kg*s^2)", Quantity::gravitational, 1.0},
    {"m^3/kg/s^2", Quantity::gravitational, 1.0},
    {"1/m", Quantity::wavenumber, 1.0},    {"rad/m", Quantity::wavenumber, 1.0},
};

constexpr std::string_view canonical_unit(Quantity q) {
  switch (q) {
    case Quantity::length: return "m";
    case Quantity::time: return "s";
    case Quantity::mass: return "kg";
    case Quantity::velocity: return "m/s";
    case Quantity::energy: return "J";
    case Quantity::action: return "J*s";
    case Quantity::gravitational: return "m^3/(kg*s^2)";
    case Quantity::wavenumber: return "1/m";
    case Quantity::none: return "";
  }
  return "";
}

constexpr std::string_view quantity_name(Quantity q) {
  switch (q) {
    case Quantity::length: return "length";
    case Quantity::time: return "time";
    case Quantity::mass: return "mass";
    case Quantity::velocity: return "velocity";
    case Quantity::energy: return "energy";
    case Quantity::action: return "action";
    case Quantity::gravitational: return "gravitational constant";
    case Quantity::wavenumber: return "wave number";
    case Quantity::none: return "dimensionless number";
  }
  return "";
}

struct Cursor {
  int line = 0;
  int column = 0;
};

[[noreturn]] inline void parse_fail(const Cursor& at, const std::string& msg) {
  fail(ErrorCode::ParseError, "line " + std::to_string(at.line) + ", column " + std::to_string(at.column) + ": " + msg);
}

[[noreturn]] inline void unit_fail(const Cursor& at, const std::string& msg) {
  fail(ErrorCode::UnitError, "line " + std::to_string(at.line) + ", column " + std::to_string(at.column) + ": " + msg);
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Numbers followed by an optional unit token; returns SI values.
inline std::vector<double> parse_quantity_list(std::string_view value, Quantity q, const Cursor& at) {
  auto toks = split_ws(value);
  if (toks.empty()) parse_fail(at, "missing value");
  double factor = 1.0;
  double probe;
  if (!parse_double(toks.back(), probe)) {
    const std::string unit = toks.back();
    toks.pop_back();
    const UnitEntry* hit = nullptr;
    for (const auto& u : kUnits) {
      if (u.name == unit) hit = &u;
    }
    if (hit == nullptr) unit_fail(at, "unknown unit '" + unit + "'");
    if (hit->quantity != q) {
      unit_fail(at, "unit '" + unit + "' is not a " + std::string(quantity_name(q)));
    }
    factor = hit->factor;
  } else if (q != Quantity::none) {
    unit_fail(at, "missing unit; expected a " + std::string(quantity_name(q)) + " such as '" +
                      std::string(canonical_unit(q)) + "'");
  }
  if (toks.empty()) parse_fail(at, "missing number before unit");
  std::vector<double> out;
  for (const auto& t : toks) {
    double v;
    if (!parse_double(t, v)) parse_fail(at, "'" + t + "' is not a number");
    out.push_back(factor == 1.0 ? v : v * factor);
  }
  return out;
}

inline double parse_scalar(std::string_view value, Quantity q, const Cursor& at) {
  auto v = parse_quantity_list(value, q, at);
  if (v.size() != 1) parse_fail(at, "expected a single value");
  return v.front();
}

inline Vec3 parse_vector(std::string_view value, Quantity q, int dimension, const Cursor& at) {
  auto v = parse_quantity_list(value, q, at);
  if (static_cast<int>(v.size()) != dimension) {
    parse_fail(at, "expected " + std::to_string(dimension) + " components, got " + std::to_string(v.size()));
  }
  Vec3 out = Vec3::Zero();
  for (int k = 0; k < dimension; ++k) out[k] = v[static_cast<std::size_t>(k)];
  return out;
}

/// "a", "bi", "a+bi", "a-bi" with a, b real literals.
inline Complex parse_complex(std::string_view s, const Cursor& at) {
  s = trim(s);
  if (s.empty()) parse_fail(at, "missing complex number");
  if (s.back() != 'i') {
    double re;
    if (!parse_double(s, re)) parse_fail(at, "'" + std::string(s) + "' is not a complex number");
    return {re, 0.0};
  }
  std::string_view body = s.substr(0, s.size() - 1);
  // split at the last sign that is not part of an exponent
  std::size_t split = std::string_view::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  double re = 0.0, im = 0.0;
  std::string_view im_part = split == std::string_view::npos ? body : body.substr(split);
  if (split != std::string_view::npos && !parse_double(body.substr(0, split), re)) {
    parse_fail(at, "'" + std::string(s) + "' is not a complex number");
  }
  if (im_part == "+" || im_part.empty()) im = 1.0;
  else if (im_part == "-") im = -1.0;
  else if (!parse_double(im_part, im)) parse_fail(at, "'" + std::string(s) + "' is not a complex number");
  return {re, im};
}

inline std::string format_complex(Complex z) {
  if (z.imag() == 0.0 && !std::signbit(z.imag())) return format_double(z.real());
  std::string im = format_double(z.imag());
  if (im.front() != '-') im = "+" + im;
  return format_double(z.real()) + im + "i";
}

inline bool parse_bool(std::string_view s, const Cursor& at) {
  s = trim(s);
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  parse_fail(at, "expected true or false");
}

inline long long parse_int(std::string_view s, const Cursor& at) {
  s = trim(s);
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) parse_fail(at, "expected an integer");
  return v;
}

inline SystemKind parse_kind(std::string_view s, const Cursor& at) {
  s = trim(s);
  for (auto k : {SystemKind::reference, SystemKind::mass, SystemKind::probe, SystemKind::clock, SystemKind::ancilla}) {
    if (s == to_string(k)) return k;
  }
  parse_fail(at, "unknown system kind '" + std::string(s) + "'");
}

inline ClockState parse_internal(std::string_view s, const Cursor& at) {
  s = trim(s);
  if (s == "plus") return ClockState::plus();
  if (s == "minus") return ClockState::minus();
  if (s == "ground") return {Complex(1.0, 0.0), Complex(0.0, 0.0)};
  if (s == "excited") return {Complex(0.0, 0.0), Complex(1.0, 0.0)};
  const auto toks = split_ws(s);
  if (toks.size() != 2) parse_fail(at, "internal state must be plus, minus, ground, excited or two amplitudes");
  return {parse_complex(toks[0], at), parse_complex(toks[1], at)};
}

inline GravityModel parse_model(std::string_view s, const Cursor& at) {
  for (auto m : {GravityModel::covariant, GravityModel::semiclassical, GravityModel::collapse}) {
    if (s == to_string(m)) return m;
  }
  parse_fail(at, "unknown model '" + std::string(s) + "'");
}

inline FallModel parse_fall(std::string_view s, const Cursor& at) {
  s = trim(s);
  for (auto f : {FallModel::from_rest, FallModel::parabolic, FallModel::parabolic_printed}) {
    if (s == to_string(f)) return f;
  }
  parse_fail(at, "unknown fall model '" + std::string(s) + "'");
}

struct PendingVector {
  std::string text;
  Cursor at;
};

struct PendingBranch {
  BranchSpec spec;
  Cursor at;
  std::map<std::string, PendingVector> positions, velocities;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Parsing

inline Scenario parse_scenario(std::string_view text) {
  using namespace detail;
  Scenario sc;
  std::string section;
  std::string section_arg;
  std::map<std::string, Cursor> seen_sections;
  std::map<std::string, Cursor> missing_kind;
  bool have_dimension = false;
  std::vector<PendingBranch> branches;
  PendingBranch* branch = nullptr;
  SystemSpec* system = nullptr;
  std::optional<PendingVector> grid_origin, grid_k0;
  std::optional<Cursor> scenario_at;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string_view line = trim(raw);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const int indent = static_cast<int>(raw.find_first_not_of(" \t")) + 1;
    Cursor at{line_no, indent};

    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(at, "unterminated section header");
      const auto inner = split_ws(line.substr(1, line.size() - 2));
      if (inner.empty()) parse_fail(at, "empty section header");
      section = inner[0];
      section_arg = inner.size() > 1 ? inner[1] : "";
      if (inner.size() > 2) parse_fail(at, "section header takes at most one name");
      branch = nullptr;
      system = nullptr;
      if (section == "system") {
        if (section_arg.empty()) parse_fail(at, "system section needs a label");
        for (const auto& s : sc.systems) {
          if (s.label == section_arg) parse_fail(at, "duplicate system '" + section_arg + "'");
        }
        sc.systems.emplace_back();
        sc.systems.back().label = section_arg;
        system = &sc.systems.back();
        missing_kind[section_arg] = at;
      } else if (section == "branch") {
        if (!section_arg.empty()) parse_fail(at, "branch sections take no name");
        branches.push_back({});
        branches.back().at = at;
        branch = &branches.back();
      } else if (section == "scenario" || section == "units" || section == "tolerances" || section == "validity" ||
                 section == "compare" || section == "grid") {
        if (!section_arg.empty()) parse_fail(at, "section '" + section + "' takes no name");
        if (seen_sections.contains(section)) parse_fail(at, "duplicate section [" + section + "]");
        seen_sections[section] = at;
        if (section == "validity") sc.validity.emplace();
        if (section == "grid") sc.grid.emplace();
        if (section == "scenario") scenario_at = at;
      } else {
        parse_fail(at, "unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parse_fail(at, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    Cursor vat{line_no, static_cast<int>(raw.find('=')) + 2};
    if (key.empty()) parse_fail(at, "missing key");
    if (section.empty()) parse_fail(at, "key outside of any section");
    auto unknown = [&] { parse_fail(at, "unknown key '" + key + "' in [" + section + "]"); };

    if (section == "scenario") {
      if (key == "name") sc.name = std::string(value);
      else if (key == "dimension") {
        const auto d = parse_int(value, vat);
        if (d < 1 || d > 3) fail(ErrorCode::ValidationError, "dimension must be 1, 2 or 3");
        sc.dimension = static_cast<int>(d);
        have_dimension = true;
      } else if (key == "frame") sc.frame = std::string(value);
      else if (key == "dynamics") {
        if (value == "semiclassical") sc.dynamics = Dynamics::semiclassical;
        else if (value == "grid") sc.dynamics = Dynamics::grid;
        else parse_fail(vat, "dynamics must be semiclassical or grid");
      } else if (key == "duration") sc.duration = parse_scalar(value, Quantity::time, vat);
      else if (key == "dt") sc.dt = parse_scalar(value, Quantity::time, vat);
      else if (key == "seed") {
        const auto s = parse_int(value, vat);
        if (s < 0) parse_fail(vat, "seed must be non-negative");
        sc.seed = static_cast<std::uint64_t>(s);
      } else if (key == "rest_phase") sc.rest_phase = parse_bool(value, vat);
      else if (key == "output") sc.output = std::string(value);
      else unknown();
    } else if (section == "units") {
      if (key == "G") sc.units.G = parse_scalar(value, Quantity::gravitational, vat);
      else if (key == "c") sc.units.c = parse_scalar(value, Quantity::velocity, vat);
      else if (key == "hbar") sc.units.hbar = parse_scalar(value, Quantity::action, vat);
      else unknown();
    } else if (section == "tolerances") {
      if (key == "position") sc.position_tolerance = parse_scalar(value, Quantity::length, vat);
      else if (key == "rigidity") sc.rigidity_tolerance = parse_scalar(value, Quantity::none, vat);
      else if (key == "norm") sc.norm_tolerance = parse_scalar(value, Quantity::none, vat);
      else unknown();
    } else if (section == "validity") {
      if (key == "delta_x_R") sc.validity->delta_x_R = parse_scalar(value, Quantity::length, vat);
      else if (key == "tracking_ratio") sc.validity->tracking_ratio = parse_scalar(value, Quantity::none, vat);
      else if (key == "overlap_epsilon") sc.validity->overlap_epsilon = parse_scalar(value, Quantity::none, vat);
      else if (key == "fall") sc.validity->fall = parse_fall(value, vat);
      else if (key == "strict") sc.validity->strict = parse_bool(value, vat);
      else unknown();
    } else if (section == "compare") {
      if (key == "models") {
        sc.models.clear();
        for (const auto& t : split_ws(value)) sc.models.push_back(parse_model(t, vat));
      } else if (key == "collapse_time") sc.collapse_time = parse_scalar(value, Quantity::time, vat);
      else if (key == "trials") {
        const auto n = parse_int(value, vat);
        if (n < 0) parse_fail(vat, "trials must be non-negative");
        sc.collapse_trials = static_cast<std::size_t>(n);
      } else unknown();
    } else if (section == "grid") {
      GridSpec& g = *sc.grid;
      if (key == "points") {
        const auto toks = split_ws(value);
        if (toks.empty() || toks.size() > 2) parse_fail(vat, "points takes one or two integers");
        g.dimension = static_cast<int>(toks.size());
        for (std::size_t k = 0; k < toks.size(); ++k) {
          const auto n = parse_int(toks[k], vat);
          if (n < 2) parse_fail(vat, "need at least two grid points per axis");
          g.points[k] = static_cast<std::size_t>(n);
        }
        if (g.dimension == 1) g.points[1] = 1;
      } else if (key == "spacing") g.spacing = parse_scalar(value, Quantity::length, vat);
      else if (key == "origin") grid_origin = PendingVector{std::string(value), vat};
      else if (key == "sigma") g.sigma = parse_scalar(value, Quantity::length, vat);
      else if (key == "k0") grid_k0 = PendingVector{std::string(value), vat};
      else if (key == "softening") g.softening = parse_scalar(value, Quantity::length, vat);
      else unknown();
    } else if (section == "system") {
      if (key == "kind") {
        system->kind = parse_kind(value, vat);
        missing_kind.erase(system->label);
      } else if (key == "mass") {
        system->mass = parse_scalar(value, Quantity::mass, vat);
      } else if (key == "E0") system->E0 = parse_scalar(value, Quantity::energy, vat);
      else if (key == "E1") system->E1 = parse_scalar(value, Quantity::energy, vat);
      else if (key == "internal") system->internal = parse_internal(value, vat);
      else unknown();
    } else if (section == "branch") {
      if (key == "amplitude") branch->spec.amplitude = parse_complex(value, vat);
      else if (key == "tag") branch->spec.tag = static_cast<int>(parse_int(value, vat));
      else if (key.starts_with("v.")) {
        const std::string label = key.substr(2);
        if (branch->velocities.contains(label)) parse_fail(at, "duplicate velocity for '" + label + "'");
        branch->velocities[label] = {std::string(value), vat};
      } else {
        if (branch->positions.contains(key)) parse_fail(at, "duplicate position for '" + key + "'");
        branch->positions[key] = {std::string(value), vat};
      }
    }
    if (end == text.size()) break;
  }

  // ---- second pass: values that depend on the dimension, and validation
  for (const auto& [label, at] : missing_kind) {
    fail(ErrorCode::ValidationError, "system '" + label + "' has no kind (line " + std::to_string(at.line) + ")");
  }
  if (!scenario_at) fail(ErrorCode::ValidationError, "missing [scenario] section");
  if (!have_dimension) fail(ErrorCode::ValidationError, "scenario dimension is required");
  if (sc.systems.empty()) fail(ErrorCode::ValidationError, "no systems defined");
  if (branches.empty()) fail(ErrorCode::ValidationError, "no branches defined");
  if (!(sc.duration > 0.0)) fail(ErrorCode::ValidationError, "duration must be positive");
  if (sc.dt == 0.0) sc.dt = sc.duration / 1000.0;
  if (!(sc.dt > 0.0)) fail(ErrorCode::ValidationError, "dt must be positive");
  sc.units.validate();

  for (auto& s : sc.systems) {
    if (s.kind == SystemKind::probe && !s.mass) fail(ErrorCode::ValidationError, "probe mass required ('" + s.label + "')");
    if (s.kind == SystemKind::mass && !s.mass) fail(ErrorCode::ValidationError, "mass required for '" + s.label + "'");
    if (s.mass && !(*s.mass >= 0.0)) fail(ErrorCode::ValidationError, "negative mass for '" + s.label + "'");
    if ((s.E0 || s.E1 || s.internal) && s.kind != SystemKind::clock) {
      fail(ErrorCode::ValidationError, "clock levels given for non-clock system '" + s.label + "'");
    }
  }
  auto find_system = [&](const std::string& label) -> const SystemSpec* {
    for (const auto& s : sc.systems) {
      if (s.label == label) return &s;
    }
    return nullptr;
  };

  for (auto& pb : branches) {
    for (const auto& [label, pv] : pb.positions) {
      const SystemSpec* s = find_system(label);
      if (s == nullptr) parse_fail(pv.at, "unknown system '" + label + "' in branch");
      if (s->kind == SystemKind::ancilla) parse_fail(pv.at, "ancilla '" + label + "' has no position");
      pb.spec.positions[label] = parse_vector(pv.text, Quantity::length, sc.dimension, pv.at);
    }
    for (const auto& [label, pv] : pb.velocities) {
      if (find_system(label) == nullptr) parse_fail(pv.at, "unknown system '" + label + "' in branch");
      pb.spec.velocities[label] = parse_vector(pv.text, Quantity::velocity, sc.dimension, pv.at);
    }
    for (const auto& s : sc.systems) {
      if (s.kind != SystemKind::ancilla && !pb.spec.positions.contains(s.label)) {
        fail(ErrorCode::ValidationError, "branch at line " + std::to_string(pb.at.line) + " lacks a position for '" +
                                             s.label + "'");
      }
    }
    sc.branches.push_back(pb.spec);
  }

  double weight = 0.0;
  for (const auto& b : sc.branches) weight += std::norm(b.amplitude);
  if (!(weight > 0.0)) fail(ErrorCode::AllZeroAmplitudes, "every branch amplitude is zero");
  if (std::abs(weight - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
    const double scale = 1.0 / std::sqrt(weight);
    for (auto& b : sc.branches) b.amplitude *= scale;
    sc.warnings.push_back("amplitudes normalized (sum of weights was " + format_double(weight) + ")");
  }

  if (!sc.frame) {
    for (const auto& s : sc.systems) {
      if (s.kind == SystemKind::reference) {
        sc.frame = s.label;
        break;
      }
    }
  }
  if (sc.frame) {
    if (find_system(*sc.frame) == nullptr) fail(ErrorCode::ValidationError, "frame '" + *sc.frame + "' is not a system");
    for (const auto& b : sc.branches) {
      if (max_abs_component(b.positions.at(*sc.frame)) != 0.0) {
        fail(ErrorCode::ValidationError, "frame system '" + *sc.frame + "' must sit at the origin in every branch");
      }
    }
  }

  if (sc.grid) {
    GridSpec& g = *sc.grid;
    if (g.points[0] == 0) fail(ErrorCode::ValidationError, "grid points missing");
    if (!(g.spacing > 0.0)) fail(ErrorCode::ValidationError, "grid spacing must be positive");
    if (!(g.sigma > 0.0)) fail(ErrorCode::ValidationError, "grid packet width sigma must be positive");
    if (g.dimension > sc.dimension) fail(ErrorCode::ValidationError, "grid dimension exceeds scenario dimension");
    if (grid_origin) g.origin = parse_vector(grid_origin->text, Quantity::length, sc.dimension, grid_origin->at);
    if (grid_k0) g.k0 = parse_vector(grid_k0->text, Quantity::wavenumber, sc.dimension, grid_k0->at);
  }
  if (sc.dynamics == Dynamics::grid && !sc.grid) fail(ErrorCode::ValidationError, "grid dynamics needs a [grid] section");
  if (sc.collapse_time < 0.0 || sc.collapse_time > sc.duration) {
    fail(ErrorCode::ValidationError, "collapse_time must lie within [0, duration]");
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return parse_scenario(read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

// ---------------------------------------------------------------------------
// Serialization (SI units, shortest round-trip numbers)

inline std::string serialize_scenario(const Scenario& sc) {
  using detail::canonical_unit;
  auto q = [](double v, Quantity unit) {
    std::string s = format_double(v);
    if (unit != Quantity::none) s += " " + std::string(canonical_unit(unit));
    return s;
  };
  auto vec = [&](const Vec3& v, int d, Quantity unit) {
    std::string s;
    for (int k = 0; k < d; ++k) s += (k ? " " : "") + format_double(v[k]);
    return s + " " + std::string(canonical_unit(unit));
  };
  std::ostringstream o;
  o << "[scenario]\n";
  if (!sc.name.empty()) o << "name = " << sc.name << "\n";
  o << "dimension = " << sc.dimension << "\n";
  if (sc.frame) o << "frame = " << *sc.frame << "\n";
  o << "dynamics = " << (sc.dynamics == Dynamics::grid ? "grid" : "semiclassical") << "\n";
  o << "duration = " << q(sc.duration, Quantity::time) << "\n";
  o << "dt = " << q(sc.dt, Quantity::time) << "\n";
  o << "seed = " << sc.seed << "\n";
  o << "rest_phase = " << (sc.rest_phase ? "true" : "false") << "\n";
  if (!sc.output.empty()) o << "output = " << sc.output << "\n";
  o << "\n[units]\n";
  o << "G = " << q(sc.units.G, Quantity::gravitational) << "\n";
  o << "c = " << q(sc.units.c, Quantity::velocity) << "\n";
  o << "hbar = " << q(sc.units.hbar, Quantity::action) << "\n";
  o << "\n[tolerances]\n";
  o << "position = " << q(sc.position_tolerance, Quantity::length) << "\n";
  o << "rigidity = " << q(sc.rigidity_tolerance, Quantity::none) << "\n";
  o << "norm = " << q(sc.norm_tolerance, Quantity::none) << "\n";
  if (sc.validity) {
    const auto& v = *sc.validity;
    o << "\n[validity]\n";
    if (v.delta_x_R) o << "delta_x_R = " << q(*v.delta_x_R, Quantity::length) << "\n";
    o << "tracking_ratio = " << q(v.tracking_ratio, Quantity::none) << "\n";
    o << "overlap_epsilon = " << q(v.overlap_epsilon, Quantity::none) << "\n";
    o << "fall = " << to_string(v.fall) << "\n";
    o << "strict = " << (v.strict ? "true" : "false") << "\n";
  }
  if (!sc.models.empty() || sc.collapse_time != 0.0 || sc.collapse_trials != 0) {
    o << "\n[compare]\n";
    if (!sc.models.empty()) {
      o << "models =";
      for (auto m : sc.models) o << " " << to_string(m);
      o << "\n";
    }
    o << "collapse_time = " << q(sc.collapse_time, Quantity::time) << "\n";
    o << "trials = " << sc.collapse_trials << "\n";
  }
  if (sc.grid) {
    const auto& g = *sc.grid;
    o << "\n[grid]\n";
    o << "points = " << g.points[0];
    if (g.dimension == 2) o << " " << g.points[1];
    o << "\n";
    o << "spacing = " << q(g.spacing, Quantity::length) << "\n";
    o << "origin = " << vec(g.origin, sc.dimension, Quantity::length) << "\n";
    o << "sigma = " << q(g.sigma, Quantity::length) << "\n";
    o << "k0 = " << vec(g.k0, sc.dimension, Quantity::wavenumber) << "\n";
    o << "softening = " << q(g.softening, Quantity::length) << "\n";
  }
  for (const auto& s : sc.systems) {
    o << "\n[system " << s.label << "]\n";
    o << "kind = " << to_string(s.kind) << "\n";
    if (s.mass) o << "mass = " << q(*s.mass, Quantity::mass) << "\n";
    if (s.E0) o << "E0 = " << q(*s.E0, Quantity::energy) << "\n";
    if (s.E1) o << "E1 = " << q(*s.E1, Quantity::energy) << "\n";
    if (s.internal) {
      o << "internal = " << detail::format_complex(s.internal->ground) << " "
        << detail::format_complex(s.internal->excited) << "\n";
    }
  }
  for (const auto& b : sc.branches) {
    o << "\n[branch]\n";
    o << "amplitude = " << detail::format_complex(b.amplitude) << "\n";
    if (b.tag) o << "tag = " << *b.tag << "\n";
    for (const auto& s : sc.systems) {
      if (auto it = b.positions.find(s.label); it != b.positions.end()) {
        o << s.label << " = " << vec(it->second, sc.dimension, Quantity::length) << "\n";
      }
    }
    for (const auto& s : sc.systems) {
      if (auto it = b.velocities.find(s.label); it != b.velocities.end()) {
        o << "v." << s.label << " = " << vec(it->second, sc.dimension, Quantity::velocity) << "\n";
      }
    }
  }
  return o.str();
}

inline bool operator==(const SystemSpec& a, const SystemSpec& b) {
  auto same_clock = [](const std::optional<ClockState>& x, const std::optional<ClockState>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->ground == y->ground && x->excited == y->excited);
  };
  return a.label == b.label && a.kind == b.kind && a.mass == b.mass && a.E0 == b.E0 && a.E1 == b.E1 &&
         same_clock(a.internal, b.internal);
}

inline bool operator==(const BranchSpec& a, const BranchSpec& b) {
  return a.amplitude == b.amplitude && a.tag == b.tag && a.positions == b.positions && a.velocities == b.velocities;
}

/// Exact equality of every parsed value (warnings excluded).
inline bool same_values(const Scenario& a, const Scenario& b) {
  auto same_validity = [](const std::optional<ValiditySpec>& x, const std::optional<ValiditySpec>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->delta_x_R == y->delta_x_R && x->tracking_ratio == y->tracking_ratio &&
                  x->overlap_epsilon == y->overlap_epsilon && x->fall == y->fall && x->strict == y->strict);
  };
  auto same_grid = [](const std::optional<GridSpec>& x, const std::optional<GridSpec>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->points == y->points && x->dimension == y->dimension && x->spacing == y->spacing &&
                  x->origin == y->origin && x->sigma == y->sigma && x->k0 == y->k0 && x->softening == y->softening);
  };
  return a.name == b.name && a.units == b.units && a.dimension == b.dimension && a.frame == b.frame &&
         a.dynamics == b.dynamics && a.duration == b.duration && a.dt == b.dt && a.seed == b.seed &&
         a.rest_phase == b.rest_phase && a.output == b.output && a.position_tolerance == b.position_tolerance &&
         a.rigidity_tolerance == b.rigidity_tolerance && a.norm_tolerance == b.norm_tolerance &&
         a.systems == b.systems && a.branches == b.branches && same_validity(a.validity, b.validity) &&
         a.models == b.models && a.collapse_time == b.collapse_time && a.collapse_trials == b.collapse_trials &&
         same_grid(a.grid, b.grid);
}

// ---------------------------------------------------------------------------
// Conversion to simulator inputs

inline BranchState build_state(const Scenario& sc) {
  BranchState st;
  st.dimension = sc.dimension;
  for (const auto& s : sc.systems) st.registry.add(s.label, s.kind, s.mass.value_or(0.0));
  for (const auto& bs : sc.branches) {
    Branch b;
    b.amplitude = bs.amplitude;
    b.ancilla_tag = bs.tag;
    for (const auto& [label, x] : bs.positions) b.positions[label] = x;
    for (const auto& [label, v] : bs.velocities) b.velocities[label] = v;
    for (const auto& s : sc.systems) {
      if (s.kind == SystemKind::clock) b.clocks[s.label] = s.internal.value_or(ClockState::plus());
    }
    st.branches.push_back(std::move(b));
  }
  if (sc.frame) st.frame = SystemId(*sc.frame);
  validate(st, sc.norm_tolerance);
  return st;
}

/// Clock levels of the first clock; defaults give one oscillation per run.
inline std::optional<ClockSpec> clock_spec(const Scenario& sc) {
  for (const auto& s : sc.systems) {
    if (s.kind != SystemKind::clock) continue;
    ClockSpec spec = ClockSpec::one_period(sc.duration, sc.units);
    if (s.E0) spec.E0 = *s.E0;
    if (s.E1) spec.E1 = *s.E1;
    if (s.internal) spec.initial = *s.internal;
    spec.validate();
    return spec;
  }
  return std::nullopt;
}

inline ValidityConfig validity_config(const Scenario& sc) {
  ValidityConfig cfg;
  cfg.duration = sc.duration;
  cfg.dt = sc.dt;
  cfg.clock = clock_spec(sc);
  if (sc.validity) {
    cfg.delta_x_R = sc.validity->delta_x_R;
    cfg.tracking_ratio = sc.validity->tracking_ratio;
    cfg.overlap_epsilon = sc.validity->overlap_epsilon;
    cfg.fall = sc.validity->fall;
  }
  return cfg;
}

inline CompareOptions compare_options(const Scenario& sc) {
  CompareOptions opts;
  opts.evolve.include_rest_phase = sc.rest_phase;
  opts.evolve.definite_tolerance = sc.position_tolerance;
  if (sc.grid) opts.evolve.softening = sc.grid->softening;
  opts.frame.rigidity_tolerance = sc.rigidity_tolerance;
  opts.position_tolerance = sc.position_tolerance;
  opts.collapse_time = sc.collapse_time;
  return opts;
}

/// Probe packet on the scenario grid, centred on the first probe of branch 0.
inline GridWavefunction grid_wavefunction(const Scenario& sc) {
  if (!sc.grid) fail(ErrorCode::ValidationError, "scenario has no [grid] section");
  const GridSpec& g = *sc.grid;
  const SystemSpec* probe = nullptr;
  for (const auto& s : sc.systems) {
    if (s.kind == SystemKind::probe) {
      probe = &s;
      break;
    }
  }
  if (probe == nullptr) fail(ErrorCode::ValidationError, "grid dynamics needs a probe system");
  GridGeometry geo;
  geo.dimension = g.dimension;
  geo.points = g.points;
  geo.spacing = g.spacing;
  geo.origin = g.origin;
  return gaussian_packet(geo, sc.branches.front().positions.at(probe->label), g.sigma, g.k0, *probe->mass);
}

}  // namespace qrfsim
