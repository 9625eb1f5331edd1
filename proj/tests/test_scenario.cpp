#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace qrfsim;

namespace {

const char* kMinimal = R"([scenario]
dimension = 1
frame = R
duration = 1 s
dt = 10 ms

[system R]
kind = reference

[system M]
kind = mass
mass = 2 g

[system P]
kind = probe
mass = 1e-25 kg

[branch]
amplitude = 1
R = 0 m
M = 3 cm
P = 1 mm
)";

Error error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "parsed without error:\n" << text;
  return Error(ErrorCode::IoError, "none");
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST(Scenario, OneMassFile) {
  const auto sc = load_scenario(QRFSIM_SCENARIO_DIR "/one_mass.scn");
  EXPECT_EQ(sc.systems.size(), 3u);
  EXPECT_EQ(sc.branches.size(), 2u);
  ASSERT_EQ(sc.warnings.size(), 1u);
  EXPECT_NE(sc.warnings[0].find("normaliz"), std::string::npos);
  const auto st = build_state(sc);
  EXPECT_NEAR(std::abs(st.branches[0].amplitude), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(st.frame, SystemId("R"));
}

TEST(Scenario, UnitsAreConverted) {
  const auto sc = parse_scenario(kMinimal);
  EXPECT_DOUBLE_EQ(sc.dt, 1e-2);
  const auto st = build_state(sc);
  EXPECT_DOUBLE_EQ(st.registry.at(SystemId("M")).mass, 2e-3);
  EXPECT_DOUBLE_EQ(st.branches[0].position("M").x(), 3e-2);
  EXPECT_DOUBLE_EQ(st.branches[0].position("P").x(), 1e-3);
  EXPECT_TRUE(sc.warnings.empty());
}

TEST(Scenario, ProbeMassRequired) {
  const auto e = error_of(replace(kMinimal, "kind = probe\nmass = 1e-25 kg\n", "kind = probe\n"));
  EXPECT_EQ(e.code(), ErrorCode::ValidationError);
  EXPECT_NE(std::string(e.detail()).find("probe mass required"), std::string::npos);
}

TEST(Scenario, ParseErrorsCarryLineAndColumn) {
  const auto e = error_of(replace(kMinimal, "dt = 10 ms", "dt 10 ms"));
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_NE(std::string(e.detail()).find("line 5, column 1"), std::string::npos) << e.detail();

  const auto u = error_of(replace(kMinimal, "mass = 2 g", "mass = 2 m"));
  EXPECT_EQ(u.code(), ErrorCode::UnitError);
  EXPECT_NE(std::string(u.detail()).find("line 12"), std::string::npos) << u.detail();
}

TEST(Scenario, RejectsUnknownKeysAndSections) {
  EXPECT_EQ(error_of(replace(kMinimal, "frame = R", "frame = R\ncolour = blue")).code(), ErrorCode::ParseError);
  EXPECT_EQ(error_of(std::string(kMinimal) + "\n[extras]\n").code(), ErrorCode::ParseError);
  EXPECT_EQ(error_of(replace(kMinimal, "[system M]", "[system R]")).code(), ErrorCode::ParseError);
  EXPECT_EQ(error_of(replace(kMinimal, "P = 1 mm\n", "")).code(), ErrorCode::ValidationError);
}

TEST(Scenario, ZeroAmplitudesRejected) {
  EXPECT_EQ(error_of(replace(kMinimal, "amplitude = 1", "amplitude = 0")).code(), ErrorCode::AllZeroAmplitudes);
}

TEST(Scenario, SerializeRoundTrip) {
  for (const char* name : {"rigid_golden.scn", "one_mass.scn", "clock.scn", "midpoint.scn", "grid_1d.scn"}) {
    const auto sc = load_scenario(std::filesystem::path(QRFSIM_SCENARIO_DIR) / name);
    const auto again = parse_scenario(serialize_scenario(sc));
    EXPECT_TRUE(same_values(sc, again)) << name;
    EXPECT_EQ(serialize_scenario(again), serialize_scenario(sc)) << name;
  }
}

TEST(Scenario, ScaledUnitsGiveSameValues) {
  const auto a = parse_scenario(kMinimal);
  auto text = replace(kMinimal, "mass = 2 g", "mass = 0.002 kg");
  text = replace(text, "M = 3 cm", "M = 30 mm");
  text = replace(text, "dt = 10 ms", "dt = 0.01 s");
  EXPECT_TRUE(same_values(a, parse_scenario(text)));
  EXPECT_FALSE(same_values(a, parse_scenario(replace(kMinimal, "M = 3 cm", "M = 4 cm"))));
}

TEST(Csv, HeadersAndEmptyTables) {
  const auto st = build_state(load_scenario(QRFSIM_SCENARIO_DIR "/rigid_golden.scn"));
  const auto table = state_table(st);
  EXPECT_EQ(table.str().substr(0, table.str().find('\n')), "branch,system,frame,x1_m,x2_m,amplitude_re,amplitude_im");
  EXPECT_EQ(table.rows.size(), 2u * 7u);  // R1 R2 M1-M4 S
  EXPECT_EQ(trajectory_table({}, {}, 2).str(), "t_s,branch,x1_m,x2_m,v1_mps,v2_mps,phase_rad,weight\n");
  EXPECT_EQ(prediction_table({}, 1).str(), "model,t_s,branch,x1_m,v1_mps,phase_rad,weight,entangled\n");
  EXPECT_EQ(validity_table(ValidityReport{}).rows.size(), 9u);
}

TEST(Csv, DoublesRoundTripExactly) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double v = u(rng) * std::pow(10.0, 40.0 * u(rng));
    double back = 0.0;
    ASSERT_TRUE(parse_double(format_double(v), back));
    EXPECT_EQ(back, v);
  }
  double x = 0.0;
  EXPECT_FALSE(parse_double("1.0abc", x));
  EXPECT_TRUE(parse_double("+2.5", x));
  EXPECT_EQ(x, 2.5);
}

TEST(Csv, DeterministicTables) {
  const auto sc = load_scenario(QRFSIM_SCENARIO_DIR "/midpoint.scn");
  const auto st = build_state(sc);
  const auto a = predict_covariant(st, sc.duration, sc.dt, sc.units);
  const auto b = predict_covariant(st, sc.duration, sc.dt, sc.units);
  EXPECT_EQ(prediction_table({a}, 1).str(), prediction_table({b}, 1).str());
}
