#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace qrfsim;

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kSqrt3 = std::numbers::sqrt3;

BranchState golden_input() { return build_state(load_scenario(QRFSIM_SCENARIO_DIR "/rigid_golden.scn")); }

void expect_vec(const Vec3& got, double x, double y, double tol = 1e-12) {
  EXPECT_NEAR(got.x(), x, tol);
  EXPECT_NEAR(got.y(), y, tol);
  EXPECT_EQ(got.z(), 0.0);
}

/// Proper rotation mapping the orthonormal frame built from (a, b) onto the one
/// built from (e1, w), by Gram-Schmidt on both sides.
Mat3 gram_schmidt_rotation(const Vec3& e1, const Vec3& a, const Vec3& b, int dimension) {
  auto frame = [dimension](const Vec3& first, const Vec3& second) {
    Mat3 f = Mat3::Identity();
    const Vec3 f1 = first.normalized();
    if (dimension == 2) {
      f.col(0) = f1;
      f.col(1) = Vec3(-f1.y(), f1.x(), 0.0);
      f.col(2) = Vec3::UnitZ();
      return f;
    }
    const Vec3 f2 = (second - second.dot(f1) * f1).normalized();
    f.col(0) = f1;
    f.col(1) = f2;
    f.col(2) = f1.cross(f2);
    return f;
  };
  const Vec3 g1 = e1.normalized();
  int least = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(g1[k]) < std::abs(g1[least])) least = k;
  }
  const Vec3 w = Vec3::Unit(least) - g1[least] * g1;
  return frame(e1, w) * frame(a, b).transpose();
}

BranchState two_mass_tagged() {
  // masses at (0,0) and (1,0) in tag 0, rotated by 90 degrees and shifted in tag 1
  BranchState st;
  st.dimension = 2;
  st.registry = {{"R", SystemKind::reference},
                 {"M1", SystemKind::mass, 1.0},
                 {"M2", SystemKind::mass, 2.0},
                 {"S", SystemKind::probe, 0.1},
                 {"A", SystemKind::ancilla}};
  st.frame = SystemId("R");
  Branch b0, b1;
  b0.amplitude = 1.0 / kSqrt2;
  b0.ancilla_tag = 0;
  b0.positions = {{"R", Vec3::Zero()}, {"M1", Vec3(1, 0, 0)}, {"M2", Vec3(2, 0, 0)}, {"S", Vec3(1, 1, 0)}};
  b1.amplitude = Complex(0.0, 1.0 / kSqrt2);
  b1.ancilla_tag = 1;
  b1.positions = {{"R", Vec3::Zero()}, {"M1", Vec3(0, 2, 0)}, {"M2", Vec3(0, 3, 0)}, {"S", Vec3(1, 1, 0)}};
  st.branches = {b0, b1};
  return st;
}

}  // namespace

// ---------------------------------------------------------------------------
// Golden four-mass example

TEST(Golden, RotationAngles) {
  const auto st = golden_input();
  const Vec3 e1(1, 0, 0);
  const auto s1 = rotation_from_vectors(e1, st.branches[0].position("M2"), 2);
  const auto s2 = rotation_from_vectors(e1, st.branches[1].position("M2"), 2);
  EXPECT_NEAR(s1.angle, std::numbers::pi / 4.0, 1e-15);
  EXPECT_NEAR(s2.angle, 5.0 * std::numbers::pi / 12.0, 1e-15);
}

TEST(Golden, RelativeCoordinates) {
  const auto rel = t_rel(golden_input());
  ASSERT_EQ(rel.size(), 2u);
  for (const auto& rc : rel) {
    ASSERT_EQ(rc.residuals.size(), 1u);
    EXPECT_NEAR(rc.residuals[0].x(), 1.0, 1e-15);
    EXPECT_NEAR(rc.residuals[0].y(), 1.0, 1e-15);
  }
  expect_vec(rel[0].origin, 0.0, 0.0);
  expect_vec(rel[0].axes[0], 1.0, 1.0);
  expect_vec(rel[0].axes[1], 0.0, 1.0);
}

TEST(Golden, FrameOfTheMasses) {
  const auto out = s_r_to_m(golden_input());
  ASSERT_EQ(out.frame, SystemId("M1"));
  for (const auto& b : out.branches) {
    expect_vec(b.position("M1"), 0.0, 0.0);
    expect_vec(b.position("M2"), kSqrt2, 0.0);
    expect_vec(b.position("M3"), 1.0 / kSqrt2, 1.0 / kSqrt2);
    expect_vec(b.position("M4"), 3.0 / kSqrt2, 1.0 / kSqrt2);
  }
  expect_vec(out.branches[0].position("R2"), 1.0, -1.0);
  expect_vec(out.branches[0].position("S"), kSqrt2, -kSqrt2);
  expect_vec(out.branches[1].position("R2"), 0.5 * (kSqrt3 - 1.0), 0.5 * (-kSqrt3 - 1.0));
  expect_vec(out.branches[1].position("S"), (kSqrt3 - 1.0) / kSqrt2, (-kSqrt3 - 1.0) / kSqrt2);
  EXPECT_EQ(out.branches[0].amplitude, golden_input().branches[0].amplitude);
}

TEST(Golden, RoundTrip) {
  const auto in = golden_input();
  const auto back = s_r_to_m_inverse(s_r_to_m(in));
  EXPECT_LE(oracle::max_position_difference(in, back), 1e-12);
  EXPECT_LE(oracle::max_amplitude_difference(in, back), 1e-12);
  EXPECT_EQ(back.frame, SystemId("R1"));
}

// ---------------------------------------------------------------------------
// Rotations

TEST(Rotation, ParallelIsIdentity) {
  const auto spec = rotation_from_vectors(Vec3(1, 0, 0), Vec3(3, 0, 0), 3);
  EXPECT_EQ(spec.angle, 0.0);
  EXPECT_TRUE(rotation_matrix(spec).isApprox(Mat3::Identity(), 1e-15));
}

TEST(Rotation, HalfTurnAboutZ) {
  const Mat3 r = axis_angle_matrix(std::numbers::pi, Vec3::UnitZ());
  EXPECT_TRUE(r.isApprox(Vec3(-1, -1, 1).asDiagonal().toDenseMatrix(), 1e-15));
}

TEST(Rotation, AntiparallelUsesLexicographicAxis) {
  const auto spec = rotation_from_vectors(Vec3(1, 0, 0), Vec3(-2, 0, 0), 3);
  EXPECT_DOUBLE_EQ(spec.angle, std::numbers::pi);
  EXPECT_NEAR(spec.axis.dot(Vec3::UnitX()), 0.0, 1e-15);
  EXPECT_NEAR(spec.axis.norm(), 1.0, 1e-15);
  const Vec3 mapped = rotation_matrix(spec) * Vec3(-2, 0, 0);
  EXPECT_NEAR((mapped - Vec3(2, 0, 0)).norm(), 0.0, 1e-14);
}

TEST(Rotation, ZeroVectorThrows) {
  try {
    rotation_from_vectors(Vec3::Zero(), Vec3(1, 0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroVector);
  }
}

TEST(Rotation, RandomSpecsAreProperAndAligning) {
  std::mt19937_64 rng(3);
  for (int dim : {2, 3}) {
    for (int k = 0; k < 500; ++k) {
      const Vec3 e1 = oracle::random_vector(rng, dim);
      const Vec3 a = oracle::random_vector(rng, dim);
      const Mat3 r = rotation_matrix(rotation_from_vectors(e1, a, dim));
      EXPECT_LE((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
      EXPECT_LE((r * a.normalized() - e1.normalized()).norm(), 1e-12);
    }
  }
}

TEST(Rotation, KabschRecoversRigidMap) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 100; ++k) {
    std::vector<Vec3> from, to;
    const Mat3 r = oracle::random_rotation(rng, 3);
    const Vec3 t = oracle::random_vector(rng, 3);
    for (int n = 0; n < 5; ++n) {
      from.push_back(oracle::random_vector(rng, 3));
      to.push_back(r * from.back() + t);
    }
    const RigidMap m = rigid_map_between(from, to);
    for (std::size_t n = 0; n < from.size(); ++n) EXPECT_LE((m(from[n]) - to[n]).norm(), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Relative coordinates

TEST(RelCoords, RoundTripSixMasses) {
  std::mt19937_64 rng(29);
  for (int k = 0; k < 200; ++k) {
    const auto st = oracle::random_rigid_state(rng, 3, 6, 2, 1);
    const auto back = t_rel_inverse(st, t_rel(st));
    EXPECT_LE(oracle::max_position_difference(st, back), 1e-12);
  }
}

TEST(RelCoords, OriginAlreadyAtZero) {
  const auto rel = t_rel(golden_input());
  EXPECT_EQ(rel[1].origin, Vec3::Zero());
}

TEST(RelCoords, CoplanarMassesAreSingular) {
  std::mt19937_64 rng(2);
  auto st = oracle::random_rigid_state(rng, 3, 4, 1, 0);
  auto& b = st.branches[0];
  b.positions["M4"] = 0.3 * b.position("M2") + 0.7 * b.position("M3");
  try {
    t_rel(st);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularDecomposition);
  }
}

TEST(RelCoords, TooFewMasses) {
  std::mt19937_64 rng(2);
  const auto st = oracle::random_rigid_state(rng, 3, 3, 1, 0);
  EXPECT_THROW(t_rel(st), Error);
}

// ---------------------------------------------------------------------------
// Change into the frame of the masses: property suites

TEST(MassFrame, RoundTripIsometryDefiniteness) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> pick_branches(1, 4), pick_probes(0, 2);
  int cases = 0;
  double worst_rt = 0.0, worst_amp = 0.0, worst_iso = 0.0, worst_def = 0.0, worst_axis = 0.0;
  for (int dim : {2, 3}) {
    std::uniform_int_distribution<int> pick_masses(dim + 1, 6);
    for (int k = 0; k < 600; ++k, ++cases) {
      const auto st = oracle::random_rigid_state(rng, dim, pick_masses(rng), pick_branches(rng), pick_probes(rng));
      const auto in_m = s_r_to_m(st);
      const auto back = s_r_to_m_inverse(in_m);
      worst_rt = std::max(worst_rt, oracle::max_position_difference(st, back));
      worst_amp = std::max(worst_amp, oracle::max_amplitude_difference(st, back));
      worst_iso = std::max(worst_iso, oracle::max_distance_change(st, in_m, {"R2"}));
      worst_def = std::max(worst_def, mass_definiteness_deviation(in_m));
      const Vec3 a = st.branches[0].position("M2") - st.branches[0].position("M1");
      for (const auto& b : in_m.branches) {
        worst_axis = std::max(worst_axis, std::abs((b.position("R2") - b.position("R1")).norm() - a.norm()));
      }
      EXPECT_TRUE(is_definite(in_m, in_m.masses(), 1e-10));
      EXPECT_EQ(oracle::max_amplitude_difference(st, in_m), 0.0);
    }
  }
  EXPECT_GE(cases, 1000);
  EXPECT_LE(worst_rt, 1e-12);
  EXPECT_LE(worst_amp, 1e-12);
  EXPECT_LE(worst_iso, 1e-12);
  EXPECT_LE(worst_def, 1e-10);
  EXPECT_LE(worst_axis, 1e-12);
}

TEST(MassFrame, Unitarity) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const auto a = oracle::random_rigid_state(rng, 3, 4, 3, 1);
    auto b = a;
    double w = 0.0;
    for (auto& br : b.branches) {
      br.amplitude = {u(rng), u(rng)};
      w += std::norm(br.amplitude);
    }
    for (auto& br : b.branches) br.amplitude /= std::sqrt(w);
    const Complex before = inner_product(a, b);
    const Complex after = inner_product(s_r_to_m(a), s_r_to_m(b));
    EXPECT_LE(std::abs(after - before), 1e-10);
  }
}

TEST(MassFrame, SingleBranchIsClassicalCoordinateChange) {
  std::mt19937_64 rng(41);
  for (int dim : {2, 3}) {
    for (int k = 0; k < 300; ++k) {
      const auto st = oracle::random_rigid_state(rng, dim, dim + 2, 1, 2);
      const Branch& b = st.branches[0];
      const Vec3 x1 = b.position("M1");
      const Vec3 e1 = b.position("R2");
      const Vec3 a = b.position("M2") - x1;
      const Vec3 bb = b.position("M3") - x1;
      const Mat3 q = gram_schmidt_rotation(e1, a, bb, dim);
      const auto out = s_r_to_m(st).branches[0];
      for (const auto& [id, x] : b.positions) {
        Vec3 want = q * (x - x1);
        if (id == SystemId("R2")) want = q * (a.norm() / e1.norm() * e1 - x1);
        EXPECT_LE((out.position(id) - want).norm(), 1e-12) << id.label;
      }
    }
  }
}

TEST(MassFrame, VelocitiesRotateAndReturn) {
  std::mt19937_64 rng(43);
  auto st = oracle::random_rigid_state(rng, 3, 4, 2, 1);
  for (auto& b : st.branches) b.velocities["S1"] = Vec3(0.1, -0.2, 0.3);
  const auto in_m = s_r_to_m(st);
  for (const auto& b : in_m.branches) EXPECT_NEAR(b.velocity("S1").norm(), Vec3(0.1, -0.2, 0.3).norm(), 1e-15);
  const auto back = s_r_to_m_inverse(in_m);
  for (const auto& b : back.branches) EXPECT_LE((b.velocity("S1") - Vec3(0.1, -0.2, 0.3)).norm(), 1e-15);
}

TEST(MassFrame, EqualBranchesStayEqual) {
  auto st = golden_input();
  st.branches[1] = st.branches[0];
  const auto back = s_r_to_m_inverse(s_r_to_m(st));
  EXPECT_LE(oracle::max_position_difference(st, back), 1e-15);
}

TEST(MassFrame, DistortedConfigurationIsRejected) {
  auto st = golden_input();
  st.branches[1].positions["M4"] += Vec3(1e-3, 0, 0);
  try {
    s_r_to_m(st);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotRigidlyRelated);
  }
}

TEST(MassFrame, MirrorImageIsRejected) {
  auto st = golden_input();
  for (auto& [id, x] : st.branches[1].positions) x = Vec3(x.x(), -x.y(), 0.0);
  st.branches[1].positions["R2"] = Vec3(1, 0, 0);
  try {
    s_r_to_m(st);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotRigidlyRelated);
  }
}

TEST(MassFrame, InverseNeedsRecord) {
  auto in_m = s_r_to_m(golden_input());
  in_m.branches[0].frame_record.reset();
  try {
    s_r_to_m_inverse(in_m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFrameRecord);
  }
}

TEST(MassFrame, WrongFrameIsRejected) {
  auto st = golden_input();
  st.frame = SystemId("M1");
  EXPECT_THROW(s_r_to_m(st), Error);
}

// ---------------------------------------------------------------------------
// One-mass shift (S^{A->B})

TEST(Shift, ThreeSystemExample) {
  BranchState st;
  st.dimension = 3;
  st.registry = {{"A", SystemKind::reference}, {"B", SystemKind::mass, 1.0}, {"C", SystemKind::probe, 1.0}};
  st.frame = SystemId("A");
  Branch b0, b1;
  b0.amplitude = 0.6;
  b0.positions = {{"A", Vec3::Zero()}, {"B", Vec3(1, 2, 3)}, {"C", Vec3(-1, 0, 4)}};
  b1.amplitude = 0.8;
  b1.positions = {{"A", Vec3::Zero()}, {"B", Vec3::Zero()}, {"C", Vec3(2, 2, 2)}};
  st.branches = {b0, b1};
  const auto out = qrf_supp1(st, "B");
  EXPECT_EQ(out.branches[0].position("B"), Vec3::Zero());
  EXPECT_EQ(out.branches[0].position("A"), Vec3(-1, -2, -3));
  EXPECT_EQ(out.branches[0].position("C"), Vec3(-2, -2, 1));
  EXPECT_EQ(out.branches[1].position("C"), Vec3(2, 2, 2));  // x_i = 0: labels only
  EXPECT_EQ(out.frame, SystemId("B"));
  EXPECT_THROW(qrf_supp1(out, "B"), Error);
  EXPECT_THROW(qrf_supp1(st, "Z"), Error);
}

TEST(Shift, RoundTripAndObservables) {
  std::mt19937_64 rng(53);
  for (int k = 0; k < 300; ++k) {
    auto st = oracle::random_rigid_state(rng, 3, 4, 3, 1);
    const auto out = qrf_shift_one_mass(st, "M2");
    const auto back = qrf_shift_one_mass(out, "R1");
    EXPECT_NEAR(std::abs(inner_product(st, back)), 1.0, 1e-12);
    EXPECT_LE(oracle::max_position_difference(st, back), 1e-15);
    EXPECT_LE(oracle::max_distance_change(st, out), 1e-15);
    // <x_S - x_M2> in the old frame equals <x_S> in the new one
    Vec3 before = Vec3::Zero(), after = Vec3::Zero();
    for (std::size_t i = 0; i < st.branches.size(); ++i) {
      const double w = std::norm(st.branches[i].amplitude);
      before += w * (st.branches[i].position("S1") - st.branches[i].position("M2"));
      after += w * out.branches[i].position("S1");
    }
    EXPECT_LE((before - after).norm(), 1e-14);
  }
}

// ---------------------------------------------------------------------------
// Ancilla-controlled maps

TEST(Ancilla, AlignmentMakesMassesDefinite) {
  const auto st = two_mass_tagged();
  const auto maps = ancilla_alignment_maps(st);
  const auto out = ancilla_transform(st, maps);
  EXPECT_TRUE(is_definite(out, out.masses(), 1e-12));
  EXPECT_EQ(out.frame, SystemId("M1"));
  EXPECT_LE(oracle::max_distance_change(st, out), 1e-12);
  const auto back = ancilla_transform_inverse(out, maps, SystemId("R"));
  EXPECT_LE(oracle::max_position_difference(st, back), 1e-12);
  EXPECT_LE(oracle::max_amplitude_difference(st, back), 0.0);
}

TEST(Ancilla, IdentityOnDefiniteConfiguration) {
  auto st = two_mass_tagged();
  st.branches[1].positions = st.branches[0].positions;
  st.branches[1].positions["S"] = Vec3(5, 5, 0);
  const AncillaMaps maps{{0, CoordinateMap::identity()}, {1, CoordinateMap::identity()}};
  const auto out = ancilla_transform(st, maps);
  EXPECT_EQ(oracle::max_position_difference(st, out), 0.0);
  EXPECT_EQ(out.frame, SystemId("R"));
}

TEST(Ancilla, RandomRoundTrip) {
  std::mt19937_64 rng(61);
  for (int k = 0; k < 200; ++k) {
    auto st = oracle::random_rigid_state(rng, 3, 4, 3, 2);
    for (std::size_t i = 0; i < st.branches.size(); ++i) st.branches[i].ancilla_tag = static_cast<int>(i);
    for (auto& b : st.branches) b.positions["R2"] = Vec3(0.5, 0.5, 0.5);
    const auto maps = ancilla_alignment_maps(st);
    const auto out = ancilla_transform(st, maps);
    EXPECT_TRUE(is_definite(out, out.masses(), 1e-10));
    EXPECT_LE(oracle::max_distance_change(st, out), 1e-12);
    const auto back = ancilla_transform_inverse(out, maps, SystemId("R1"));
    EXPECT_LE(oracle::max_position_difference(st, back), 1e-12);
  }
}

TEST(Ancilla, Errors) {
  const auto st = two_mass_tagged();
  auto untagged = st;
  untagged.branches[1].ancilla_tag.reset();
  const auto maps = ancilla_alignment_maps(st);
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code_of([&] { ancilla_transform(untagged, maps); }), ErrorCode::TagMissing);
  const AncillaMaps ids{{0, CoordinateMap::identity()}, {1, CoordinateMap::identity()}};
  EXPECT_EQ(code_of([&] { ancilla_transform(st, ids); }), ErrorCode::NonDefiniteResult);
  AncillaMaps stretch = maps;
  stretch[1] = {[](const Vec3& x) { return 2.0 * x; }, [](const Vec3& x) { return 0.5 * x; }};
  EXPECT_EQ(code_of([&] { ancilla_transform(st, stretch); }), ErrorCode::NotDistancePreserving);
  AncillaMaps broken = maps;
  broken[1].inverse = [](const Vec3& x) { return x; };
  EXPECT_EQ(code_of([&] { ancilla_transform(st, broken); }), ErrorCode::NonInvertibleMap);
}

TEST(Dispatch, OneReferenceUsesShift) {
  BranchState st = build_state(load_scenario(QRFSIM_SCENARIO_DIR "/one_mass.scn"));
  const auto in_m = to_mass_frame(st);
  EXPECT_EQ(in_m.frame, SystemId("M"));
  EXPECT_TRUE(is_definite(in_m, {"M"}, 0.0));
  EXPECT_NEAR(in_m.branches[0].position("R").x(), -1.0, 0.0);
  const auto back = from_mass_frame(in_m, "R");
  EXPECT_LE(oracle::max_position_difference(st, back), 1e-15);
  const FrameRecord rec = branch_frame_record(in_m, 1, "R");
  EXPECT_NEAR(rec.backward(in_m.branches[1].position("P")).x(), 1.1, 1e-15);
}
