#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace qrfsim;

namespace {

UnitSystem natural() {
  UnitSystem u;
  u.hbar = 1.0;
  return u;
}

GridGeometry line(std::size_t n, double h, double origin) {
  GridGeometry g;
  g.dimension = 1;
  g.points = {n, 1};
  g.spacing = h;
  g.origin = Vec3(origin, 0, 0);
  return g;
}

Complex overlap(const GridWavefunction& a, const GridWavefunction& b) {
  Complex s = 0.0;
  for (std::size_t k = 0; k < a.psi.size(); ++k) s += std::conj(a.psi[k]) * b.psi[k];
  return s * a.geometry.cell_volume();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

/// Two-dimensional rigid reference with three masses, rotated and shifted
/// between branches, and a probe near the origin.
BranchState rotated_branches_2d(std::mt19937_64& rng) {
  BranchState st;
  st.dimension = 2;
  st.registry = {{"R1", SystemKind::reference}, {"R2", SystemKind::reference}, {"M1", SystemKind::mass, 1.0},
                 {"M2", SystemKind::mass, 2.0},  {"M3", SystemKind::mass, 0.5},   {"P", SystemKind::probe, 1e-25}};
  st.frame = SystemId("R1");
  const std::vector<Vec3> base = {Vec3(1e-3, 0, 0), Vec3(0, 2e-3, 0), Vec3(-1.5e-3, -1e-3, 0)};
  for (int i = 0; i < 2; ++i) {
    Branch b;
    b.amplitude = 1.0 / std::sqrt(2.0);
    b.positions = {{"R1", Vec3::Zero()}, {"R2", Vec3(1e-3, 1e-3, 0)}, {"P", Vec3::Zero()}};
    const Mat3 r = oracle::random_rotation(rng, 2);
    const Vec3 t = oracle::random_vector(rng, 2, -2e-4, 2e-4);
    for (int k = 0; k < 3; ++k) b.positions["M" + std::to_string(k + 1)] = r * base[static_cast<std::size_t>(k)] + t;
    st.branches.push_back(std::move(b));
  }
  return st;
}

}  // namespace

TEST(Grid, FreeGaussianMatchesAnalyticSpread) {
  const UnitSystem u = natural();
  const auto g = line(512, 0.1, -25.6);
  const double x0 = -3.0, sigma = 1.0, k0 = 1.0, m = 1.0, t = 5.0;
  const auto psi0 = gaussian_packet(g, Vec3(x0, 0, 0), sigma, Vec3(k0, 0, 0), m);
  const auto out = hamiltonian_evolve(psi0, PotentialModel{}, t, 0.01, u);
  GridWavefunction want = psi0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    want.psi[k] = oracle::free_gaussian(g.point(k).x(), t, x0, sigma, k0, m, u.hbar);
  }
  EXPECT_LE(l2_distance(out, want), 1e-6);
  EXPECT_NEAR(out.centroid().x(), x0 + k0 * t, 1e-6);
}

TEST(Grid, HarmonicGroundStateIsStationary) {
  const UnitSystem u = natural();
  const auto g = line(256, 0.1, -12.8);
  const HarmonicPotential osc{1.0, Vec3::Zero()};
  const auto psi0 = gaussian_packet(g, Vec3::Zero(), std::sqrt(0.5), Vec3::Zero(), 1.0);
  const double t = 1.0;
  const auto out = hamiltonian_evolve(psi0, osc, t, 1e-4, u);
  const Complex ov = overlap(psi0, out);
  GridWavefunction rephased = psi0;
  for (auto& a : rephased.psi) a *= ov / std::abs(ov);
  EXPECT_LE(l2_distance(out, rephased), 1e-8);
  // E0 = omega / 2
  EXPECT_NEAR(std::arg(ov), -0.5 * t, 1e-6);
}

TEST(Grid, NormKeptOverThousandSteps) {
  const UnitSystem u = natural();
  const auto g = line(256, 0.1, -12.8);
  const HarmonicPotential osc{1.0, Vec3(0.5, 0, 0)};
  auto psi = gaussian_packet(g, Vec3(-1.0, 0, 0), 0.8, Vec3(0.5, 0, 0), 1.0);
  for (int block = 0; block < 3; ++block) {
    const double before = psi.norm_squared();
    psi = hamiltonian_evolve(std::move(psi), osc, 1.0, 1e-3, u);
    EXPECT_LE(std::abs(psi.norm_squared() - before), 1e-10);
  }
}

TEST(Grid, CentroidFollowsUniformFieldGeodesic) {
  const UnitSystem u = natural();
  const auto g = line(1024, 0.05, -30.0);
  const UniformField field{Vec3(-1.0, 0, 0)};
  const double t = 2.0;
  const auto psi0 = gaussian_packet(g, Vec3(3.0, 0, 0), 1.0, Vec3::Zero(), 1.0);
  const auto out = hamiltonian_evolve(psi0, field, t, 1e-3, u);
  GeodesicOptions go;
  go.dimension = 1;
  const auto tr = geodesic_integrate(field, Vec3(3.0, 0, 0), Vec3::Zero(), t, 1e-3, go);
  EXPECT_LE(std::abs(out.centroid().x() - tr.final_position().x()), g.spacing);
  EXPECT_NEAR(tr.final_position().x(), 1.0, 1e-12);
}

TEST(Grid, TwoDimensionalFreePacketMoves) {
  const UnitSystem u = natural();
  GridGeometry g;
  g.dimension = 2;
  g.points = {128, 128};
  g.spacing = 0.2;
  g.origin = Vec3(-12.8, -12.8, 0);
  const auto psi0 = gaussian_packet(g, Vec3(-2.0, 1.0, 0), 1.0, Vec3(0.5, -0.25, 0), 1.0);
  const auto out = hamiltonian_evolve(psi0, PotentialModel{}, 4.0, 0.01, u);
  EXPECT_LE((out.centroid() - Vec3(0.0, 0.0, 0)).norm(), 1e-6);
  EXPECT_NEAR(out.norm_squared(), 1.0, 1e-10);
}

TEST(Grid, Rejections) {
  const UnitSystem u = natural();
  const auto g = line(128, 0.1, -6.4);
  const double k_nyquist = std::numbers::pi / 0.1;
  const auto fast = gaussian_packet(g, Vec3::Zero(), 0.5, Vec3(0.8 * k_nyquist, 0, 0), 1.0);
  EXPECT_EQ(code_of([&] { hamiltonian_evolve(fast, PotentialModel{}, 0.01, 0.01, u); }), ErrorCode::GridTooCoarse);

  const auto slow = gaussian_packet(g, Vec3::Zero(), 0.5, Vec3::Zero(), 1.0);
  const auto on_grid = PotentialModel::single(1.0, Vec3(1.0, 0, 0), u);
  EXPECT_EQ(code_of([&] { hamiltonian_evolve(slow, on_grid, 0.01, 0.01, u); }), ErrorCode::MassOnGrid);
  auto softened = on_grid;
  softened.softening = 0.05;
  EXPECT_NO_THROW(hamiltonian_evolve(slow, softened, 0.01, 0.01, u));

  auto unnormalized = slow;
  for (auto& a : unnormalized.psi) a *= 1.1;
  EXPECT_EQ(code_of([&] { hamiltonian_evolve(unnormalized, PotentialModel{}, 0.01, 0.01, u); }),
            ErrorCode::InvalidState);
  auto massless = slow;
  massless.mass = 0.0;
  EXPECT_EQ(code_of([&] { hamiltonian_evolve(massless, PotentialModel{}, 0.01, 0.01, u); }),
            ErrorCode::ValidationError);
}

TEST(Grid, ZeroDurationReturnsInput) {
  const auto g = line(64, 0.1, -3.2);
  const auto psi0 = gaussian_packet(g, Vec3::Zero(), 0.5, Vec3::Zero(), 1.0);
  const auto out = hamiltonian_evolve(psi0, PotentialModel{}, 0.0, 0.01, natural());
  EXPECT_EQ(l2_distance(out, psi0), 0.0);
}

TEST(GridCovariance, DeskScaleScenario) {
  const auto sc = load_scenario(QRFSIM_SCENARIO_DIR "/grid_1d.scn");
  const auto st = build_state(sc);
  const auto psi = grid_wavefunction(sc);
  const auto rep = transform_hamiltonian_check(st, psi, sc.duration, sc.dt, sc.units, {}, sc.grid->softening);
  ASSERT_EQ(rep.branch_distance.size(), 2u);
  EXPECT_LE(rep.max_distance, 1e-8);
  EXPECT_EQ(rep.steps, 1000u);

  // the two branches see mirror-image masses, so their probe densities mirror too
  const auto out = evolve_grid_covariant(st, psi, sc.duration, sc.dt, sc.units, {}, sc.grid->softening);
  EXPECT_LT(out[0].centroid().x(), 0.0);
  EXPECT_GT(out[1].centroid().x(), 0.0);
  EXPECT_NEAR(out[0].centroid().x(), -out[1].centroid().x(), 1e-3 * std::abs(out[1].centroid().x()) + 1e-20);
}

TEST(GridCovariance, SingleBranch) {
  const auto sc = load_scenario(QRFSIM_SCENARIO_DIR "/grid_1d.scn");
  auto st = build_state(sc);
  st.branches.pop_back();
  st.branches[0].amplitude = 1.0;
  const auto psi = grid_wavefunction(sc);
  const auto rep = transform_hamiltonian_check(st, psi, sc.duration, sc.dt, sc.units, {}, sc.grid->softening);
  EXPECT_LE(rep.max_distance, 1e-8);
}

TEST(GridCovariance, RotatedRigidFrameInTwoDimensions) {
  std::mt19937_64 rng(2024);
  const UnitSystem u;
  for (int trial = 0; trial < 3; ++trial) {
    const auto st = rotated_branches_2d(rng);
    GridGeometry g;
    g.dimension = 2;
    g.points = {64, 64};
    g.spacing = 1e-8;
    g.origin = Vec3(-3.2e-7, -3.2e-7, 0);
    const auto psi = gaussian_packet(g, Vec3::Zero(), 5e-8, Vec3::Zero(), 1e-25);
    const auto rep = transform_hamiltonian_check(st, psi, 1e-6, 1e-8, u);
    EXPECT_LE(rep.max_distance, 1e-8);
  }
}

TEST(Parallel, ThreadCountDoesNotChangeResults) {
  const auto sc = load_scenario(QRFSIM_SCENARIO_DIR "/grid_1d.scn");
  const auto st = build_state(sc);
  const auto psi = grid_wavefunction(sc);
  ::setenv("QRF_SIM_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  const auto serial = evolve_grid_covariant(st, psi, 1e-7, 1e-8, sc.units);
  ::setenv("QRF_SIM_THREADS", "4", 1);
  const auto threaded = evolve_grid_covariant(st, psi, 1e-7, 1e-8, sc.units);
  ::unsetenv("QRF_SIM_THREADS");
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(l2_distance(serial[i], threaded[i]), 0.0);
}

TEST(Parallel, LowestFailingIndexIsReported) {
  ::setenv("QRF_SIM_THREADS", "3", 1);
  try {
    parallel_for(8, [](std::size_t i) {
      if (i == 2 || i == 6) throw Error(ErrorCode::IndexOutOfRange, std::to_string(i));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.detail(), "2");
  }
  ::unsetenv("QRF_SIM_THREADS");
}
