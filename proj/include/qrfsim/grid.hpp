#pragma once

// Probe wavefunctions on uniform 1D/2D grids, evolved by the second-order
// split-operator method with FFTW.

#include "qrfsim/error.hpp"
#include "qrfsim/linalg.hpp"
#include "qrfsim/parallel.hpp"
#include "qrfsim/potential.hpp"
#include "qrfsim/state.hpp"
#include "qrfsim/transforms.hpp"
#include "qrfsim/units.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <vector>

namespace qrfsim {

/// Lattice origin + h * (i axis_0 + j axis_1). The axes are orthonormal
/// columns of `axes`; a frame change only relabels origin and axes.
struct GridGeometry {
  int dimension = 1;
  std::array<std::size_t, 2> points{1, 1};
  double spacing = 1.0;  // m
  Vec3 origin = Vec3::Zero();
  Mat3 axes = Mat3::Identity();

  std::size_t size() const { return dimension == 1 ? points[0] : points[0] * points[1]; }
  double cell_volume() const { return std::pow(spacing, dimension); }

  Vec3 point(std::size_t i, std::size_t j = 0) const {
    Vec3 x = origin + spacing * static_cast<double>(i) * axes.col(0);
    if (dimension == 2) x += spacing * static_cast<double>(j) * axes.col(1);
    return x;
  }
  Vec3 point_at(std::size_t flat) const {
    return dimension == 1 ? point(flat) : point(flat / points[1], flat % points[1]);
  }
};

struct GridWavefunction {
  GridGeometry geometry;
  std::vector<Complex> psi;
  double mass = 0.0;  // kg

  double norm_squared() const {
    double s = 0.0;
    for (const auto& a : psi) s += std::norm(a);
    return s * geometry.cell_volume();
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (std::size_t k = 0; k < psi.size(); ++k) c += std::norm(psi[k]) * geometry.point_at(k);
    return c * geometry.cell_volume() / norm_squared();
  }
};

/// Normalized Gaussian packet with |psi|^2 standard deviation sigma per axis
/// and mean wave vector k0 (rad/m, physical coordinates).
inline GridWavefunction gaussian_packet(const GridGeometry& g, const Vec3& center, double sigma, const Vec3& k0,
                                        double mass) {
  if (g.dimension != 1 && g.dimension != 2) fail(ErrorCode::ValidationError, "grid dimension must be 1 or 2");
  GridWavefunction w{g, std::vector<Complex>(g.size()), mass};
  for (std::size_t k = 0; k < w.psi.size(); ++k) {
    const Vec3 d = g.point_at(k) - center;
    w.psi[k] = std::polar(std::exp(-d.squaredNorm() / (4.0 * sigma * sigma)), k0.dot(d));
  }
  const double s = 1.0 / std::sqrt(w.norm_squared());
  for (auto& a : w.psi) a *= s;
  return w;
}

inline double l2_distance(const GridWavefunction& a, const GridWavefunction& b) {
  if (a.psi.size() != b.psi.size()) fail(ErrorCode::ValidationError, "grids differ in size");
  double s = 0.0;
  for (std::size_t k = 0; k < a.psi.size(); ++k) s += std::norm(a.psi[k] - b.psi[k]);
  return std::sqrt(s * a.geometry.cell_volume());
}

struct GridOptions {
  /// Largest admissible spectral weight above k = pi / (4 h), i.e. beyond
  /// eight points per de Broglie wavelength.
  double tail_tolerance = 1e-10;
  double norm_tolerance = 1e-10;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class FftPlans {
 public:
  FftPlans(const GridGeometry& g, std::vector<Complex>& buf) {
    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    const std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if (g.dimension == 1) {
      const int n = static_cast<int>(g.points[0]);
      forward_ = fftw_plan_dft_1d(n, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_1d(n, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
      const int n0 = static_cast<int>(g.points[0]), n1 = static_cast<int>(g.points[1]);
      forward_ = fftw_plan_dft_2d(n0, n1, data, data, FFTW_FORWARD, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_2d(n0, n1, data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;
  ~FftPlans() {
    const std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  void forward() const { fftw_execute(forward_); }
  void backward() const { fftw_execute(backward_); }

 private:
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

inline double wave_number(std::size_t j, std::size_t n, double h) {
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * h);
  const auto jj = static_cast<long long>(j);
  const auto nn = static_cast<long long>(n);
  return base * static_cast<double>(j < n / 2 ? jj : jj - nn);
}

inline std::vector<double> k_squared(const GridGeometry& g) {
  std::vector<double> k2(g.size());
  for (std::size_t i = 0; i < g.points[0]; ++i) {
    const double ki = wave_number(i, g.points[0], g.spacing);
    if (g.dimension == 1) {
      k2[i] = ki * ki;
      continue;
    }
    for (std::size_t j = 0; j < g.points[1]; ++j) {
      const double kj = wave_number(j, g.points[1], g.spacing);
      k2[i * g.points[1] + j] = ki * ki + kj * kj;
    }
  }
  return k2;
}

inline double spectral_tail(const std::vector<Complex>& spectrum, const std::vector<double>& k2, double k_limit) {
  double tail = 0.0, total = 0.0;
  const double lim2 = k_limit * k_limit;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double w = std::norm(spectrum[k]);
    total += w;
    if (k2[k] > lim2) tail += w;
  }
  return total > 0.0 ? tail / total : 0.0;
}

template <Potential P>
void check_masses_off_grid(const P& pot, const GridGeometry& g) {
  if constexpr (requires { pot.masses; pot.softening; }) {
    if (pot.softening > 0.0) return;
    for (const auto& m : pot.masses) {
      const Vec3 rel = m.position - g.origin;
      Vec3 in_plane = Vec3::Zero();
      bool inside = true;
      for (int a = 0; a < g.dimension; ++a) {
        const double u = rel.dot(g.axes.col(a)) / g.spacing;
        inside = inside && u >= -0.5 && u <= static_cast<double>(g.points[a]) - 0.5;
        in_plane += rel.dot(g.axes.col(a)) * g.axes.col(a);
      }
      if (inside && (rel - in_plane).norm() < 0.5 * g.spacing) {
        fail(ErrorCode::MassOnGrid, "a point mass lies on the grid and no softening is set");
      }
    }
  }
}

}  // namespace detail

/// Strang splitting exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2) of
/// H = p^2/(2m) + m V, with N = ceil(t/dt) equal steps.
template <Potential P>
GridWavefunction hamiltonian_evolve(GridWavefunction w, const P& pot, double t, double dt,
                                    const UnitSystem& units = {}, const GridOptions& opts = {}) {
  const GridGeometry& g = w.geometry;
  if (g.dimension != 1 && g.dimension != 2) fail(ErrorCode::ValidationError, "grid evolution supports D = 1 or 2");
  if (w.psi.size() != g.size()) fail(ErrorCode::InvalidState, "amplitude count does not match the grid");
  if (!(w.mass > 0.0)) fail(ErrorCode::ValidationError, "probe mass required");
  if (!(dt > 0.0)) fail(ErrorCode::ValidationError, "time step must be positive");
  if (std::abs(w.norm_squared() - 1.0) > opts.norm_tolerance) fail(ErrorCode::InvalidState, "wavefunction not normalized");
  detail::check_masses_off_grid(pot, g);

  std::size_t steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
  if (t > 0.0 && steps == 0) steps = 1;
  if (steps == 0) return w;
  const double h = t / static_cast<double>(steps);

  const std::vector<double> k2 = detail::k_squared(g);
  const double k_limit = std::numbers::pi / (4.0 * g.spacing);
  std::vector<Complex> half_v(g.size()), full_v(g.size()), kinetic(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double phase = w.mass * pot.value(g.point_at(k)) * h / units.hbar;
    half_v[k] = std::polar(1.0, -0.5 * phase);
    full_v[k] = std::polar(1.0, -phase);
    kinetic[k] = std::polar(1.0 / static_cast<double>(g.size()), -units.hbar * k2[k] * h / (2.0 * w.mass));
  }

  std::vector<Complex>& buf = w.psi;
  const detail::FftPlans plans(g, buf);
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= half_v[k];
  for (std::size_t s = 0; s < steps; ++s) {
    plans.forward();
    if (detail::spectral_tail(buf, k2, k_limit) > opts.tail_tolerance) {
      fail(ErrorCode::GridTooCoarse, "momentum content exceeds the de Broglie resolution of the grid");
    }
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= kinetic[k];
    plans.backward();
    const auto& v = s + 1 == steps ? half_v : full_v;
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= v[k];
  }
  return w;
}

/// Per branch: map the probe grid into the mass frame, evolve there with the
/// definite masses, relabel back. Results live on the input geometry.
inline std::vector<GridWavefunction> evolve_grid_covariant(const BranchState& state, const GridWavefunction& psi,
                                                           double t, double dt, const UnitSystem& units = {},
                                                           const GridOptions& opts = {}, double softening = 0.0) {
  if (!state.frame) fail(ErrorCode::ValidationError, "state has no frame system");
  const SystemId previous = *state.frame;
  const BranchState in_m = to_mass_frame(state);
  std::vector<GridWavefunction> out(state.branches.size());
  parallel_for(out.size(), [&](std::size_t i) {
    const FrameRecord rec = branch_frame_record(in_m, i, previous);
    GridWavefunction moved = psi;
    moved.geometry.origin = rec.forward(psi.geometry.origin);
    moved.geometry.axes = rec.rotation * psi.geometry.axes;
    moved = hamiltonian_evolve(std::move(moved), branch_potential(in_m, i, units, softening), t, dt, units, opts);
    moved.geometry = psi.geometry;
    out[i] = std::move(moved);
  });
  return out;
}

/// Per branch: evolve directly under p^2/2m + m V with that branch's masses.
inline std::vector<GridWavefunction> evolve_grid_direct(const BranchState& state, const GridWavefunction& psi,
                                                        double t, double dt, const UnitSystem& units = {},
                                                        const GridOptions& opts = {}, double softening = 0.0) {
  std::vector<GridWavefunction> out(state.branches.size());
  parallel_for(out.size(), [&](std::size_t i) {
    out[i] = hamiltonian_evolve(psi, branch_potential(state, i, units, softening), t, dt, units, opts);
  });
  return out;
}

struct CovarianceReport {
  std::vector<double> branch_distance;  // L2 distance per branch
  double max_distance = 0.0;
  std::size_t steps = 0;
};

/// Compares the mass-frame route with direct evolution, branch by branch.
inline CovarianceReport transform_hamiltonian_check(const BranchState& state, const GridWavefunction& psi, double t,
                                                    double dt, const UnitSystem& units = {},
                                                    const GridOptions& opts = {}, double softening = 0.0) {
  const auto via_m = evolve_grid_covariant(state, psi, t, dt, units, opts, softening);
  const auto direct = evolve_grid_direct(state, psi, t, dt, units, opts, softening);
  CovarianceReport rep;
  for (std::size_t i = 0; i < direct.size(); ++i) {
    rep.branch_distance.push_back(l2_distance(direct[i], via_m[i]));
    rep.max_distance = std::max(rep.max_distance, rep.branch_distance.back());
  }
  rep.steps = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
  return rep;
}

}  // namespace qrfsim
