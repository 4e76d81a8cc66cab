#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "aeforms/assembly.hpp"
#include "aeforms/chebyshev.hpp"
#include "aeforms/fields.hpp"
#include "aeforms/spectral.hpp"

namespace aeforms {

/// Modulated Gaussian 1-form test vector.
struct WavePacketSpec {
  Eigen::VectorXd center;        // x0
  Eigen::VectorXd momentum;      // xi0
  double width = 1.0;            // sigma
  Eigen::VectorXd polarization;  // component mix, normalized on use
};

/// psi_c(x) = pol_c exp(i xi.(x - x0)) exp(-|x - x0|^2 / (2 sigma^2)),
/// normalized to unit Euclidean norm. Requires a six-sigma margin to the box.
inline ComplexFormGrid make_wave_packet(const WavePacketSpec& wp, const Grid& grid) {
  const int n = grid.dim();
  if (wp.center.size() != n || wp.momentum.size() != n || wp.polarization.size() != n)
    throw std::invalid_argument("make_wave_packet: dimension mismatch");
  if (!(wp.width > 0.0)) throw std::invalid_argument("make_wave_packet: width must be > 0");
  for (int d = 0; d < n; ++d)
    if (std::abs(wp.center(d)) + 6.0 * wp.width > grid.half_width())
      throw std::invalid_argument(
          "make_wave_packet: packet violates the six-sigma support margin in axis " +
          std::to_string(d));
  Eigen::VectorXd pol = wp.polarization / wp.polarization.norm();

  ComplexFormGrid psi(grid);
  const std::complex<double> I(0.0, 1.0);
  for (std::int64_t p = 0; p < grid.total_points(); ++p) {
    if (!grid.is_interior(p)) continue;
    Eigen::VectorXd dx = grid.coords(p) - wp.center;
    const std::complex<double> env =
        std::exp(-dx.squaredNorm() / (2.0 * wp.width * wp.width) +
                 I * wp.momentum.dot(dx));
    for (int c = 0; c < n; ++c) psi.at(p, c) = pol(c) * env;
  }
  const double nrm = euclidean_norm(psi);
  if (!(nrm > 0.0)) throw std::invalid_argument("make_wave_packet: empty packet");
  psi.data() /= nrm;
  return psi;
}

enum class EvolutionSpace { Flat, Curved };

/// M-weighted norm of a field (the curved L^2 norm); for the flat space this
/// is the h^n Euclidean norm.
inline double field_norm(const AssembledOperators& ops, EvolutionSpace space,
                         const ComplexFormGrid& f) {
  if (space == EvolutionSpace::Flat) return euclidean_norm(f);
  Eigen::VectorXcd v = f.interior();
  Eigen::VectorXcd Mv(v.size());
  detail::sparse_apply(ops.M, v, Mv);
  return std::sqrt(std::abs(v.dot(Mv).real()));
}

/// e^{-i H t} psi with H = H0 (flat) or the pencil M^{-1}S (curved, applied
/// through the exact blockwise symmetric reduction). The truncation of the
/// polynomial expansion is chosen so the a-priori bound is <= tol;
/// max_degree > 0 caps the step budget.
inline ComplexFormGrid propagate(const AssembledOperators& ops, EvolutionSpace space,
                                 const ComplexFormGrid& psi, double t, double tol,
                                 PropagationInfo* info = nullptr,
                                 int max_degree = 0) {
  const Grid& grid = psi.grid();
  Eigen::VectorXcd v = psi.interior();
  const SpMat& A = space == EvolutionSpace::Flat ? ops.H0 : ops.sym_pencil;
  if (space == EvolutionSpace::Curved) {
    Eigen::VectorXcd w(v.size());
    w.real() = detail::symmetrize(ops, v.real().eval());
    w.imag() = detail::symmetrize(ops, v.imag().eval());
    v.swap(w);
  }
  auto [lo, hi] = gershgorin_interval(A);
  auto sc = SpectralScale::from_interval(lo, hi, 0.005);
  Eigen::VectorXcd y = propagate_chebyshev(A, sc, t, v, tol, info, max_degree);
  if (space == EvolutionSpace::Curved) {
    Eigen::VectorXcd w(y.size());
    w.real() = detail::unsymmetrize(ops, y.real().eval());
    w.imag() = detail::unsymmetrize(ops, y.imag().eval());
    y.swap(w);
  }
  ComplexFormGrid out(grid);
  out.set_interior(y);
  return out;
}

/// Squared-mass fraction carried by the outermost boundary strip
/// (width = max(4, N/256) cells).
inline double boundary_mass_fraction(const ComplexFormGrid& f) {
  const Grid& grid = f.grid();
  const int n = grid.dim();
  const int strip = std::max<int>(4, grid.points_per_axis() / 256);
  double inside = 0.0, edge = 0.0;
  for (std::int64_t p = 0; p < grid.total_points(); ++p) {
    auto mi = grid.multi_index(p);
    bool near = false;
    for (int d = 0; d < n; ++d)
      near = near || mi[d] < strip || mi[d] >= grid.points_per_axis() - strip;
    double m = 0.0;
    for (int c = 0; c < n; ++c) m += std::norm(f.at(p, c));
    (near ? edge : inside) += m;
  }
  const double total = inside + edge;
  return total > 0.0 ? edge / total : 0.0;
}

/// Finite-time wave-operator approximant W(T) psi = e^{+i H1 T} J e^{-i H0 T} psi.
/// Negative T gives the incoming-side approximant.
struct WaveOperatorResult {
  ComplexFormGrid field;
  double boundary_mass = 0.0;
  bool box_limited = false;  // boundary mass above the declared cap
};

inline WaveOperatorResult wave_operator_approx(const AssembledOperators& ops,
                                               const ComplexFormGrid& psi, double T,
                                               double tol = 1e-8,
                                               double boundary_cap = 1e-6) {
  ComplexFormGrid free_evolved = propagate(ops, EvolutionSpace::Flat, psi, T, tol);
  WaveOperatorResult out{free_evolved, 0.0, false};
  out.boundary_mass = boundary_mass_fraction(free_evolved);
  // J is the coefficient identity; evolve backwards under H1
  out.field = propagate(ops, EvolutionSpace::Curved, apply_J(free_evolved), -T, tol);
  out.boundary_mass = std::max(out.boundary_mass, boundary_mass_fraction(out.field));
  out.box_limited = !(out.boundary_mass <= boundary_cap);
  return out;
}

/// Cauchy-sequence and partial-isometry diagnostics for W(T) over a time grid.
struct ScatteringDiagnostics {
  std::vector<double> times;
  std::vector<double> cauchy_norms;     // ||W(T_{j+1}) psi - W(T_j) psi||_g
  std::vector<double> isometry_defects; // | ||W(T_j) psi||_g - 1 |
  std::vector<double> boundary_mass;
  double propagation_tol = 1e-8;
  double boundary_cap = 1e-6;
  bool box_limited = false;
  bool hypothesis_ok = true;   // metric decay hypotheses verified upstream
  bool pass = false;
};

inline ScatteringDiagnostics scattering_diagnostics(const AssembledOperators& ops,
                                                    const ComplexFormGrid& psi,
                                                    const std::vector<double>& times,
                                                    double tol = 1e-8,
                                                    double boundary_cap = 1e-6,
                                                    bool hypothesis_ok = true) {
  if (times.size() < 3)
    throw std::invalid_argument("scattering_diagnostics: need at least 3 times");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("scattering_diagnostics: times must increase");

  ScatteringDiagnostics diag;
  diag.times = times;
  diag.propagation_tol = tol;
  diag.boundary_cap = boundary_cap;
  diag.hypothesis_ok = hypothesis_ok;

  std::vector<ComplexFormGrid> snapshots;
  for (double T : times) {
    auto wr = wave_operator_approx(ops, psi, T, tol, boundary_cap);
    diag.boundary_mass.push_back(wr.boundary_mass);
    diag.box_limited = diag.box_limited || wr.box_limited;
    diag.isometry_defects.push_back(
        std::abs(field_norm(ops, EvolutionSpace::Curved, wr.field) - 1.0));
    snapshots.push_back(std::move(wr.field));
  }
  for (std::size_t j = 0; j + 1 < snapshots.size(); ++j) {
    ComplexFormGrid d = snapshots[j + 1];
    d.data() -= snapshots[j].data();
    diag.cauchy_norms.push_back(field_norm(ops, EvolutionSpace::Curved, d));
  }
  const double first = diag.cauchy_norms.front();
  const double last = diag.cauchy_norms.back();
  const bool cauchy_ok = last <= 0.5 * first || last <= 10.0 * tol;
  const bool isometry_ok = diag.isometry_defects.back() <= 0.05;
  diag.pass = hypothesis_ok && !diag.box_limited && cauchy_ok && isometry_ok;
  return diag;
}

}  // namespace aeforms
