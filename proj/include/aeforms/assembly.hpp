#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aeforms/fields.hpp"
#include "aeforms/geometry.hpp"
#include "aeforms/grid.hpp"
#include "aeforms/metrics.hpp"

namespace aeforms {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// All grid operators for one (metric, grid) pair, acting on interior dofs in
/// point-major layout. Units: H0, W, V carry 1/h^2; S, M carry h^n, so the
/// generalized eigenvalues of (S, M) are directly comparable to eigenvalues
/// of H0.
struct AssembledOperators {
  MetricSpec metric;
  GridSpec grid_spec;

  SpMat H0;  // flat componentwise Laplacian
  SpMat M;   // block-diagonal mass, block sqrt(g) g_upper h^n
  SpMat S;   // weak-form stiffness, omega' S omega ~= h1[omega]
  SpMat W;   // strong-form Weitzenboeck operator
  SpMat V;   // perturbation W - H0, assembled termwise

  // Per-interior-point n x n mass data.
  std::vector<Eigen::MatrixXd> mass_blocks;
  std::vector<Eigen::MatrixXd> mass_sqrt;
  std::vector<Eigen::MatrixXd> mass_inv_sqrt;

  // M^{-1/2} S M^{-1/2}; spectrally equivalent to the pencil (S, M).
  SpMat sym_pencil;

  double weitzenbock_residual = 0.0;  // ||W - H0 - V||_max / ||W||_max

  std::int64_t dofs() const { return H0.rows(); }
};

namespace detail {

inline double pow_int(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

/// Central-difference stencil triplets on interior dofs. kind selects the
/// operator scaled by coeff:
///   d1: (v(p+e_a) - v(p-e_a)) / 2h
///   d2_axis: (v(p+e_a) - 2 v(p) + v(p-e_a)) / h^2
///   d2_cross: 4-corner mixed second difference in axes (a, b)
struct StencilWriter {
  const Grid& grid;
  std::vector<Triplet>& out;

  void add(std::int64_t row, std::int64_t p_full, int comp, double val) const {
    const std::int64_t q = grid.interior_index(p_full);
    if (q >= 0) out.emplace_back(int(row), int(q * grid.dim() + comp), val);
  }

  void d1(std::int64_t row, std::int64_t p, int axis, int comp, double coeff) const {
    const double c = coeff / (2.0 * grid.spacing());
    add(row, grid.neighbor(p, axis, +1), comp, c);
    add(row, grid.neighbor(p, axis, -1), comp, -c);
  }

  void d2_axis(std::int64_t row, std::int64_t p, int axis, int comp, double coeff) const {
    const double c = coeff / (grid.spacing() * grid.spacing());
    add(row, grid.neighbor(p, axis, +1), comp, c);
    add(row, p, comp, -2.0 * c);
    add(row, grid.neighbor(p, axis, -1), comp, c);
  }

  void d2_cross(std::int64_t row, std::int64_t p, int a, int b, int comp,
                double coeff) const {
    const double c = coeff / (4.0 * grid.spacing() * grid.spacing());
    auto corner = [&](int sa, int sb) {
      std::int64_t t = grid.neighbor(p, a, sa);
      if (t < 0) return t;
      return grid.neighbor(t, b, sb);
    };
    add(row, corner(+1, +1), comp, c);
    add(row, corner(-1, -1), comp, c);
    add(row, corner(+1, -1), comp, -c);
    add(row, corner(-1, +1), comp, -c);
  }
};

}  // namespace detail

/// n decoupled copies of the (2n+1)-point Dirichlet Laplacian, scaled 1/h^2.
inline SpMat assemble_h0(const Grid& grid) {
  const int n = grid.dim();
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(grid.interior_dofs()) * (2 * n + 1));
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const std::int64_t p = grid.full_index_of_interior(q);
    for (int c = 0; c < n; ++c) {
      const std::int64_t row = q * n + c;
      // accumulate the diagonal edge by edge so the flat weak form matches
      for (int a = 0; a < n; ++a) {
        trips.emplace_back(int(row), int(row), inv_h2);
        trips.emplace_back(int(row), int(row), inv_h2);
        const std::int64_t qp = grid.interior_index(grid.neighbor(p, a, +1));
        const std::int64_t qm = grid.interior_index(grid.neighbor(p, a, -1));
        if (qp >= 0) trips.emplace_back(int(row), int(qp * n + c), -inv_h2);
        if (qm >= 0) trips.emplace_back(int(row), int(qm * n + c), -inv_h2);
      }
    }
  }
  SpMat H0(grid.interior_dofs(), grid.interior_dofs());
  H0.setFromTriplets(trips.begin(), trips.end());
  H0.makeCompressed();
  return H0;
}

/// Block-diagonal mass matrix; block at x is sqrt(g)(x) g_upper(x) h^n.
/// Throws when a block fails to be SPD, naming the point.
inline SpMat assemble_mass(const MetricSpec& spec, const Grid& grid,
                           std::vector<Eigen::MatrixXd>* blocks_out = nullptr) {
  const int n = grid.dim();
  const double hn = detail::pow_int(grid.spacing(), n);
  std::vector<Triplet> trips;
  trips.reserve(std::size_t(grid.interior_points()) * n * n);
  if (blocks_out) blocks_out->assign(grid.interior_points(), Eigen::MatrixXd());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const std::int64_t p = grid.full_index_of_interior(q);
    auto mp = eval_metric(spec, grid.coords(p));
    Eigen::MatrixXd B = mp.sqrt_det * mp.g_upper * hn;
    es.compute(B, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::runtime_error("assemble_mass: non-SPD block at interior point " +
                               std::to_string(q));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (B(i, j) != 0.0) trips.emplace_back(int(q * n + i), int(q * n + j), B(i, j));
    if (blocks_out) (*blocks_out)[q] = std::move(B);
  }
  SpMat M(grid.interior_dofs(), grid.interior_dofs());
  M.setFromTriplets(trips.begin(), trips.end());
  M.makeCompressed();
  return M;
}

/// Weak-form stiffness S with omega' S omega ~= h1[omega].
///
/// Gradient part: per grid cell (lower corner q), the covariant derivative is
/// sampled as nabla_i omega_a ~ (omega_a(q+e_i) - omega_a(q))/h
///                              - Gamma^b_ia(q) omega_b(q)
/// and weighted by sqrt(g) g^{ij} g^{ab} h^n at the corner; this forward-
/// difference quadrature makes S exactly symmetric and collapses to h^n H0
/// for the flat metric. Curvature part: symmetrized sqrt(g) R^{ib} h^n per
/// interior point.
inline SpMat assemble_h1_form(const MetricSpec& spec, const Grid& grid) {
  const int n = grid.dim();
  const double h = grid.spacing();
  const double hn = detail::pow_int(h, n);
  const std::int64_t dofs = grid.interior_dofs();

  // D: rows (cell, i, a) -> covariant derivative samples.
  std::vector<Triplet> dtrips;
  std::vector<Triplet> wtrips;
  std::int64_t cell_count = 0;
  const bool flat = spec.is_flat();
  for (std::int64_t p = 0; p < grid.total_points(); ++p) {
    auto mi = grid.multi_index(p);
    bool is_cell = true;
    for (int d = 0; d < n; ++d)
      is_cell = is_cell && mi[d] < grid.points_per_axis() - 1;
    if (!is_cell) continue;
    const std::int64_t cell = cell_count++;
    const Eigen::VectorXd x = grid.coords(p);

    const std::int64_t base_row = cell * n * n;
    const std::int64_t q_here = grid.interior_index(p);
    std::vector<Eigen::MatrixXd> gamma;
    if (!flat && q_here >= 0) gamma = christoffel(spec, x);
    for (int i = 0; i < n; ++i) {
      const std::int64_t pp = grid.neighbor(p, i, +1);
      for (int a = 0; a < n; ++a) {
        const std::int64_t row = base_row + i * n + a;
        const std::int64_t qp = grid.interior_index(pp);
        if (qp >= 0) dtrips.emplace_back(int(row), int(qp * n + a), 1.0 / h);
        if (q_here >= 0) {
          dtrips.emplace_back(int(row), int(q_here * n + a), -1.0 / h);
          if (!flat)
            for (int b = 0; b < n; ++b) {
              const double g = gamma[b](i, a);
              if (g != 0.0)
                dtrips.emplace_back(int(row), int(q_here * n + b), -g);
            }
        }
      }
    }

    // weight block sqrt(g) h^n (g_upper kron g_upper) at the corner
    if (flat) {
      for (int r = 0; r < n * n; ++r)
        wtrips.emplace_back(int(base_row + r), int(base_row + r), hn);
    } else {
      auto mp = eval_metric(spec, x);
      const double w0 = mp.sqrt_det * hn;
      for (int i = 0; i < n; ++i)
        for (int a = 0; a < n; ++a)
          for (int j = 0; j < n; ++j)
            for (int b = 0; b < n; ++b) {
              const double v = w0 * mp.g_upper(i, j) * mp.g_upper(a, b);
              if (v != 0.0)
                wtrips.emplace_back(int(base_row + i * n + a),
                                    int(base_row + j * n + b), v);
            }
    }
  }

  const std::int64_t nrows = cell_count * n * n;
  SpMat D(nrows, dofs), Wq(nrows, nrows);
  D.setFromTriplets(dtrips.begin(), dtrips.end());
  Wq.setFromTriplets(wtrips.begin(), wtrips.end());
  SpMat S = SpMat(D.transpose()) * Wq * D;

  if (!flat) {
    // curvature quadrature: omega_i sqrt(g) R^{ib} omega_b h^n, symmetrized
    std::vector<Triplet> rtrips;
    for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
      const std::int64_t p = grid.full_index_of_interior(q);
      const Eigen::VectorXd x = grid.coords(p);
      auto geo = curvature(spec, x);
      auto mp = eval_metric(spec, x);
      Eigen::MatrixXd R =
          0.5 * mp.sqrt_det * hn * (geo.ricci_upper + geo.ricci_upper.transpose());
      for (int i = 0; i < n; ++i)
        for (int b = 0; b < n; ++b)
          if (R(i, b) != 0.0)
            rtrips.emplace_back(int(q * n + i), int(q * n + b), R(i, b));
    }
    SpMat Rm(dofs, dofs);
    Rm.setFromTriplets(rtrips.begin(), rtrips.end());
    S += Rm;
  }
  // enforce bit-level symmetry of the stored layout
  SpMat St = SpMat(S.transpose());
  S = 0.5 * (S + St);
  S.makeCompressed();
  return S;
}

namespace detail {

/// Shared stencil assembly for the strong-form operators: given per-point
/// coefficient arrays, emits
///   sum_ij c2(i,j) d2_ij omega_k + sum_ma c1[m](a,k) d_m omega_a
///   + sum_a c0(a,k) omega_a
/// with 3-point axis and 4-corner cross second differences.
struct StrongFormCoeffs {
  Eigen::MatrixXd c2;                    // (i,j), acts on every component k
  std::vector<Eigen::MatrixXd> c1;       // [m](a,k)
  Eigen::MatrixXd c0;                    // (a,k)
};

inline void emit_strong_form_rows(const Grid& grid, std::int64_t q,
                                  const StrongFormCoeffs& c,
                                  std::vector<Triplet>& trips) {
  const int n = grid.dim();
  const std::int64_t p = grid.full_index_of_interior(q);
  StencilWriter w{grid, trips};
  for (int k = 0; k < n; ++k) {
    const std::int64_t row = q * n + k;
    for (int i = 0; i < n; ++i) {
      if (c.c2(i, i) != 0.0) w.d2_axis(row, p, i, k, c.c2(i, i));
      for (int j = 0; j < n; ++j)
        if (j != i && c.c2(i, j) != 0.0) w.d2_cross(row, p, i, j, k, c.c2(i, j));
    }
    for (int m = 0; m < n; ++m)
      for (int a = 0; a < n; ++a)
        if (c.c1[m](a, k) != 0.0) w.d1(row, p, m, a, c.c1[m](a, k));
    for (int a = 0; a < n; ++a)
      if (c.c0(a, k) != 0.0) w.add(row, p, a, c.c0(a, k));
  }
}

}  // namespace detail

/// Strong-form Weitzenboeck operator: (W omega)_k = -(g^{ij} nabla_i nabla_j
/// omega)_k + R^i_k omega_i, expanded through the covariant-derivative
/// recursion (rank-2 rule applied to nabla omega).
inline SpMat assemble_weitzenbock(const MetricSpec& spec, const Grid& grid) {
  const int n = grid.dim();
  std::vector<Triplet> trips;
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const std::int64_t p = grid.full_index_of_interior(q);
    const Eigen::VectorXd x = grid.coords(p);
    auto mp = eval_metric(spec, x);
    auto geo = curvature(spec, x);
    auto dgamma = christoffel_derivatives(spec, x);
    const auto& G = geo.christoffel;

    detail::StrongFormCoeffs c;
    c.c2 = -mp.g_upper;
    c.c1.assign(n, Eigen::MatrixXd::Zero(n, n));
    c.c0 = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double gij = mp.g_upper(i, j);
          if (gij == 0.0) continue;
          // -g^{ij} nabla_i (nabla_j omega)_k with
          // (nabla_j omega)_k = d_j omega_k - Gamma^a_jk omega_a
          for (int a = 0; a < n; ++a) {
            c.c0(a, k) += gij * dgamma[i][a](j, k);    // -(-d_i Gamma^a_jk)
            c.c1[i](a, k) += gij * G[a](j, k);         // -(-Gamma^a_jk d_i)
          }
          for (int b = 0; b < n; ++b) {
            // -(-Gamma^b_ij (nabla_b omega)_k)
            c.c1[b](k, k) += gij * G[b](i, j);
            for (int a = 0; a < n; ++a)
              c.c0(a, k) -= gij * G[b](i, j) * G[a](b, k);
            // -(-Gamma^b_ik (nabla_j omega)_b)
            c.c1[j](b, k) += gij * G[b](i, k);
            for (int a = 0; a < n; ++a)
              c.c0(a, k) -= gij * G[b](i, k) * G[a](j, b);
          }
        }
    // + R^i_k omega_i
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) c.c0(i, k) += geo.ricci_mixed(i, k);

    detail::emit_strong_form_rows(grid, q, c, trips);
  }
  SpMat W(grid.interior_dofs(), grid.interior_dofs());
  W.setFromTriplets(trips.begin(), trips.end());
  W.makeCompressed();
  return W;
}

/// Perturbation V = H1 - H0, transcribed term by term from the eight
/// coefficient groups.
inline SpMat assemble_perturbation(const MetricSpec& spec, const Grid& grid) {
  const int n = grid.dim();
  std::vector<Triplet> trips;
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const std::int64_t p = grid.full_index_of_interior(q);
    auto pc = perturbation_coefficients(spec, grid.coords(p));

    detail::StrongFormCoeffs c;
    c.c2 = pc.second_order;
    c.c1.assign(n, Eigen::MatrixXd::Zero(n, n));
    c.c0 = Eigen::MatrixXd::Zero(n, n);
    for (int m = 0; m < n; ++m) c.c1[m] += pc.first_1[m] + pc.first_3[m];
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < n; ++k) c.c1[a](k, k) += pc.first_2(a);
    c.c0 = pc.zero_1 + pc.zero_2 + pc.zero_3 + pc.ricci;

    detail::emit_strong_form_rows(grid, q, c, trips);
  }
  SpMat V(grid.interior_dofs(), grid.interior_dofs());
  V.setFromTriplets(trips.begin(), trips.end());
  V.makeCompressed();
  return V;
}

// ---------------------------------------------------------------------------
// Identification maps
// ---------------------------------------------------------------------------

/// J: identity on coefficients (flat -> curved).
template <typename Scalar>
FormField<Scalar> apply_J(const FormField<Scalar>& f) {
  return f;
}

/// J*: (J* phi)_k = sqrt(g) g^{jk} phi_j, pointwise.
template <typename Scalar>
FormField<Scalar> apply_J_star(const MetricSpec& spec, const FormField<Scalar>& f) {
  const Grid& grid = f.grid();
  const int n = grid.dim();
  FormField<Scalar> out(grid);
  for (std::int64_t p = 0; p < grid.total_points(); ++p) {
    if (!grid.is_interior(p)) continue;
    auto mp = eval_metric(spec, grid.coords(p));
    for (int k = 0; k < n; ++k) {
      Scalar s(0);
      for (int j = 0; j < n; ++j)
        s += mp.sqrt_det * mp.g_upper(j, k) * f.at(p, j);
      out.at(p, k) = s;
    }
  }
  return out;
}

/// The block of J*J - I at x: sqrt(g) g_upper - I (vanishes identically for
/// the flat metric).
inline Eigen::MatrixXd jstar_j_minus_identity_block(const MetricSpec& spec,
                                                    const Eigen::VectorXd& x) {
  auto mp = eval_metric(spec, x);
  return mp.sqrt_det * mp.g_upper -
         Eigen::MatrixXd::Identity(spec.dim, spec.dim);
}

// ---------------------------------------------------------------------------
// Bundle
// ---------------------------------------------------------------------------

/// M^{-1/2} S M^{-1/2} from the blockwise inverse square root; call again
/// after doctoring S.
inline SpMat symmetrized_pencil(const SpMat& S,
                                const std::vector<Eigen::MatrixXd>& mass_inv_sqrt,
                                int dim) {
  std::vector<Triplet> strips;
  for (std::size_t q = 0; q < mass_inv_sqrt.size(); ++q)
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        if (mass_inv_sqrt[q](i, j) != 0.0)
          strips.emplace_back(int(q * dim + i), int(q * dim + j),
                              mass_inv_sqrt[q](i, j));
  SpMat Msi(S.rows(), S.cols());
  Msi.setFromTriplets(strips.begin(), strips.end());
  SpMat A = Msi * S * Msi;
  SpMat At = SpMat(A.transpose());
  A = 0.5 * (A + At);
  A.makeCompressed();
  return A;
}

inline AssembledOperators assemble_operators(const MetricSpec& spec,
                                             const Grid& grid,
                                             double consistency_tol = 1e-12) {
  spec.validate();
  AssembledOperators ops;
  ops.metric = spec;
  ops.grid_spec = grid.spec();
  ops.H0 = assemble_h0(grid);
  ops.M = assemble_mass(spec, grid, &ops.mass_blocks);
  ops.S = assemble_h1_form(spec, grid);
  ops.W = assemble_weitzenbock(spec, grid);
  ops.V = assemble_perturbation(spec, grid);

  // Two routes to the same operator; disagreement means a transcription bug.
  const double wmax = Eigen::MatrixXd(ops.W).cwiseAbs().maxCoeff();
  SpMat diff = ops.W - ops.H0 - ops.V;
  double dmax = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SpMat::InnerIterator it(diff, k); it; ++it)
      dmax = std::max(dmax, std::abs(it.value()));
  ops.weitzenbock_residual = wmax > 0.0 ? dmax / wmax : dmax;
  if (ops.weitzenbock_residual > consistency_tol)
    throw std::runtime_error(
        "assemble_operators: W != H0 + V (residual " +
        std::to_string(ops.weitzenbock_residual) + ")");

  const int n = grid.dim();
  ops.mass_sqrt.resize(ops.mass_blocks.size());
  ops.mass_inv_sqrt.resize(ops.mass_blocks.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (std::size_t q = 0; q < ops.mass_blocks.size(); ++q) {
    es.compute(ops.mass_blocks[q]);
    Eigen::VectorXd ev = es.eigenvalues();
    Eigen::MatrixXd U = es.eigenvectors();
    ops.mass_sqrt[q] = U * ev.cwiseSqrt().asDiagonal() * U.transpose();
    ops.mass_inv_sqrt[q] = U * ev.cwiseSqrt().cwiseInverse().asDiagonal() * U.transpose();
  }
  ops.sym_pencil = symmetrized_pencil(ops.S, ops.mass_inv_sqrt, n);
  return ops;
}

// ---------------------------------------------------------------------------
// Sparse triplet export
// ---------------------------------------------------------------------------

/// Text dump: "# rows cols nnz" header, then "row col value" per structural
/// entry, sorted by (row, col).
inline void export_triplets(const SpMat& A, std::ostream& os) {
  std::vector<std::tuple<int, int, double>> entries;
  entries.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      entries.emplace_back(int(it.row()), int(it.col()), it.value());
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) {
              return std::get<0>(a) != std::get<0>(b)
                         ? std::get<0>(a) < std::get<0>(b)
                         : std::get<1>(a) < std::get<1>(b);
            });
  os << "# " << A.rows() << " " << A.cols() << " " << entries.size() << "\n";
  char buf[64];
  for (const auto& [r, c, v] : entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << r << " " << c << " " << buf << "\n";
  }
}

/// Gershgorin enclosure of a symmetric sparse matrix.
inline std::pair<double, double> gershgorin_interval(const SpMat& A) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < A.outerSize(); ++k) {
    double diag = 0.0, radius = 0.0;
    for (SpMat::InnerIterator it(A, k); it; ++it) {
      if (it.row() == it.col()) diag = it.value();
      else radius += std::abs(it.value());
    }
    lo = std::min(lo, diag - radius);
    hi = std::max(hi, diag + radius);
  }
  if (A.rows() == 0) return {0.0, 0.0};
  return {lo, hi};
}

}  // namespace aeforms
