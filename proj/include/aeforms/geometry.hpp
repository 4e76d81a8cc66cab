#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "aeforms/fields.hpp"
#include "aeforms/grid.hpp"
#include "aeforms/metrics.hpp"

namespace aeforms {

/// Connection and curvature data at a point.
/// christoffel[alpha](i,j) = Gamma^alpha_ij (symmetric in i,j)
/// ricci_mixed(i,k)        = R^i_k
/// ricci_upper(i,b)        = R^{ib} = g^{ab} R^i_a
struct GeometryPointData {
  std::vector<Eigen::MatrixXd> christoffel;
  Eigen::MatrixXd ricci_mixed;
  Eigen::MatrixXd ricci_upper;
};

namespace detail {

inline std::vector<Eigen::MatrixXd> christoffel_from(
    const MetricPointData& mp, const MetricDerivatives& md, int n) {
  // Gamma^a_ij = 1/2 g^{am} (d_i g_mj + d_j g_mi - d_m g_ij)
  std::vector<Eigen::MatrixXd> gamma(n, Eigen::MatrixXd::Zero(n, n));
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int m = 0; m < n; ++m)
          s += mp.g_upper(a, m) *
               (md.d1[i](m, j) + md.d1[j](m, i) - md.d1[m](i, j));
        gamma[a](i, j) = 0.5 * s;
        gamma[a](j, i) = gamma[a](i, j);
      }
  return gamma;
}

}  // namespace detail

/// Levi-Civita symbols Gamma^alpha_ij built from analytic metric derivatives.
inline std::vector<Eigen::MatrixXd> christoffel(const MetricSpec& spec,
                                                const Eigen::VectorXd& x) {
  auto mp = eval_metric(spec, x);
  auto md = metric_derivatives(spec, x, 1);
  return detail::christoffel_from(mp, md, spec.dim);
}

/// d Gamma^a_ij / d x_k, from analytic order-1 and order-2 metric derivatives.
/// Index order: [k][a](i,j).
inline std::vector<std::vector<Eigen::MatrixXd>> christoffel_derivatives(
    const MetricSpec& spec, const Eigen::VectorXd& x) {
  const int n = spec.dim;
  auto mp = eval_metric(spec, x);
  auto md = metric_derivatives(spec, x, 2);
  auto dgup = metric_upper_derivatives(spec, x);
  std::vector<std::vector<Eigen::MatrixXd>> out(
      n, std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(n, n)));
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) {
            s += dgup[k](a, m) *
                 (md.d1[i](m, j) + md.d1[j](m, i) - md.d1[m](i, j));
            s += mp.g_upper(a, m) *
                 (md.d2[k][i](m, j) + md.d2[k][j](m, i) - md.d2[k][m](i, j));
          }
          out[k][a](i, j) = 0.5 * s;
          out[k][a](j, i) = out[k][a](i, j);
        }
  return out;
}

/// Christoffel symbols plus Ricci curvature at a point.
/// Ricci convention: R_sn = d_m Gamma^m_ns - d_n Gamma^m_ms
///                        + Gamma^m_ml Gamma^l_ns - Gamma^m_nl Gamma^l_ms,
/// mixed form R^i_k = g^{im} R_mk.
inline GeometryPointData curvature(const MetricSpec& spec, const Eigen::VectorXd& x) {
  const int n = spec.dim;
  auto mp = eval_metric(spec, x);
  GeometryPointData out;
  out.christoffel = christoffel(spec, x);
  auto dgamma = christoffel_derivatives(spec, x);
  const auto& G = out.christoffel;

  Eigen::MatrixXd ricci_lower = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < n; ++s)
    for (int nu = 0; nu < n; ++nu) {
      double v = 0.0;
      for (int m = 0; m < n; ++m) {
        v += dgamma[m][m](nu, s) - dgamma[nu][m](m, s);
        for (int l = 0; l < n; ++l)
          v += G[m](m, l) * G[l](nu, s) - G[m](nu, l) * G[l](m, s);
      }
      ricci_lower(s, nu) = v;
    }

  out.ricci_mixed = mp.g_upper * ricci_lower;             // R^i_k
  out.ricci_upper = out.ricci_mixed * mp.g_upper;         // R^{ib}
  return out;
}

// ---------------------------------------------------------------------------
// Perturbation H1 - H0, pointwise coefficients
// ---------------------------------------------------------------------------

/// The eight coefficient groups of the expansion of H1 - H0 applied to a
/// 1-form, evaluated at a point. Output component k, input component as
/// noted per group.
struct PerturbationCoefficients {
  // (-g^{ij} + delta^{ij}) d^2 omega_k / dx_i dx_j       (same for every k)
  Eigen::MatrixXd second_order;
  // first_1[i](a,k) = g^{ij} Gamma^a_jk   (coefficient of d omega_a / dx_i)
  std::vector<Eigen::MatrixXd> first_1;
  // first_2(a)      = g^{ij} Gamma^a_ij   (coefficient of d omega_k / dx_a)
  Eigen::VectorXd first_2;
  // first_3[j](a,k) = g^{ij} Gamma^a_ik   (coefficient of d omega_a / dx_j)
  std::vector<Eigen::MatrixXd> first_3;
  // zero_1(a,k) =  g^{ij} d Gamma^a_jk / dx_i
  Eigen::MatrixXd zero_1;
  // zero_2(b,k) = -g^{ij} Gamma^a_ij Gamma^b_ak
  Eigen::MatrixXd zero_2;
  // zero_3(b,k) = -g^{ij} Gamma^a_ik Gamma^b_ja
  Eigen::MatrixXd zero_3;
  // ricci(i,k)  =  R^i_k
  Eigen::MatrixXd ricci;

  /// Largest absolute entry per group, ordered as the fields above.
  std::vector<double> group_max_abs() const {
    std::vector<double> m(8, 0.0);
    m[0] = second_order.cwiseAbs().maxCoeff();
    for (const auto& a : first_1) m[1] = std::max(m[1], a.cwiseAbs().maxCoeff());
    m[2] = first_2.cwiseAbs().maxCoeff();
    for (const auto& a : first_3) m[3] = std::max(m[3], a.cwiseAbs().maxCoeff());
    m[4] = zero_1.cwiseAbs().maxCoeff();
    m[5] = zero_2.cwiseAbs().maxCoeff();
    m[6] = zero_3.cwiseAbs().maxCoeff();
    m[7] = ricci.cwiseAbs().maxCoeff();
    return m;
  }

  static const std::vector<std::string>& group_names() {
    static const std::vector<std::string> names = {
        "second-order",      "first-gij-gamma-jk", "first-gij-gamma-ij",
        "first-gij-gamma-ik", "zeroth-dgamma",      "zeroth-gamma-gamma-1",
        "zeroth-gamma-gamma-2", "ricci"};
    return names;
  }
};

inline PerturbationCoefficients perturbation_coefficients(
    const MetricSpec& spec, const Eigen::VectorXd& x) {
  const int n = spec.dim;
  auto mp = eval_metric(spec, x);
  auto geo = curvature(spec, x);
  auto dgamma = christoffel_derivatives(spec, x);
  const auto& G = geo.christoffel;

  PerturbationCoefficients pc;
  pc.second_order = Eigen::MatrixXd::Identity(n, n) - mp.g_upper;

  pc.first_1.assign(n, Eigen::MatrixXd::Zero(n, n));
  pc.first_3.assign(n, Eigen::MatrixXd::Zero(n, n));
  pc.first_2 = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < n; ++k) {
        double s1 = 0.0;
        for (int j = 0; j < n; ++j) s1 += mp.g_upper(i, j) * G[a](j, k);
        pc.first_1[i](a, k) = s1;
      }
  for (int a = 0; a < n; ++a) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += mp.g_upper(i, j) * G[a](i, j);
    pc.first_2(a) = s;
  }
  for (int j = 0; j < n; ++j)
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < n; ++k) {
        double s3 = 0.0;
        for (int i = 0; i < n; ++i) s3 += mp.g_upper(i, j) * G[a](i, k);
        pc.first_3[j](a, k) = s3;
      }

  pc.zero_1 = Eigen::MatrixXd::Zero(n, n);
  pc.zero_2 = Eigen::MatrixXd::Zero(n, n);
  pc.zero_3 = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k) {
      double z = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) z += mp.g_upper(i, j) * dgamma[i][a](j, k);
      pc.zero_1(a, k) = z;
    }
  for (int b = 0; b < n; ++b)
    for (int k = 0; k < n; ++k) {
      double z2 = 0.0, z3 = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int a = 0; a < n; ++a) {
            z2 += mp.g_upper(i, j) * G[a](i, j) * G[b](a, k);
            z3 += mp.g_upper(i, j) * G[a](i, k) * G[b](j, a);
          }
      pc.zero_2(b, k) = -z2;
      pc.zero_3(b, k) = -z3;
    }
  pc.ricci = geo.ricci_mixed;
  return pc;
}

// ---------------------------------------------------------------------------
// Covariant derivative of a sampled 1-form
// ---------------------------------------------------------------------------

/// Rank-2 tensor field over interior grid points; values[q](i,k) = nabla_i omega_k.
struct Rank2Field {
  const Grid* grid = nullptr;
  std::vector<Eigen::MatrixXd> values;  // indexed by interior point
};

/// nabla_i omega_k = d omega_k / dx_i - Gamma^a_ik omega_a, with central
/// differences for the partials. Interior points only.
inline Rank2Field covariant_derivative(const MetricSpec& spec,
                                       const OneFormGrid& omega) {
  const Grid& grid = omega.grid();
  if (grid.dim() != spec.dim)
    throw std::invalid_argument("covariant_derivative: dim mismatch");
  if (grid.points_per_axis() < 3)
    throw std::invalid_argument("covariant_derivative: grid too small for stencil");
  const int n = grid.dim();
  const double inv2h = 1.0 / (2.0 * grid.spacing());

  Rank2Field out;
  out.grid = &grid;
  out.values.assign(grid.interior_points(), Eigen::MatrixXd::Zero(n, n));
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const std::int64_t p = grid.full_index_of_interior(q);
    const auto gamma = christoffel(spec, grid.coords(p));
    auto& T = out.values[q];
    for (int i = 0; i < n; ++i) {
      const std::int64_t pp = grid.neighbor(p, i, +1);
      const std::int64_t pm = grid.neighbor(p, i, -1);
      for (int k = 0; k < n; ++k) {
        double d = (omega.at(pp, k) - omega.at(pm, k)) * inv2h;
        for (int a = 0; a < n; ++a) d -= gamma[a](i, k) * omega.at(p, a);
        T(i, k) = d;
      }
    }
  }
  return out;
}

}  // namespace aeforms
