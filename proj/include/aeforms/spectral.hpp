#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aeforms/assembly.hpp"
#include "aeforms/chebyshev.hpp"
#include "aeforms/lanczos.hpp"

namespace aeforms {

/// Ritz data for the pencil (S, M). Values are in units 1/length^2 and
/// directly comparable to eigenvalues of H0.
struct SpectralReport {
  SpectrumSide side = SpectrumSide::Smallest;
  int requested = 0;
  Eigen::VectorXd values;
  Eigen::VectorXd residuals;  // ||S x - lambda M x|| / ||M x||
  int sweeps = 0;
  bool converged = false;
  double tol = 1e-8;
  std::uint64_t seed = 1;
  std::string metric_family;
  int grid_points = 0;
};

namespace detail {

/// x = M^{-1/2} y blockwise.
inline Eigen::VectorXd unsymmetrize(const AssembledOperators& ops,
                                    const Eigen::VectorXd& y) {
  const int n = ops.grid_spec.dim;
  Eigen::VectorXd x(y.size());
  for (std::size_t q = 0; q < ops.mass_inv_sqrt.size(); ++q)
    x.segment(q * n, n) = ops.mass_inv_sqrt[q] * y.segment(q * n, n);
  return x;
}

inline Eigen::VectorXd symmetrize(const AssembledOperators& ops,
                                  const Eigen::VectorXd& x) {
  const int n = ops.grid_spec.dim;
  Eigen::VectorXd y(x.size());
  for (std::size_t q = 0; q < ops.mass_sqrt.size(); ++q)
    y.segment(q * n, n) = ops.mass_sqrt[q] * x.segment(q * n, n);
  return y;
}

}  // namespace detail

/// Extremal Ritz pairs of the pencil (S, M) through the exact blockwise
/// symmetric reduction M^{-1/2} S M^{-1/2}.
inline SpectralReport extremal_eigs(const AssembledOperators& ops,
                                    SpectrumSide side, int count,
                                    double tol = 1e-8, std::uint64_t seed = 1) {
  if (count < 1) throw std::invalid_argument("extremal_eigs: count must be >= 1");
  // the symmetrized residual understates the pencil residual by at most
  // sqrt(cond(M)); tighten the inner tolerance to guarantee the contract
  double m_lo = std::numeric_limits<double>::infinity(), m_hi = 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (const auto& B : ops.mass_blocks) {
    es.compute(B, Eigen::EigenvaluesOnly);
    m_lo = std::min(m_lo, es.eigenvalues().minCoeff());
    m_hi = std::max(m_hi, es.eigenvalues().maxCoeff());
  }
  LanczosOptions opts;
  opts.count = count;
  opts.side = side;
  opts.tol = tol / std::sqrt(m_hi / m_lo);
  opts.seed = seed;
  const auto& A = ops.sym_pencil;
  auto apply = [&A](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    y.noalias() = A * x;
  };
  auto lr = lanczos_extremal(apply, A.rows(), opts);

  SpectralReport rep;
  rep.side = side;
  rep.requested = count;
  rep.values = lr.values;
  rep.sweeps = lr.sweeps;
  rep.converged = lr.converged;
  rep.tol = tol;
  rep.seed = seed;
  rep.metric_family = family_name(ops.metric.family);
  rep.grid_points = ops.grid_spec.points_per_axis;
  rep.residuals.resize(lr.values.size());
  for (int k = 0; k < lr.values.size(); ++k) {
    Eigen::VectorXd x = detail::unsymmetrize(ops, lr.vectors.col(k));
    Eigen::VectorXd Mx = ops.M * x;
    rep.residuals[k] = (ops.S * x - lr.values[k] * Mx).norm() / Mx.norm();
    // the report's contract is the pencil residual, not the symmetrized one
    rep.converged = rep.converged && rep.residuals[k] <= tol;
  }
  return rep;
}

/// Stochastic integrated density of states (counting measure per unknown).
struct DOSHistogram {
  double lambda_lo = 0.0, lambda_hi = 0.0;
  std::vector<double> edges;           // bins+1 edges
  std::vector<double> integrated;      // N(edge_i), monotone, in [0, 1]
  int probes = 0;
  int moments = 0;
  std::uint64_t seed = 0;
};

inline DOSHistogram density_of_states(const AssembledOperators& ops,
                                      double lambda_lo, double lambda_hi,
                                      int bins, int probes, int moments,
                                      std::uint64_t seed) {
  if (probes < 8) throw std::invalid_argument("density_of_states: probes must be >= 8");
  if (bins < 1) throw std::invalid_argument("density_of_states: bins must be >= 1");
  auto [glo, ghi] = gershgorin_interval(ops.sym_pencil);
  if (lambda_lo >= lambda_hi)
    throw std::invalid_argument("density_of_states: empty interval");
  if (lambda_lo < glo - 1e-9 * (ghi - glo) || lambda_hi > ghi + 1e-9 * (ghi - glo))
    throw std::invalid_argument(
        "density_of_states: interval outside the spectral enclosure [" +
        std::to_string(glo) + ", " + std::to_string(ghi) + "]");

  auto sc = SpectralScale::from_interval(glo, ghi, 0.01);
  auto mu = kpm_moments(ops.sym_pencil, sc, moments, probes, seed);
  auto g = jackson_coefficients(moments);

  DOSHistogram out;
  out.lambda_lo = lambda_lo;
  out.lambda_hi = lambda_hi;
  out.probes = probes;
  out.moments = moments;
  out.seed = seed;
  out.edges.resize(bins + 1);
  out.integrated.resize(bins + 1);
  double prev = 0.0;
  for (int b = 0; b <= bins; ++b) {
    out.edges[b] = lambda_lo + (lambda_hi - lambda_lo) * double(b) / bins;
    double v = kpm_cdf(mu, g, sc.to_unit(out.edges[b]));
    v = std::clamp(v, 0.0, 1.0);
    v = std::max(v, prev);  // enforce monotonicity against probe noise
    out.integrated[b] = v;
    prev = v;
  }
  return out;
}

/// Mean absolute difference of two integrated-DOS curves on matching edges.
inline double dos_l1_distance(const DOSHistogram& a, const DOSHistogram& b) {
  if (a.edges.size() != b.edges.size())
    throw std::invalid_argument("dos_l1_distance: bin mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.edges.size(); ++i)
    s += std::abs(a.integrated[i] - b.integrated[i]);
  return s / double(a.edges.size());
}

/// Jackson-damped polynomial approximation of the spectral projector
/// E_[lo,hi] of the pencil, applied to interior-dof vectors in the original
/// (non-symmetrized) coordinates.
struct SpectralFilter {
  SpectralScale scale;
  std::vector<double> coeffs;  // damped indicator coefficients
  double margin = 0.0;

  static SpectralFilter build(const SpMat& A, double lo, double hi, int degree) {
    if (!(lo < hi)) throw std::invalid_argument("SpectralFilter: degenerate interval");
    auto [glo, ghi] = gershgorin_interval(A);
    SpectralFilter f;
    f.scale = SpectralScale::from_interval(glo, ghi, 0.01);
    f.coeffs = indicator_coefficients(f.scale.to_unit(lo), f.scale.to_unit(hi), degree);
    auto g = jackson_coefficients(degree);
    for (int m = 0; m <= degree; ++m) f.coeffs[m] *= g[m];
    f.margin = 0.02 * (ghi - glo);
    return f;
  }

  template <typename Vec>
  Vec apply(const SpMat& A, const Vec& v) const {
    return chebyshev_apply(A, scale, coeffs, v);
  }
};

/// E_I v for the pencil operator, in original coordinates (filter runs on the
/// symmetrized matrix).
inline Eigen::VectorXd spectral_filter_apply(const AssembledOperators& ops,
                                             double lo, double hi,
                                             const Eigen::VectorXd& v,
                                             int degree = 500) {
  SpectralFilter f = SpectralFilter::build(ops.sym_pencil, lo, hi, degree);
  Eigen::VectorXd y = detail::symmetrize(ops, v);
  y = f.apply(ops.sym_pencil, y);
  return detail::unsymmetrize(ops, y);
}

inline OneFormGrid spectral_filter_apply(const AssembledOperators& ops, double lo,
                                         double hi, const OneFormGrid& field,
                                         int degree = 500) {
  OneFormGrid out(field.grid());
  out.set_interior(spectral_filter_apply(ops, lo, hi, field.interior(), degree));
  return out;
}

/// Proxy verdict for "no discrete spectrum": no Ritz value below -tol, and
/// the bottom of the pencil spectrum within 20 percent of the flat Dirichlet
/// box gap computed on the same grid.
struct DiscreteSpectrumVerdict {
  bool pass = false;
  bool converged = false;
  double lowest = 0.0;
  double flat_reference_gap = 0.0;
  double negative_tol = 1e-8;
  double relative_gap_error = 0.0;
  std::vector<double> offending;
};

/// Verdict from an existing smallest-side report.
inline DiscreteSpectrumVerdict discrete_spectrum_verdict(
    const SpectralReport& rep, double flat_reference_gap, double tol) {
  if (rep.side != SpectrumSide::Smallest)
    throw std::invalid_argument("discrete_spectrum_verdict: needs the smallest side");
  DiscreteSpectrumVerdict v;
  v.converged = rep.converged;
  v.negative_tol = tol;
  v.flat_reference_gap = flat_reference_gap;
  v.lowest = rep.values.size() ? rep.values[0] : 0.0;
  for (int k = 0; k < rep.values.size(); ++k)
    if (rep.values[k] < -tol) v.offending.push_back(rep.values[k]);
  v.relative_gap_error =
      std::abs(v.lowest - flat_reference_gap) / std::abs(flat_reference_gap);
  v.pass = rep.converged && v.offending.empty() && v.relative_gap_error <= 0.20;
  return v;
}

inline DiscreteSpectrumVerdict detect_discrete_spectrum(
    const AssembledOperators& ops, double flat_reference_gap, double tol,
    int count = 5, std::uint64_t seed = 1, double eig_tol = 1e-8) {
  auto rep = extremal_eigs(ops, SpectrumSide::Smallest, count, eig_tol, seed);
  return discrete_spectrum_verdict(rep, flat_reference_gap, tol);
}

}  // namespace aeforms
