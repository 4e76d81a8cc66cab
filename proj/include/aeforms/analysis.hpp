#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aeforms/assembly.hpp"
#include "aeforms/geometry.hpp"
#include "aeforms/randsvd.hpp"
#include "aeforms/spectral.hpp"

namespace aeforms {

// ---------------------------------------------------------------------------
// Quadratic forms h0 / h1
// ---------------------------------------------------------------------------

/// Values of the flat and curved quadratic forms on one test form, with the
/// curved form split into its gradient and curvature parts.
struct FormsReport {
  std::string test_form;
  double h0 = 0.0;
  double h1 = 0.0;
  double h1_gradient = 0.0;
  double h1_curvature = 0.0;
  double norm_e_sq = 0.0;      // Euclidean L^2 norm squared
  double stiffness_value = 0.0;  // omega' S omega, consistency reference
};

/// Direct quadrature of h0 and h1 on the grid, sharing only eval_metric with
/// the assembled stiffness path. Uses the same forward-difference cell
/// quadrature as the weak form, so flat metrics give h1 = h0 exactly.
inline FormsReport evaluate_quadratic_forms(const MetricSpec& spec,
                                            const OneFormGrid& omega,
                                            std::string label = "") {
  const Grid& grid = omega.grid();
  if (!omega.boundary_is_zero())
    throw std::invalid_argument(
        "evaluate_quadratic_forms: form must vanish on the boundary layer");
  const int n = grid.dim();
  const double h = grid.spacing();
  const double hn = detail::pow_int(h, n);
  const bool flat = spec.is_flat();

  FormsReport rep;
  rep.test_form = std::move(label);
  rep.norm_e_sq = hn * omega.data().squaredNorm();

  Eigen::MatrixXd grad(n, n);  // grad(i,a) = nabla_i omega_a at the cell corner
  for (std::int64_t p = 0; p < grid.total_points(); ++p) {
    auto mi = grid.multi_index(p);
    bool is_cell = true;
    for (int d = 0; d < n; ++d)
      is_cell = is_cell && mi[d] < grid.points_per_axis() - 1;
    if (!is_cell) continue;
    const Eigen::VectorXd x = grid.coords(p);

    double h0_cell = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::int64_t pp = grid.neighbor(p, i, +1);
      for (int a = 0; a < n; ++a) {
        const double d = (omega.at(pp, a) - omega.at(p, a)) / h;
        grad(i, a) = d;
        h0_cell += d * d;
      }
    }
    rep.h0 += hn * h0_cell;

    if (flat) {
      rep.h1_gradient += hn * h0_cell;
    } else {
      auto mp = eval_metric(spec, x);
      if (grid.is_interior(p)) {
        auto gamma = christoffel(spec, x);
        for (int i = 0; i < n; ++i)
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) grad(i, a) -= gamma[b](i, a) * omega.at(p, b);
      }
      double cell = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
              cell += mp.g_upper(i, j) * mp.g_upper(a, b) * grad(i, a) * grad(j, b);
      rep.h1_gradient += mp.sqrt_det * hn * cell;
    }
  }

  if (!flat) {
    for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
      const std::int64_t p = grid.full_index_of_interior(q);
      const Eigen::VectorXd x = grid.coords(p);
      auto geo = curvature(spec, x);
      auto mp = eval_metric(spec, x);
      Eigen::MatrixXd R =
          0.5 * (geo.ricci_upper + geo.ricci_upper.transpose());
      double v = 0.0;
      for (int i = 0; i < n; ++i)
        for (int b = 0; b < n; ++b) v += R(i, b) * omega.at(p, i) * omega.at(p, b);
      rep.h1_curvature += mp.sqrt_det * hn * v;
    }
  }
  rep.h1 = rep.h1_gradient + rep.h1_curvature;
  return rep;
}

/// Largest Euclidean-norm bound constant of the curvature term over a scan:
/// |<R omega, omega>_g sqrt(g)| <= C_R |omega|_e^2 pointwise.
inline double curvature_bound_euclidean(const MetricSpec& spec, double r_max = 16.0,
                                        int radial_levels = 24) {
  double c = 0.0;
  const auto dirs = angular_sample(spec.dim);
  std::vector<double> radii{0.0};
  for (int l = 0; l <= radial_levels; ++l)
    radii.push_back(r_max * std::pow(2.0, double(l - radial_levels)));
  for (double r : radii)
    for (const auto& d : dirs) {
      Eigen::VectorXd x = r * d;
      auto geo = curvature(spec, x);
      auto mp = eval_metric(spec, x);
      Eigen::MatrixXd R =
          0.5 * mp.sqrt_det * (geo.ricci_upper + geo.ricci_upper.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R, Eigen::EigenvaluesOnly);
      c = std::max(c, es.eigenvalues().cwiseAbs().maxCoeff());
      if (r == 0.0) break;
    }
  return c;
}

// ---------------------------------------------------------------------------
// Form-domain equivalence
// ---------------------------------------------------------------------------

/// Empirical two-sided bound h1 <= a h0 + b |omega|^2 (and the reverse) over a
/// family of test forms. b is pinned to the scanned curvature constant plus a
/// Christoffel cross-term allowance; a is then the smallest feasible slope.
struct FormDomainReport {
  double a_forward = 0.0, b_forward = 0.0;   // h1 <= a h0 + b |.|^2
  double a_reverse = 0.0, b_reverse = 0.0;   // h0 <= a h1 + b |.|^2
  int forms = 0;
  bool pass = false;
  double a_threshold = 10.0;
};

/// Deterministic 20+ form family: Gaussian bumps at 5 centers x 2 widths and
/// plane-wave-modulated bumps at 2 frequencies, across all polarizations.
inline std::vector<OneFormGrid> standard_test_forms(const Grid& grid,
                                                    std::uint64_t seed = 11) {
  const int n = grid.dim();
  const double L = grid.half_width();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-0.35 * L, 0.35 * L);
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(Eigen::VectorXd::Zero(n));
  for (int c = 1; c < 5; ++c) {
    Eigen::VectorXd x0(n);
    for (int d = 0; d < n; ++d) x0(d) = unif(rng);
    centers.push_back(x0);
  }
  const double w1 = 0.12 * L, w2 = 0.22 * L;
  const std::vector<double> freqs = {0.0, 2.0 * M_PI / L, 4.0 * M_PI / L};

  std::vector<OneFormGrid> out;
  for (int pol = 0; pol < n; ++pol)
    for (const auto& x0 : centers)
      for (double w : {w1, w2})
        for (double f : freqs) {
          OneFormGrid omega(grid);
          for (std::int64_t p = 0; p < grid.total_points(); ++p) {
            if (!grid.is_interior(p)) continue;
            Eigen::VectorXd dx = grid.coords(p) - x0;
            const double bump = std::exp(-dx.squaredNorm() / (2.0 * w * w));
            omega.at(p, pol) = bump * std::cos(f * dx.sum());
          }
          if (omega.data().norm() > 0) out.push_back(std::move(omega));
        }
  return out;
}

inline FormDomainReport form_domain_fit(const MetricSpec& spec,
                                        const std::vector<FormsReport>& reps,
                                        double a_threshold = 10.0) {
  if (reps.size() < 20)
    throw std::invalid_argument("form_domain_fit: need >= 20 test forms");
  // Christoffel sup bound for the cross-term allowance
  double gamma_sup = 0.0;
  for (const auto& d : angular_sample(spec.dim))
    for (double r : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      auto G = christoffel(spec, r * d);
      for (const auto& g : G) gamma_sup = std::max(gamma_sup, g.cwiseAbs().maxCoeff());
    }
  const double c_r = curvature_bound_euclidean(spec);
  auto band = scan_metric_band(spec);
  const double n = double(spec.dim);
  // (u + K v)^2 <= 1.25 u^2 + 5 K^2 v^2, so a stays near the metric band
  const double cross = 5.0 * gamma_sup * gamma_sup * n * n;

  FormDomainReport rep;
  rep.forms = int(reps.size());
  rep.b_forward = band.sqrt_det_max * band.eig_upper_max * band.eig_upper_max * cross + c_r;
  rep.b_reverse =
      cross / (band.sqrt_det_min * band.eig_upper_min * band.eig_upper_min) +
      c_r / (band.sqrt_det_min * band.eig_upper_min);
  for (const auto& r : reps) {
    if (r.norm_e_sq <= 0.0 || r.h0 <= 0.0) continue;  // degenerate forms excluded
    rep.a_forward =
        std::max(rep.a_forward,
                 std::max(0.0, r.h1 - rep.b_forward * r.norm_e_sq) / r.h0);
    if (r.h1_gradient > 0.0)
      rep.a_reverse =
          std::max(rep.a_reverse,
                   std::max(0.0, r.h0 - rep.b_reverse * r.norm_e_sq) /
                       std::max(r.h1, 1e-300));
  }
  rep.a_threshold = a_threshold;
  rep.pass = std::isfinite(rep.a_forward) && std::isfinite(rep.a_reverse) &&
             rep.a_forward <= a_threshold && rep.a_reverse <= a_threshold;
  return rep;
}

inline FormDomainReport form_domain_equivalence(const MetricSpec& spec,
                                                const std::vector<OneFormGrid>& forms,
                                                double a_threshold = 10.0) {
  if (forms.size() < 20)
    throw std::invalid_argument("form_domain_equivalence: need >= 20 test forms");
  std::vector<FormsReport> reps;
  for (const auto& f : forms) reps.push_back(evaluate_quadratic_forms(spec, f));
  return form_domain_fit(spec, reps, a_threshold);
}

// ---------------------------------------------------------------------------
// Weighted L^2_delta membership
// ---------------------------------------------------------------------------

struct L2DeltaResult {
  double value = 0.0;
  bool convergent = false;
  std::vector<double> partials;  // integral up to each scheduled radius
  double delta = 0.0;
};

/// Polar-coordinate quadrature of |f(r)|^2 (1+r^2)^delta over R^n against an
/// increasing radius schedule; convergent when the tail increment drops below
/// 1 percent. Enforces the hypothesis delta > n/2.
inline L2DeltaResult l2_delta_norm(const std::function<double(double)>& f,
                                   double delta, int n,
                                   const std::vector<double>& radii,
                                   double tail_rel_tol = 0.01) {
  if (!(delta > 0.5 * n))
    throw std::invalid_argument(
        "l2_delta_norm: requires delta > n/2 (weighted-space hypothesis)");
  if (radii.size() < 2)
    throw std::invalid_argument("l2_delta_norm: radius schedule too short");
  // surface measure of S^{n-1}
  const double sphere = 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);

  // composite 16-point Gauss-Legendre on each shell
  static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589,
                                 0.4580167776572274, 0.6178762444026438,
                                 0.7554044083550030, 0.8656312023878318,
                                 0.9445750230732326, 0.9894009349916499};
  static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236,
                                 0.1691565193950025, 0.1495959888165767,
                                 0.1246289712555339, 0.0951585116824928,
                                 0.0622535239386479, 0.0271524594117541};

  auto integrand = [&](double r) {
    const double fr = f(r);
    return fr * fr * std::pow(1.0 + r * r, delta) * std::pow(r, n - 1);
  };
  auto segment = [&](double a, double b) {
    const int panels = 8;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) {
      const double pa = a + (b - a) * p / panels;
      const double pb = a + (b - a) * (p + 1) / panels;
      const double mid = 0.5 * (pa + pb), half = 0.5 * (pb - pa);
      for (int k = 0; k < 8; ++k)
        s += half * gl_w[k] * (integrand(mid - half * gl_x[k]) +
                               integrand(mid + half * gl_x[k]));
    }
    return s;
  };

  L2DeltaResult out;
  out.delta = delta;
  double acc = segment(0.0, radii[0]);
  out.partials.push_back(acc * sphere);
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] > radii[i - 1]))
      throw std::invalid_argument("l2_delta_norm: radii must increase");
    acc += segment(radii[i - 1], radii[i]);
    out.partials.push_back(acc * sphere);
  }
  out.value = out.partials.back();
  const double prev = out.partials[out.partials.size() - 2];
  const double inc = out.value - prev;
  out.convergent = out.value > 0.0 ? (inc <= tail_rel_tol * out.value)
                                   : true;
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient decay audit
// ---------------------------------------------------------------------------

struct CoefficientAudit {
  std::vector<DecayReport> reports;      // eight groups + sqrt(g) g - I
  std::vector<L2DeltaResult> l2_delta;   // matching weighted-norm records
  double delta_used = 0.0;
};

/// Radial decay of every coefficient group of the perturbation expansion plus
/// the J*J - I symbol, each profile also checked for L^2_delta membership at
/// delta = n/2 + (k-n)/2.
inline CoefficientAudit coefficient_decay_audit(const MetricSpec& spec,
                                                double k_decay,
                                                const std::vector<double>& radii,
                                                double fit_tol = 0.2) {
  spec.validate();
  if (!(k_decay > spec.dim))
    throw std::invalid_argument("coefficient_decay_audit: requires k > n");
  if (radii.size() < 3)
    throw std::invalid_argument("coefficient_decay_audit: need >= 3 radii");

  const auto dirs = angular_sample(spec.dim);
  const auto& names = PerturbationCoefficients::group_names();
  std::vector<std::vector<double>> profile(names.size() + 1);
  for (double r : radii) {
    std::vector<double> maxima(names.size() + 1, 0.0);
    for (const auto& d : dirs) {
      Eigen::VectorXd x = r * d;
      auto pc = perturbation_coefficients(spec, x);
      auto gm = pc.group_max_abs();
      for (std::size_t gidx = 0; gidx < gm.size(); ++gidx)
        maxima[gidx] = std::max(maxima[gidx], gm[gidx]);
      maxima.back() = std::max(
          maxima.back(), jstar_j_minus_identity_block(spec, x).cwiseAbs().maxCoeff());
    }
    for (std::size_t gidx = 0; gidx < maxima.size(); ++gidx)
      profile[gidx].push_back(maxima[gidx]);
  }

  CoefficientAudit audit;
  audit.delta_used = 0.5 * spec.dim + 0.5 * (k_decay - spec.dim);
  for (std::size_t gidx = 0; gidx < profile.size(); ++gidx) {
    std::string name = gidx < names.size() ? names[gidx] : "jstarj-minus-identity";
    audit.reports.push_back(detail::make_decay_report(
        name, radii, profile[gidx], k_decay, fit_tol));

    // piecewise power-law radial profile from the sampled maxima
    const auto& rr = radii;
    auto vals = profile[gidx];
    auto prof = [rr, vals](double r) -> double {
      if (vals.empty()) return 0.0;
      if (r <= rr.front()) return vals.front();
      for (std::size_t i = 1; i < rr.size(); ++i)
        if (r <= rr[i]) {
          if (vals[i - 1] < detail::kDecayFloor || vals[i] < detail::kDecayFloor)
            return 0.0;
          const double t = (std::log(r) - std::log(rr[i - 1])) /
                           (std::log(rr[i]) - std::log(rr[i - 1]));
          return std::exp((1.0 - t) * std::log(vals[i - 1]) + t * std::log(vals[i]));
        }
      return vals.back();
    };
    audit.l2_delta.push_back(
        l2_delta_norm(prof, audit.delta_used, spec.dim, radii));
  }
  return audit;
}

// ---------------------------------------------------------------------------
// Filtered-commutator singular values
// ---------------------------------------------------------------------------

/// Top singular values of E_I(H1)(H1 J - J H0)E_I(H0) and of (J*J - I)E_I(H0),
/// computed matrix-free in the isometric coordinates of both spaces.
struct CommutatorReport {
  double interval_lo = 0.0, interval_hi = 0.0;
  std::vector<double> commutator_sv;
  std::vector<double> jstar_sv;
  double commutator_partial_sum = 0.0;
  double jstar_partial_sum = 0.0;
  int filter_degree = 0;
  int grid_points = 0;
};

inline CommutatorReport commutator_singular_values(const AssembledOperators& ops,
                                                   double lo, double hi, int rank,
                                                   int filter_degree = 1500,
                                                   std::uint64_t seed = 23) {
  if (rank < 1 || rank > 64)
    throw std::invalid_argument("commutator_singular_values: rank must be in [1, 64]");
  const std::int64_t dim = ops.dofs();
  const int n = ops.grid_spec.dim;
  const double hn = detail::pow_int(ops.grid_spec.spacing(), n);
  const double sqrt_hn = std::sqrt(hn);

  SpectralFilter f0 = SpectralFilter::build(ops.H0, lo, hi, filter_degree);
  SpectralFilter f1 = SpectralFilter::build(ops.sym_pencil, lo, hi, filter_degree);

  // J in isometric coordinates: flat vector u-hat -> M^{1/2} u / h^{n/2}
  auto apply_jhat = [&](const Eigen::VectorXd& v) {
    return detail::symmetrize(ops, Eigen::VectorXd(v / sqrt_hn));
  };

  auto apply_K = [&](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Y(dim, X.cols());
    for (int c = 0; c < X.cols(); ++c) {
      Eigen::VectorXd v = f0.apply(ops.H0, Eigen::VectorXd(X.col(c)));
      Eigen::VectorXd jv = apply_jhat(v);
      Eigen::VectorXd w = ops.sym_pencil * jv - apply_jhat(Eigen::VectorXd(ops.H0 * v));
      Y.col(c) = f1.apply(ops.sym_pencil, w);
    }
    return Y;
  };
  auto apply_Kt = [&](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Y(dim, X.cols());
    for (int c = 0; c < X.cols(); ++c) {
      Eigen::VectorXd v = f1.apply(ops.sym_pencil, Eigen::VectorXd(X.col(c)));
      Eigen::VectorXd w =
          apply_jhat(Eigen::VectorXd(ops.sym_pencil * v)) - ops.H0 * apply_jhat(v);
      Y.col(c) = f0.apply(ops.H0, w);
    }
    return Y;
  };

  CommutatorReport rep;
  rep.interval_lo = lo;
  rep.interval_hi = hi;
  rep.filter_degree = filter_degree;
  rep.grid_points = ops.grid_spec.points_per_axis;
  Eigen::VectorXd sv =
      randomized_singular_values(apply_K, apply_Kt, dim, dim, rank, 10, 4, seed);
  rep.commutator_sv.assign(sv.data(), sv.data() + sv.size());
  for (double s : rep.commutator_sv) rep.commutator_partial_sum += s;

  // (J*J - I) E_I(H0); in isometric coordinates J*J - I = M / h^n - I
  auto apply_C = [&](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Y(dim, X.cols());
    for (int c = 0; c < X.cols(); ++c) {
      Eigen::VectorXd v = f0.apply(ops.H0, Eigen::VectorXd(X.col(c)));
      Y.col(c) = (ops.M * v) / hn - v;
    }
    return Y;
  };
  auto apply_Ct = [&](const Eigen::MatrixXd& X) {
    Eigen::MatrixXd Y(dim, X.cols());
    for (int c = 0; c < X.cols(); ++c) {
      Eigen::VectorXd v = (ops.M * X.col(c)) / hn - X.col(c);
      Y.col(c) = f0.apply(ops.H0, v);
    }
    return Y;
  };
  Eigen::VectorXd sv2 =
      randomized_singular_values(apply_C, apply_Ct, dim, dim, rank, 10, 4, seed + 1);
  rep.jstar_sv.assign(sv2.data(), sv2.data() + sv2.size());
  for (double s : rep.jstar_sv) rep.jstar_partial_sum += s;
  return rep;
}

/// Grid-enlargement stability of the commutator partial sums at a fixed
/// physical box: the discrete trace-class proxy.
struct CommutatorStability {
  CommutatorReport coarse;
  CommutatorReport fine;
  double stability_ratio = 0.0;  // |sum_f - sum_c| / sum_f
  bool pass = false;
  double threshold = 0.10;
};

inline CommutatorStability commutator_stability(const MetricSpec& spec,
                                                const GridSpec& coarse_grid,
                                                int fine_points, double lo, double hi,
                                                int rank, int filter_degree = 1500,
                                                std::uint64_t seed = 23,
                                                double threshold = 0.10) {
  Grid gc(coarse_grid);
  GridSpec fine_spec = coarse_grid;
  fine_spec.points_per_axis = fine_points;
  Grid gf(fine_spec);
  auto ops_c = assemble_operators(spec, gc);
  auto ops_f = assemble_operators(spec, gf);
  CommutatorStability st;
  st.coarse = commutator_singular_values(ops_c, lo, hi, rank, filter_degree, seed);
  st.fine = commutator_singular_values(ops_f, lo, hi, rank, filter_degree, seed);
  const double denom = std::max(st.fine.commutator_partial_sum, 1e-300);
  st.stability_ratio =
      std::abs(st.fine.commutator_partial_sum - st.coarse.commutator_partial_sum) /
      denom;
  st.threshold = threshold;
  st.pass = st.stability_ratio <= threshold;
  return st;
}

}  // namespace aeforms
