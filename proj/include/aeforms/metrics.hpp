#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace aeforms {

/// Analytic metric families on R^n, all tending to the Euclidean metric at
/// infinity. Every shipped family is diagonal in Cartesian coordinates.
enum class MetricFamily {
  Flat,
  ConformalGaussian,  // g_ij = exp(2a exp(-|x|^2)) delta_ij
  ConformalRational,  // g_ij = (1 + a (1+|x|^2)^{-p/2}) delta_ij
  DiagonalRational,   // g_ii = 1 + a_i (1+|x|^2)^{-p/2}, a_i = a(i+1)/n
};

struct MetricSpec {
  MetricFamily family = MetricFamily::Flat;
  int dim = 2;
  double amplitude = 0.0;  // a
  double decay_p = 4.0;    // envelope exponent p for the rational families

  void validate() const {
    if (dim < 1) throw std::invalid_argument("MetricSpec: dim must be >= 1");
    if (!(amplitude > -1.0) || !std::isfinite(amplitude))
      throw std::invalid_argument("MetricSpec: amplitude must be finite and > -1");
    if (family == MetricFamily::ConformalRational ||
        family == MetricFamily::DiagonalRational) {
      if (!(decay_p > 0.0))
        throw std::invalid_argument("MetricSpec: decay_p must be > 0");
    }
  }

  bool is_flat() const {
    return family == MetricFamily::Flat || amplitude == 0.0;
  }
};

inline const char* family_name(MetricFamily f) {
  switch (f) {
    case MetricFamily::Flat: return "flat";
    case MetricFamily::ConformalGaussian: return "conformal-gaussian";
    case MetricFamily::ConformalRational: return "conformal-rational";
    case MetricFamily::DiagonalRational: return "diagonal-rational";
  }
  return "?";
}

inline MetricFamily family_from_name(const std::string& s) {
  if (s == "flat") return MetricFamily::Flat;
  if (s == "conformal-gaussian") return MetricFamily::ConformalGaussian;
  if (s == "conformal-rational") return MetricFamily::ConformalRational;
  if (s == "diagonal-rational") return MetricFamily::DiagonalRational;
  throw std::invalid_argument("unknown metric family: " + s);
}

/// Pointwise metric data: covariant and contravariant matrices plus the
/// volume density sqrt(det g).
struct MetricPointData {
  Eigen::MatrixXd g_lower;
  Eigen::MatrixXd g_upper;
  double sqrt_det = 1.0;
};

/// First- and second-order partial derivatives of the covariant metric.
/// d1[j](i,l)    = d g_il / d x_j
/// d2[j][k](i,l) = d^2 g_il / d x_j d x_k
struct MetricDerivatives {
  int order = 1;
  std::vector<Eigen::MatrixXd> d1;
  std::vector<std::vector<Eigen::MatrixXd>> d2;
};

namespace detail {

// Diagonal entries phi_i(x) of g and their radial building blocks.
// All families factor through s = |x|^2.
struct DiagonalProfile {
  Eigen::VectorXd phi;                 // g_ii
  Eigen::MatrixXd dphi;                // dphi(j,i)    = d g_ii / d x_j
  std::vector<Eigen::MatrixXd> d2phi;  // d2phi[j](k,i) = d^2 g_ii / dx_j dx_k
};

inline double axis_amplitude(const MetricSpec& spec, int axis) {
  if (spec.family == MetricFamily::DiagonalRational)
    return spec.amplitude * double(axis + 1) / double(spec.dim);
  return spec.amplitude;
}

inline DiagonalProfile diagonal_profile(const MetricSpec& spec,
                                        const Eigen::VectorXd& x,
                                        bool with_d1, bool with_d2) {
  const int n = spec.dim;
  DiagonalProfile out;
  out.phi = Eigen::VectorXd::Ones(n);
  if (with_d1) out.dphi = Eigen::MatrixXd::Zero(n, n);
  if (with_d2) out.d2phi.assign(n, Eigen::MatrixXd::Zero(n, n));
  if (spec.is_flat()) return out;

  const double r2 = x.squaredNorm();
  switch (spec.family) {
    case MetricFamily::ConformalGaussian: {
      // phi = exp(psi), psi = 2a exp(-r^2)
      const double e = std::exp(-r2);
      const double psi = 2.0 * spec.amplitude * e;
      const double phi = std::exp(psi);
      out.phi.setConstant(phi);
      if (with_d1 || with_d2) {
        Eigen::VectorXd dpsi = -4.0 * spec.amplitude * e * x;
        if (with_d1)
          for (int j = 0; j < n; ++j) out.dphi.row(j).setConstant(phi * dpsi(j));
        if (with_d2) {
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
              const double d2psi =
                  -4.0 * spec.amplitude * e * ((j == k ? 1.0 : 0.0) - 2.0 * x(j) * x(k));
              const double v = phi * (dpsi(j) * dpsi(k) + d2psi);
              out.d2phi[j].row(k).setConstant(v);
            }
        }
      }
      break;
    }
    case MetricFamily::ConformalRational:
    case MetricFamily::DiagonalRational: {
      // phi_i = 1 + a_i s^{-p/2}, s = 1 + r^2
      const double s = 1.0 + r2;
      const double p = spec.decay_p;
      const double env = std::pow(s, -p / 2.0);
      const double denv = -p * std::pow(s, -p / 2.0 - 1.0);        // d env / ds * 2 absorbed below
      const double d2env = p * (p + 2.0) * std::pow(s, -p / 2.0 - 2.0);
      for (int i = 0; i < n; ++i) {
        const double ai = axis_amplitude(spec, i);
        out.phi(i) = 1.0 + ai * env;
        if (with_d1)
          for (int j = 0; j < n; ++j) out.dphi(j, i) = ai * denv * x(j);
        if (with_d2)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
              out.d2phi[j](k, i) =
                  ai * (denv * (j == k ? 1.0 : 0.0) + d2env * x(j) * x(k));
      }
      break;
    }
    case MetricFamily::Flat:
      break;
  }
  return out;
}

inline void require_finite_point(const Eigen::VectorXd& x, int dim) {
  if (x.size() != dim)
    throw std::invalid_argument("point dimension does not match metric dim");
  if (!x.allFinite())
    throw std::invalid_argument("non-finite coordinate");
}

}  // namespace detail

/// Evaluates g_ij(x), g^ij(x) and sqrt(det g)(x).
inline MetricPointData eval_metric(const MetricSpec& spec, const Eigen::VectorXd& x) {
  spec.validate();
  detail::require_finite_point(x, spec.dim);
  const int n = spec.dim;
  auto prof = detail::diagonal_profile(spec, x, false, false);
  MetricPointData out;
  out.g_lower = prof.phi.asDiagonal();
  out.g_upper = prof.phi.cwiseInverse().asDiagonal();
  out.sqrt_det = std::sqrt(prof.phi.prod());
  (void)n;
  return out;
}

/// Exact analytic metric derivatives (order 1 or 2).
inline MetricDerivatives metric_derivatives(const MetricSpec& spec,
                                            const Eigen::VectorXd& x, int order) {
  spec.validate();
  detail::require_finite_point(x, spec.dim);
  if (order != 1 && order != 2)
    throw std::invalid_argument("metric_derivatives: order must be 1 or 2");
  const int n = spec.dim;
  auto prof = detail::diagonal_profile(spec, x, true, order == 2);
  MetricDerivatives out;
  out.order = order;
  out.d1.assign(n, Eigen::MatrixXd::Zero(n, n));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out.d1[j](i, i) = prof.dphi(j, i);
  if (order == 2) {
    out.d2.assign(n, std::vector<Eigen::MatrixXd>(n, Eigen::MatrixXd::Zero(n, n)));
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) out.d2[j][k](i, i) = prof.d2phi[j](k, i);
  }
  return out;
}

/// d g^il / d x_j = -g^ia (d g_ab / d x_j) g^bl
inline std::vector<Eigen::MatrixXd> metric_upper_derivatives(
    const MetricSpec& spec, const Eigen::VectorXd& x) {
  auto md = metric_derivatives(spec, x, 1);
  auto mp = eval_metric(spec, x);
  std::vector<Eigen::MatrixXd> out(spec.dim);
  for (int j = 0; j < spec.dim; ++j)
    out[j] = -mp.g_upper * md.d1[j] * mp.g_upper;
  return out;
}

// ---------------------------------------------------------------------------
// Decay-hypothesis checking
// ---------------------------------------------------------------------------

/// Per-quantity radial decay record. pass means the fitted log-log slope is
/// <= -k_decay within fit_tolerance (identically vanishing quantities pass
/// with slope -inf).
struct DecayReport {
  std::string quantity;
  std::vector<double> radii;
  std::vector<double> max_abs;
  double slope = 0.0;
  double k_decay = 0.0;
  double fit_tolerance = 0.2;
  bool pass = false;
};

namespace detail {

inline constexpr double kDecayFloor = 1e-250;

/// Least-squares slope of log(v) against log(r); -inf when everything has
/// collapsed to the floor.
inline double fit_loglog_slope(const std::vector<double>& r,
                               const std::vector<double>& v) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (size_t i = 0; i < r.size(); ++i) {
    if (v[i] < kDecayFloor) continue;
    const double lx = std::log(r[i]), ly = std::log(v[i]);
    sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    ++m;
  }
  if (m < 2) return -std::numeric_limits<double>::infinity();
  const double denom = double(m) * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  return (double(m) * sxy - sx * sy) / denom;
}

inline DecayReport make_decay_report(std::string name, std::vector<double> radii,
                                     std::vector<double> values, double k_decay,
                                     double fit_tol) {
  DecayReport rep;
  rep.quantity = std::move(name);
  rep.radii = std::move(radii);
  rep.max_abs = std::move(values);
  rep.k_decay = k_decay;
  rep.fit_tolerance = fit_tol;
  rep.slope = fit_loglog_slope(rep.radii, rep.max_abs);
  rep.pass = rep.slope <= -k_decay + fit_tol;
  return rep;
}

}  // namespace detail

/// Fixed angular sample: the 2n axis directions plus 64 seeded pseudo-random
/// unit vectors. Deterministic across runs.
inline std::vector<Eigen::VectorXd> angular_sample(int dim,
                                                   std::uint64_t seed = 0x5eedful,
                                                   int extra = 64) {
  std::vector<Eigen::VectorXd> dirs;
  for (int d = 0; d < dim; ++d) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(d) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < extra; ++k) {
    Eigen::VectorXd v(dim);
    do {
      for (int d = 0; d < dim; ++d) v(d) = gauss(rng);
    } while (v.norm() < 1e-8);
    dirs.push_back(v / v.norm());
  }
  return dirs;
}

/// Checks the decay hypotheses on the metric:
///   [0] |d g^il / d x_j| globally bounded,
///   [1] |g^ij - delta^ij|        < C r^-k,
///   [2] |d g_il / d x_j|         < C r^-k,
///   [3] |d^2 g_il / dx_j dx_k|   < C r^-k.
/// Rejects k_decay <= n.
inline std::vector<DecayReport> check_decay_conditions(
    const MetricSpec& spec, double k_decay, const std::vector<double>& radii,
    double fit_tol = 0.2) {
  spec.validate();
  if (!(k_decay > spec.dim))
    throw std::invalid_argument(
        "check_decay_conditions: decay exponent must exceed the dimension "
        "(hypothesis k > n)");
  if (radii.size() < 3)
    throw std::invalid_argument("check_decay_conditions: need >= 3 dyadic radii");
  for (size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1]))
      throw std::invalid_argument("check_decay_conditions: radii must increase");

  const auto dirs = angular_sample(spec.dim);
  std::vector<double> v_bound, v1, v2, v3;
  for (double r : radii) {
    double m0 = 0, m1 = 0, m2 = 0, m3 = 0;
    for (const auto& d : dirs) {
      Eigen::VectorXd x = r * d;
      auto mp = eval_metric(spec, x);
      auto md = metric_derivatives(spec, x, 2);
      auto mu = metric_upper_derivatives(spec, x);
      Eigen::MatrixXd dev = mp.g_upper - Eigen::MatrixXd::Identity(spec.dim, spec.dim);
      m1 = std::max(m1, dev.cwiseAbs().maxCoeff());
      for (int j = 0; j < spec.dim; ++j) {
        m0 = std::max(m0, mu[j].cwiseAbs().maxCoeff());
        m2 = std::max(m2, md.d1[j].cwiseAbs().maxCoeff());
        for (int k = 0; k < spec.dim; ++k)
          m3 = std::max(m3, md.d2[j][k].cwiseAbs().maxCoeff());
      }
    }
    v_bound.push_back(m0);
    v1.push_back(m1);
    v2.push_back(m2);
    v3.push_back(m3);
  }

  std::vector<DecayReport> out;
  // Boundedness check: pass when no radius exceeds the innermost level.
  DecayReport b = detail::make_decay_report("contravariant-derivative-bounded",
                                            radii, v_bound, 0.0, fit_tol);
  double head = std::max(v_bound.front(), detail::kDecayFloor);
  b.pass = true;
  for (double v : v_bound) b.pass = b.pass && v <= head * (1.0 + 1e-9);
  out.push_back(std::move(b));
  out.push_back(detail::make_decay_report("condition-1-metric-deviation", radii,
                                          v1, k_decay, fit_tol));
  out.push_back(detail::make_decay_report("condition-2-first-derivatives", radii,
                                          v2, k_decay, fit_tol));
  out.push_back(detail::make_decay_report("condition-3-second-derivatives", radii,
                                          v3, k_decay, fit_tol));
  return out;
}

/// Empirical uniform bounds: sqrt(g) in [C, C1] and eigenvalues of g^ij in
/// [D, D1], taken over a deterministic radial/angular scan.
struct MetricBand {
  double sqrt_det_min = 1.0, sqrt_det_max = 1.0;  // C, C1
  double eig_upper_min = 1.0, eig_upper_max = 1.0;  // D, D1
  long samples = 0;
};

inline MetricBand scan_metric_band(const MetricSpec& spec, double r_max = 64.0,
                                   int radial_levels = 48,
                                   std::uint64_t seed = 0x5eedful) {
  spec.validate();
  MetricBand band;
  band.sqrt_det_min = band.eig_upper_min = std::numeric_limits<double>::infinity();
  band.sqrt_det_max = band.eig_upper_max = 0.0;
  const auto dirs = angular_sample(spec.dim, seed, 256);
  std::vector<double> radii{0.0};
  for (int l = 0; l <= radial_levels; ++l)
    radii.push_back(r_max * std::pow(2.0, double(l - radial_levels)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  for (double r : radii) {
    for (const auto& d : dirs) {
      auto mp = eval_metric(spec, r * d);
      es.compute(mp.g_upper, Eigen::EigenvaluesOnly);
      band.sqrt_det_min = std::min(band.sqrt_det_min, mp.sqrt_det);
      band.sqrt_det_max = std::max(band.sqrt_det_max, mp.sqrt_det);
      band.eig_upper_min = std::min(band.eig_upper_min, es.eigenvalues().minCoeff());
      band.eig_upper_max = std::max(band.eig_upper_max, es.eigenvalues().maxCoeff());
      ++band.samples;
      if (r == 0.0) break;  // the origin is direction-independent
    }
  }
  // The scan brackets the asymptotic value 1 by construction.
  band.sqrt_det_min = std::min(band.sqrt_det_min, 1.0);
  band.sqrt_det_max = std::max(band.sqrt_det_max, 1.0);
  band.eig_upper_min = std::min(band.eig_upper_min, 1.0);
  band.eig_upper_max = std::max(band.eig_upper_max, 1.0);
  return band;
}

}  // namespace aeforms
