#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace aeforms {

/// Affine map taking a symmetric operator's spectral enclosure onto [-1, 1].
struct SpectralScale {
  double center = 0.0;
  double half = 1.0;

  static SpectralScale from_interval(double lo, double hi, double margin = 0.01) {
    SpectralScale s;
    s.center = 0.5 * (lo + hi);
    s.half = 0.5 * (hi - lo) / (1.0 - margin);
    if (!(s.half > 0.0)) s.half = 1.0;
    return s;
  }
  double to_unit(double lambda) const { return (lambda - center) / half; }
  double from_unit(double x) const { return center + half * x; }
};

namespace detail {

template <typename VecIn, typename VecOut>
void sparse_apply(const Eigen::SparseMatrix<double>& A, const VecIn& x, VecOut& y) {
  y.noalias() = A * x;
}

inline void sparse_apply(const Eigen::SparseMatrix<double>& A,
                         const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
  y.real() = A * x.real().eval();
  y.imag() = A * x.imag().eval();
}

}  // namespace detail

/// Bessel functions J_0(z)..J_mmax(z) by Miller's downward recurrence with
/// the J_0 + 2 sum J_{2k} = 1 normalization.
inline std::vector<double> bessel_j_sequence(int mmax, double z) {
  if (mmax < 0) throw std::invalid_argument("bessel_j_sequence: mmax < 0");
  const double az = std::abs(z);
  if (az < 1e-300) {
    std::vector<double> out(mmax + 1, 0.0);
    out[0] = 1.0;
    return out;
  }
  const int start = mmax + 50 + int(12.0 * std::cbrt(az) + 0.25 * std::sqrt(az));
  std::vector<double> j(start + 2, 0.0);
  j[start + 1] = 0.0;
  j[start] = 1e-300;
  for (int m = start; m >= 1; --m) {
    j[m - 1] = (2.0 * m / z) * j[m] - j[m + 1];
    if (std::abs(j[m - 1]) > 1e250) {
      for (int k = m - 1; k <= start + 1; ++k) j[k] *= 1e-250;
    }
  }
  double norm = j[0];
  for (int m = 2; m + 1 < int(j.size()); m += 2) norm += 2.0 * j[m];
  std::vector<double> out(mmax + 1);
  for (int m = 0; m <= mmax; ++m) out[m] = j[m] / norm;
  return out;
}

/// Jackson damping factors g_0..g_{deg}.
inline std::vector<double> jackson_coefficients(int deg) {
  std::vector<double> g(deg + 1);
  const double q = M_PI / double(deg + 2);
  for (int m = 0; m <= deg; ++m)
    g[m] = ((deg - m + 2) * std::cos(q * m) +
            std::sin(q * m) / std::tan(q)) /
           double(deg + 2);
  return g;
}

/// Chebyshev coefficients of the indicator of [x_lo, x_hi] in [-1, 1].
inline std::vector<double> indicator_coefficients(double x_lo, double x_hi, int deg) {
  x_lo = std::clamp(x_lo, -1.0, 1.0);
  x_hi = std::clamp(x_hi, -1.0, 1.0);
  const double th1 = std::acos(x_lo);  // larger angle
  const double th2 = std::acos(x_hi);
  std::vector<double> c(deg + 1);
  c[0] = (th1 - th2) / M_PI;
  for (int m = 1; m <= deg; ++m)
    c[m] = 2.0 / (M_PI * m) * (std::sin(m * th1) - std::sin(m * th2));
  return c;
}

/// y = sum_m coeffs[m] T_m(As) x where As = (A - center)/half.
template <typename Vec>
Vec chebyshev_apply(const Eigen::SparseMatrix<double>& A, const SpectralScale& sc,
                    const std::vector<double>& coeffs, const Vec& x) {
  Vec t_prev = x;
  Vec t_cur(x.size()), tmp(x.size());
  detail::sparse_apply(A, x, tmp);
  t_cur = (tmp - sc.center * x) / sc.half;
  Vec y = coeffs[0] * t_prev;
  if (coeffs.size() > 1) y += coeffs[1] * t_cur;
  for (std::size_t m = 2; m < coeffs.size(); ++m) {
    detail::sparse_apply(A, t_cur, tmp);
    Vec t_next = 2.0 * (tmp - sc.center * t_cur) / sc.half - t_prev;
    t_prev.swap(t_cur);
    t_cur.swap(t_next);
    if (coeffs[m] != 0.0) y += coeffs[m] * t_cur;
  }
  return y;
}

/// Result of a unitary-group application e^{-i t A} x.
struct PropagationInfo {
  int degree = 0;
  double tail_bound = 0.0;  // a-priori truncation bound on the expansion
};

/// e^{-i t A} x via the Chebyshev expansion
///   e^{-i t A} = e^{-i t c} sum_m (2 - delta_m0) (-i)^m J_m(t d) T_m(As),
/// truncated when the Bessel tail falls below tol. max_degree caps the step
/// budget (0 = automatic); exceeding it raises an error carrying the bound
/// that was achievable.
inline Eigen::VectorXcd propagate_chebyshev(const Eigen::SparseMatrix<double>& A,
                                            const SpectralScale& sc, double t,
                                            const Eigen::VectorXcd& x, double tol,
                                            PropagationInfo* info = nullptr,
                                            int max_degree = 0) {
  if (!(tol > 0.0)) throw std::invalid_argument("propagate_chebyshev: tol must be > 0");
  if (!std::isfinite(t)) throw std::invalid_argument("propagate_chebyshev: t not finite");
  const double z = t * sc.half;
  const double az = std::abs(z);
  int mmax = int(az + 12.0 * std::cbrt(az + 1.0) + 30.0);
  auto J = bessel_j_sequence(mmax, az);

  // trim: smallest degree whose remaining terms are below tol/2
  double tail = 0.0;
  int deg = mmax;
  std::vector<double> tails(mmax + 1, 0.0);
  for (int m = mmax; m >= 1; --m) {
    tail += 2.0 * std::abs(J[m]);
    tails[m] = tail;
  }
  for (int m = 1; m <= mmax; ++m)
    if (tails[m] <= 0.5 * tol) { deg = m; break; }
  if (max_degree > 0 && deg > max_degree) {
    const double achievable = tails[max_degree];
    throw std::runtime_error(
        "propagate_chebyshev: step budget exceeded; achievable bound " +
        std::to_string(achievable) + " with degree " + std::to_string(max_degree));
  }
  if (tails[deg] > 0.5 * tol && mmax > 0)
    throw std::runtime_error("propagate_chebyshev: step budget exceeded, bound " +
                             std::to_string(tails[1]));

  const std::complex<double> I(0.0, 1.0);
  const double sgn = z >= 0.0 ? 1.0 : -1.0;  // J_m(-z) = (-1)^m J_m(z)

  Eigen::VectorXcd t_prev = x;
  Eigen::VectorXcd t_cur(x.size()), tmp(x.size());
  detail::sparse_apply(A, x, tmp);
  t_cur = (tmp - sc.center * x) / sc.half;
  Eigen::VectorXcd y = J[0] * t_prev;
  std::complex<double> phase = -I * sgn;  // (-i sgn)^m
  y += 2.0 * J[1] * phase * t_cur;
  for (int m = 2; m <= deg; ++m) {
    detail::sparse_apply(A, t_cur, tmp);
    Eigen::VectorXcd t_next = 2.0 * (tmp - sc.center * t_cur) / sc.half - t_prev;
    t_prev.swap(t_cur);
    t_cur.swap(t_next);
    phase *= -I * sgn;
    y += 2.0 * J[m] * phase * t_cur;
  }
  y *= std::exp(-I * sc.center * t);
  if (info) {
    info->degree = deg;
    info->tail_bound = tails[deg];
  }
  return y;
}

// ---------------------------------------------------------------------------
// Kernel polynomial method
// ---------------------------------------------------------------------------

/// Jackson-damped Chebyshev moments mu_m = (1/probes) sum_p z_p' T_m(As) z_p / dim
/// with Rademacher probes; mu_0 = 1 exactly.
inline std::vector<double> kpm_moments(const Eigen::SparseMatrix<double>& A,
                                       const SpectralScale& sc, int moments,
                                       int probes, std::uint64_t seed) {
  if (probes < 1) throw std::invalid_argument("kpm_moments: probes must be >= 1");
  const std::int64_t dim = A.rows();
  std::vector<double> mu(moments + 1, 0.0);
  for (int p = 0; p < probes; ++p) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * std::uint64_t(p + 1));
    Eigen::VectorXd z(dim);
    for (std::int64_t i = 0; i < dim; ++i) z[i] = (rng() & 1ull) ? 1.0 : -1.0;
    Eigen::VectorXd t_prev = z, tmp(dim);
    detail::sparse_apply(A, z, tmp);
    Eigen::VectorXd t_cur = (tmp - sc.center * z) / sc.half;
    mu[0] += z.dot(t_prev);
    if (moments >= 1) mu[1] += z.dot(t_cur);
    for (int m = 2; m <= moments; ++m) {
      detail::sparse_apply(A, t_cur, tmp);
      Eigen::VectorXd t_next = 2.0 * (tmp - sc.center * t_cur) / sc.half - t_prev;
      t_prev.swap(t_cur);
      t_cur.swap(t_next);
      mu[m] += z.dot(t_cur);
    }
  }
  for (auto& v : mu) v /= double(probes) * double(dim);
  return mu;
}

/// Integrated density of states at scaled position x in [-1, 1]:
///   N(x) = (1/pi) [ g_0 mu_0 (pi - theta) + 2 sum_m g_m mu_m sin(m theta)/m ],
/// theta = acos(x). Monotone clamping is left to the caller.
inline double kpm_cdf(const std::vector<double>& mu, const std::vector<double>& g,
                      double x) {
  x = std::clamp(x, -1.0, 1.0);
  const double theta = std::acos(x);
  double s = g[0] * mu[0] * (M_PI - theta);
  for (std::size_t m = 1; m < mu.size(); ++m)
    s += 2.0 * g[m] * mu[m] * std::sin(m * theta) / double(m);
  return s / M_PI;
}

}  // namespace aeforms
