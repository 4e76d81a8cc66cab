#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace aeforms {

enum class SpectrumSide { Smallest, Largest };

struct LanczosOptions {
  int count = 1;
  SpectrumSide side = SpectrumSide::Smallest;
  double tol = 1e-8;          // absolute, on ||A y - theta y||
  int max_restarts = 500;
  int subspace = 0;           // 0: automatic
  std::uint64_t seed = 1;
};

struct LanczosResult {
  Eigen::VectorXd values;     // requested Ritz values, sorted from the requested side
  Eigen::MatrixXd vectors;    // matching Ritz vectors (columns)
  Eigen::VectorXd residuals;  // ||A y - theta y||
  int sweeps = 0;
  bool converged = false;
};

/// Full-reorthogonalization Lanczos with restarts on the current best Ritz
/// vector. Deterministic for a fixed seed. apply must be symmetric.
inline LanczosResult lanczos_extremal(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    std::int64_t dim, const LanczosOptions& opts) {
  if (opts.count < 1 || opts.count > dim)
    throw std::invalid_argument("lanczos_extremal: bad count");

  int m = opts.subspace > 0 ? opts.subspace
                            : int(std::min<std::int64_t>(dim, std::max(4 * opts.count + 60, 90)));
  m = int(std::min<std::int64_t>(m, dim));

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd start(dim);
  for (std::int64_t i = 0; i < dim; ++i) start[i] = gauss(rng);
  start.normalize();

  LanczosResult res;
  Eigen::MatrixXd basis;
  Eigen::VectorXd alpha, beta;
  Eigen::VectorXd Av(dim);

  for (int sweep = 0; sweep < opts.max_restarts; ++sweep) {
    res.sweeps = sweep + 1;
    basis.resize(dim, m);
    alpha.resize(m);
    beta.resize(m);
    basis.col(0) = start;
    int built = m;
    for (int j = 0; j < m; ++j) {
      apply(basis.col(j), Av);
      alpha[j] = basis.col(j).dot(Av);
      Av -= alpha[j] * basis.col(j);
      if (j > 0) Av -= beta[j - 1] * basis.col(j - 1);
      // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass)
        for (int k = 0; k <= j; ++k) Av -= basis.col(k).dot(Av) * basis.col(k);
      const double nb = Av.norm();
      beta[j] = nb;
      if (j + 1 < m) {
        if (nb < 1e-14) { built = j + 1; break; }  // invariant subspace
        basis.col(j + 1) = Av / nb;
      }
    }

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(built, built);
    for (int j = 0; j < built; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < built) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const auto& theta = es.eigenvalues();  // ascending

    const int want = std::min<int>(opts.count, built);
    res.values.resize(want);
    res.vectors.resize(dim, want);
    res.residuals.resize(want);
    bool all_ok = true;
    for (int k = 0; k < want; ++k) {
      const int idx = opts.side == SpectrumSide::Smallest ? k : built - 1 - k;
      res.values[k] = theta[idx];
      res.vectors.col(k) =
          basis.leftCols(built) * es.eigenvectors().col(idx);
      res.vectors.col(k).normalize();
      apply(res.vectors.col(k), Av);
      res.residuals[k] = (Av - res.values[k] * res.vectors.col(k)).norm();
      all_ok = all_ok && res.residuals[k] <= opts.tol;
    }
    if (all_ok || built >= dim) {
      res.converged = all_ok;
      return res;
    }
    // restart from the best current Ritz vector of the requested side
    start = res.vectors.col(0);
    m = int(std::min<std::int64_t>(dim, std::int64_t(m) + m / 2));
  }
  res.converged = false;
  return res;
}

}  // namespace aeforms
