#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cstdint>
#include <functional>
#include <random>

namespace aeforms {

/// Top singular values of a matrix-free linear map K : R^{cols} -> R^{rows}
/// by randomized subspace iteration. apply/apply_adjoint take and return
/// dense matrices column-block-wise. Deterministic for a fixed seed.
inline Eigen::VectorXd randomized_singular_values(
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& apply,
    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& apply_adjoint,
    std::int64_t rows, std::int64_t cols, int rank, int oversample = 10,
    int power_iters = 4, std::uint64_t seed = 7) {
  const int k = int(std::min<std::int64_t>(rank + oversample, std::min(rows, cols)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd omega(cols, k);
  for (std::int64_t i = 0; i < cols; ++i)
    for (int j = 0; j < k; ++j) omega(i, j) = gauss(rng);

  Eigen::MatrixXd Q = apply(omega);
  Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ() *
      Eigen::MatrixXd::Identity(rows, k);
  for (int it = 0; it < power_iters; ++it) {
    Eigen::MatrixXd Z = apply_adjoint(Q);
    Z = Eigen::HouseholderQR<Eigen::MatrixXd>(Z).householderQ() *
        Eigen::MatrixXd::Identity(cols, k);
    Q = apply(Z);
    Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ() *
        Eigen::MatrixXd::Identity(rows, k);
  }
  // B' = K' Q, so svd(B) approximates the top block of svd(K)
  Eigen::MatrixXd Bt = apply_adjoint(Q);  // cols x k
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Bt);
  const int r = int(std::min<int>(rank, int(svd.singularValues().size())));
  return svd.singularValues().head(r);
}

}  // namespace aeforms
