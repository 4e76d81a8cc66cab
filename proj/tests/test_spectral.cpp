#include "aeforms/spectral.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace aeforms;

namespace {

/// Exact integrated counting function of the n=1 Dirichlet tridiagonal.
std::vector<double> exact_flat_1d_cdf(const Grid& grid,
                                      const std::vector<double>& edges) {
  const double h = grid.spacing();
  const int m = int(grid.interior_points());
  std::vector<double> ev;
  for (int k = 1; k <= m; ++k)
    ev.push_back((2.0 - 2.0 * std::cos(k * M_PI / (m + 1))) / (h * h));
  std::vector<double> cdf;
  for (double e : edges) {
    double c = 0;
    for (double v : ev) c += v <= e ? 1.0 : 0.0;
    cdf.push_back(c / m);
  }
  return cdf;
}

double cdf_l1(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / a.size();
}

}  // namespace

TEST(ExtremalEigs, FlatPencilMatchesTridiagonalOracle) {
  // n=1, L=1, N=5: h = 0.5, smallest eigenvalue (2 - sqrt(2)) / h^2
  Grid grid(GridSpec{1, 1.0, 5});
  MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
  auto ops = assemble_operators(flat, grid);
  auto rep = extremal_eigs(ops, SpectrumSide::Smallest, 1, 1e-10, 1);
  ASSERT_TRUE(rep.converged);
  const double expected = (2.0 - std::sqrt(2.0)) / (0.5 * 0.5);
  EXPECT_NEAR(rep.values[0], expected, 1e-10);
  // dense oracle agreement
  auto dense = oracle::dense_pencil_eigenvalues(ops.S, ops.M);
  EXPECT_NEAR(rep.values[0], dense(0), 1e-10);
}

TEST(ExtremalEigs, NoSpuriousNegativesOnSmallGrids) {
  for (int n : {1, 2}) {
    std::vector<MetricSpec> specs = {
        {MetricFamily::ConformalGaussian, n, 0.1, 4.0},
        {MetricFamily::ConformalRational, n, 0.5, 4.0},
        {MetricFamily::DiagonalRational, n, 0.5, 4.0}};
    for (const auto& spec : specs) {
      Grid grid(GridSpec{n, 3.0, 9});
      auto ops = assemble_operators(spec, grid);
      auto dense = oracle::dense_pencil_eigenvalues(ops.S, ops.M);
      EXPECT_GE(dense(0), -1e-8) << family_name(spec.family);
      auto rep = extremal_eigs(ops, SpectrumSide::Smallest, 2, 1e-9, 3);
      ASSERT_TRUE(rep.converged);
      EXPECT_GE(rep.values[0], -1e-8);
    }
  }
}

TEST(ExtremalEigs, FullSpectrumMatchesDenseSolve) {
  // brute force over the whole pencil at n=2, N=7
  MetricSpec spec{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
  Grid grid(GridSpec{2, 2.0, 7});
  auto ops = assemble_operators(spec, grid);
  const int dim = int(ops.dofs());
  auto rep = extremal_eigs(ops, SpectrumSide::Smallest, dim, 1e-9, 5);
  ASSERT_TRUE(rep.converged);
  auto dense = oracle::dense_pencil_eigenvalues(ops.S, ops.M);
  for (int k = 0; k < dim; ++k)
    EXPECT_NEAR(rep.values[k], dense(k), 1e-9 * std::max(1.0, std::abs(dense(k))));
}

TEST(ExtremalEigs, ResidualContractHolds) {
  MetricSpec spec{MetricFamily::DiagonalRational, 2, 0.5, 4.0};
  Grid grid(GridSpec{2, 4.0, 17});
  auto ops = assemble_operators(spec, grid);
  const double tol = 1e-8;
  auto rep = extremal_eigs(ops, SpectrumSide::Smallest, 4, tol, 7);
  ASSERT_TRUE(rep.converged);
  for (int k = 0; k < rep.values.size(); ++k)
    EXPECT_LE(rep.residuals[k], tol);
  // largest side too
  auto repL = extremal_eigs(ops, SpectrumSide::Largest, 2, tol, 7);
  ASSERT_TRUE(repL.converged);
  EXPECT_GT(repL.values[0], rep.values[0]);
}

TEST(ExtremalEigs, DeterministicGivenSeed) {
  MetricSpec spec{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  Grid grid(GridSpec{1, 8.0, 129});
  auto ops = assemble_operators(spec, grid);
  auto r1 = extremal_eigs(ops, SpectrumSide::Smallest, 3, 1e-9, 11);
  auto r2 = extremal_eigs(ops, SpectrumSide::Smallest, 3, 1e-9, 11);
  EXPECT_EQ((r1.values - r2.values).norm(), 0.0);
}

TEST(ExtremalEigs, RejectsBadCount) {
  Grid grid(GridSpec{1, 1.0, 5});
  MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
  auto ops = assemble_operators(flat, grid);
  EXPECT_THROW(extremal_eigs(ops, SpectrumSide::Smallest, 0), std::invalid_argument);
}

TEST(DensityOfStates, FlatMatchesExactCountingFunction) {
  Grid grid(GridSpec{1, 40.0, 512});
  MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
  auto ops = assemble_operators(flat, grid);
  const double h = grid.spacing();
  auto dos = density_of_states(ops, 0.0, 4.0 / (h * h), 128, 32, 200, 42);
  auto exact = exact_flat_1d_cdf(grid, dos.edges);
  EXPECT_LT(cdf_l1(dos.integrated, exact), 0.03);
}

TEST(DensityOfStates, HistogramInvariants) {
  Grid grid(GridSpec{1, 8.0, 64});
  MetricSpec spec{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  auto ops = assemble_operators(spec, grid);
  auto [glo, ghi] = gershgorin_interval(ops.sym_pencil);
  auto dos = density_of_states(ops, 0.0, ghi, 48, 16, 200, 7);
  for (std::size_t i = 0; i < dos.integrated.size(); ++i) {
    EXPECT_GE(dos.integrated[i], 0.0);
    EXPECT_LE(dos.integrated[i], 1.0);
    if (i) {
      EXPECT_GE(dos.integrated[i], dos.integrated[i - 1]);
    }
  }
  EXPECT_THROW(density_of_states(ops, 0.0, 10.0 * ghi, 8, 16, 50, 7),
               std::invalid_argument);
  EXPECT_THROW(density_of_states(ops, 0.0, ghi, 8, 4, 50, 7),
               std::invalid_argument);
}

TEST(DensityOfStates, MoreProbesReduceDeviation) {
  // doubling the probe budget moves the estimate toward the dense-oracle
  // counting function for at least 8 of 10 seed families
  Grid grid(GridSpec{1, 8.0, 64});
  MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
  auto ops = assemble_operators(flat, grid);
  const double h = grid.spacing();
  int improved = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto d8 = density_of_states(ops, 0.0, 4.0 / (h * h), 64, 8, 200, seed);
    auto d16 = density_of_states(ops, 0.0, 4.0 / (h * h), 64, 16, 200, seed);
    auto exact = exact_flat_1d_cdf(grid, d8.edges);
    if (cdf_l1(d16.integrated, exact) < cdf_l1(d8.integrated, exact)) ++improved;
  }
  EXPECT_GE(improved, 8);
}

TEST(DensityOfStates, CurvedCloseToFlatOnSharedGrid) {
  // dense-oracle pilot of the production DOS comparison, n=1 N=64
  Grid grid(GridSpec{1, 8.0, 64});
  MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
  MetricSpec gauss{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  auto ops_f = assemble_operators(flat, grid);
  auto ops_g = assemble_operators(gauss, grid);
  auto dos_f = density_of_states(ops_f, 0.0, 4.0, 64, 32, 200, 42);
  auto dos_g = density_of_states(ops_g, 0.0, 4.0, 64, 32, 200, 42);
  EXPECT_LT(dos_l1_distance(dos_f, dos_g), 0.05);
  // cross-check against the dense generalized spectra on the same bins
  auto ev_f = oracle::dense_pencil_eigenvalues(ops_f.S, ops_f.M);
  auto ev_g = oracle::dense_pencil_eigenvalues(ops_g.S, ops_g.M);
  double l1 = 0.0;
  for (double e : dos_f.edges) {
    double cf = 0, cg = 0;
    for (int k = 0; k < ev_f.size(); ++k) {
      cf += ev_f(k) <= e ? 1.0 : 0.0;
      cg += ev_g(k) <= e ? 1.0 : 0.0;
    }
    l1 += std::abs(cf - cg) / ev_f.size();
  }
  EXPECT_LT(l1 / dos_f.edges.size(), 0.05);
}

TEST(SpectralFilter, FullRangeIsIdentity) {
  Grid grid(GridSpec{1, 8.0, 64});
  MetricSpec spec{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  auto ops = assemble_operators(spec, grid);
  auto [glo, ghi] = gershgorin_interval(ops.sym_pencil);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(ops.dofs());
  for (int i = 0; i < v.size(); ++i) v[i] = g(rng);
  Eigen::VectorXd fv = spectral_filter_apply(ops, glo - 1.0, ghi + 1.0, v, 500);
  EXPECT_LT((fv - v).norm() / v.norm(), 0.02);
}

TEST(SpectralFilter, EmptyIntervalAnnihilates) {
  Grid grid(GridSpec{1, 8.0, 64});
  MetricSpec spec{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  auto ops = assemble_operators(spec, grid);
  auto dense = oracle::dense_pencil_eigenvalues(ops.S, ops.M);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(ops.dofs());
  for (int i = 0; i < v.size(); ++i) v[i] = g(rng);
  // interval far below the spectrum bottom
  Eigen::VectorXd fv =
      spectral_filter_apply(ops, dense(0) - 3.0, dense(0) - 1.5, v, 800);
  EXPECT_LT(fv.norm() / v.norm(), 0.02);
}

TEST(SpectralFilter, MatchesDenseEigenprojector) {
  Grid grid(GridSpec{1, 8.0, 64});
  MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
  auto ops = assemble_operators(flat, grid);
  Eigen::MatrixXd H(ops.sym_pencil);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const auto& ev = es.eigenvalues();
  const double lo = 0.5 * (ev[4] + ev[5]);
  const double hi = 0.5 * (ev[19] + ev[20]);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(H.rows(), H.cols());
  for (int k = 5; k <= 19; ++k)
    P += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(H.rows());
  for (int i = 0; i < v.size(); ++i) v[i] = g(rng);
  Eigen::VectorXd fv = spectral_filter_apply(ops, lo, hi, v, 500);
  EXPECT_LT((fv - P * v).norm() / v.norm(), 0.02);
  // idempotence defect
  Eigen::VectorXd ffv = spectral_filter_apply(ops, lo, hi, fv, 500);
  EXPECT_LT((ffv - fv).norm() / v.norm(), 0.02);
  EXPECT_THROW(spectral_filter_apply(ops, hi, lo, v), std::invalid_argument);
  // field-level application matches the dof-level one
  OneFormGrid field(grid);
  field.set_interior(v);
  auto ffield = spectral_filter_apply(ops, lo, hi, field, 500);
  EXPECT_EQ((ffield.interior() - fv).norm(), 0.0);
}

TEST(ExtremalEigs, PencilBoundedBelowByCurvatureConstant) {
  // min eig(S, M) >= -max over grid points of the largest eigenvalue of the
  // pointwise pencil (-R block, metric block)
  MetricSpec spec{MetricFamily::ConformalGaussian, 2, 0.3, 4.0};
  Grid grid(GridSpec{2, 3.0, 11});
  auto ops = assemble_operators(spec, grid);
  double c_r = 0.0;
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const Eigen::VectorXd x = grid.coords(grid.full_index_of_interior(q));
    auto geo = curvature(spec, x);
    auto mp = eval_metric(spec, x);
    Eigen::MatrixXd R = -0.5 * (geo.ricci_upper + geo.ricci_upper.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(R, mp.g_upper);
    c_r = std::max(c_r, ges.eigenvalues().maxCoeff());
  }
  auto dense = oracle::dense_pencil_eigenvalues(ops.S, ops.M);
  EXPECT_GE(dense(0), -c_r * (1.0 + 1e-12) - 1e-14);
}

TEST(DetectDiscreteSpectrum, FlatPassesTrivially) {
  Grid grid(GridSpec{2, 4.0, 17});
  MetricSpec flat{MetricFamily::Flat, 2, 0.0, 4.0};
  auto ops = assemble_operators(flat, grid);
  auto flat_rep = extremal_eigs(ops, SpectrumSide::Smallest, 1, 1e-9, 1);
  auto verdict = detect_discrete_spectrum(ops, flat_rep.values[0], 1e-8);
  EXPECT_TRUE(verdict.pass);
  EXPECT_LE(verdict.relative_gap_error, 1e-12);
}

TEST(DetectDiscreteSpectrum, GaussianFamilyPasses) {
  // pilot of acceptance criterion 6 at reduced size, oracle-checked
  Grid grid(GridSpec{2, 4.0, 9});
  MetricSpec flat{MetricFamily::Flat, 2, 0.0, 4.0};
  MetricSpec gauss{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
  auto ops_f = assemble_operators(flat, grid);
  auto ops_g = assemble_operators(gauss, grid);
  auto dense_g = oracle::dense_pencil_eigenvalues(ops_g.S, ops_g.M);
  EXPECT_GE(dense_g(0), -1e-8);
  auto flat_rep = extremal_eigs(ops_f, SpectrumSide::Smallest, 1, 1e-9, 1);
  auto verdict = detect_discrete_spectrum(ops_g, flat_rep.values[0], 1e-8);
  EXPECT_TRUE(verdict.pass) << "lowest " << verdict.lowest << " flat "
                            << verdict.flat_reference_gap;
}

TEST(DetectDiscreteSpectrum, DoctoredWellFails) {
  // a deep potential well added to S drags an eigenvalue below zero
  Grid grid(GridSpec{1, 8.0, 65});
  MetricSpec gauss{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  auto ops = assemble_operators(gauss, grid);
  auto flat_ops = assemble_operators(MetricSpec{MetricFamily::Flat, 1, 0.0, 4.0},
                                     Grid(grid.spec()));
  auto flat_rep = extremal_eigs(flat_ops, SpectrumSide::Smallest, 1, 1e-9, 1);

  const double hn = grid.spacing();
  std::vector<Triplet> well;
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const Eigen::VectorXd x = grid.coords(grid.full_index_of_interior(q));
    if (x.norm() < 1.0) well.emplace_back(int(q), int(q), -10.0 * hn);
  }
  SpMat Wd(ops.dofs(), ops.dofs());
  Wd.setFromTriplets(well.begin(), well.end());
  ops.S += Wd;
  ops.sym_pencil = symmetrized_pencil(ops.S, ops.mass_inv_sqrt, 1);

  auto dense = oracle::dense_pencil_eigenvalues(ops.S, ops.M);
  ASSERT_LT(dense(0), -1e-6);
  auto verdict = detect_discrete_spectrum(ops, flat_rep.values[0], 1e-8);
  EXPECT_FALSE(verdict.pass);
  ASSERT_FALSE(verdict.offending.empty());
  EXPECT_NEAR(verdict.offending[0], dense(0), 1e-7 * std::abs(dense(0)));
}
