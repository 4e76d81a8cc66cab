// Acceptance suite: every criterion prints one PASS/FAIL line with the
// numbers that decided it, and the binary exits nonzero if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aeforms/analysis.hpp"
#include "aeforms/run.hpp"
#include "aeforms/scattering.hpp"
#include "aeforms/spectral.hpp"

using namespace aeforms;

namespace {

int g_failures = 0;
double g_total_seconds = 0.0;

class Criterion {
 public:
  Criterion(const char* id, double budget_seconds)
      : id_(id), budget_(budget_seconds), start_(std::chrono::steady_clock::now()) {}

  void check(bool ok, const std::string& detail) {
    ok_ = ok_ && ok;
    if (!ok) detail_ += (detail_.empty() ? "" : "; ") + detail;
  }

  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : " ") + s; }

  ~Criterion() {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    g_total_seconds += secs;
    const bool in_budget = secs < budget_;
    const bool pass = ok_ && in_budget;
    if (!pass) ++g_failures;
    std::printf("[%s] %s (%.2fs < %.0fs)%s%s%s%s\n", id_, pass ? "PASS" : "FAIL",
                secs, budget_, notes_.empty() ? "" : " ", notes_.c_str(),
                detail_.empty() ? "" : " -- ", detail_.c_str());
    std::fflush(stdout);
  }

 private:
  const char* id_;
  double budget_;
  std::chrono::steady_clock::time_point start_;
  bool ok_ = true;
  std::string detail_, notes_;
};

double sparse_max_abs(const SpMat& A) {
  double m = 0.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

OneFormGrid smooth_bump(const Grid& grid) {
  OneFormGrid omega(grid);
  for (std::int64_t p = 0; p < grid.total_points(); ++p) {
    if (!grid.is_interior(p)) continue;
    const double b = std::exp(-grid.coords(p).squaredNorm() / 2.0);
    for (int c = 0; c < grid.dim(); ++c) omega.at(p, c) = (c + 1) * b;
  }
  return omega;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void criterion_01_flat_collapse() {
  Criterion c("criterion-01-flat-collapse", 5.0);
  MetricSpec flat{MetricFamily::Flat, 2, 0.0, 4.0};
  Grid grid(GridSpec{2, 4.0, 33});  // h = 0.25, exact in binary
  auto ops = assemble_operators(flat, grid);
  const double hn = grid.spacing() * grid.spacing();
  c.check(sparse_max_abs(ops.V) == 0.0, "V != 0");
  c.check(sparse_max_abs(ops.S - SpMat(hn * ops.H0)) == 0.0, "S != h^n H0");
  SpMat I(ops.dofs(), ops.dofs());
  I.setIdentity();
  c.check(sparse_max_abs(ops.M - SpMat(hn * I)) == 0.0, "M != h^n I");
  double jj = 0.0, geo_max = 0.0;
  for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
    const Eigen::VectorXd x = grid.coords(grid.full_index_of_interior(q));
    jj = std::max(jj, jstar_j_minus_identity_block(flat, x).cwiseAbs().maxCoeff());
    auto geo = curvature(flat, x);
    for (const auto& g : geo.christoffel)
      geo_max = std::max(geo_max, g.cwiseAbs().maxCoeff());
    geo_max = std::max(geo_max, geo.ricci_mixed.cwiseAbs().maxCoeff());
  }
  c.check(jj == 0.0, "J*J != I");
  c.check(geo_max == 0.0, "geometry not identically zero");
}

void criterion_02_transcription() {
  Criterion c("criterion-02-weitzenbock-identity", 30.0);
  double worst = 0.0;
  for (int n : {1, 2}) {
    std::vector<MetricSpec> specs = {
        {MetricFamily::Flat, n, 0.0, 4.0},
        {MetricFamily::ConformalGaussian, n, 0.1, 4.0},
        {MetricFamily::ConformalRational, n, 0.5, 2.0},
        {MetricFamily::DiagonalRational, n, 0.5, 4.0}};
    for (int N : {9, 17, 33})
      for (const auto& spec : specs) {
        Grid grid(GridSpec{n, 4.0, N});
        auto ops = assemble_operators(spec, grid);  // throws above 1e-12
        worst = std::max(worst, ops.weitzenbock_residual);
      }
  }
  c.check(worst <= 1e-12, fmt("residual %.3e > 1e-12", worst));
  c.note(fmt("max residual %.3e", worst));
}

void criterion_03_weak_strong() {
  Criterion c("criterion-03-weak-strong-consistency", 60.0);
  MetricSpec spec{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
  double errs[2];
  for (int lvl = 0; lvl < 2; ++lvl) {
    const int N = lvl == 0 ? 33 : 65;
    Grid grid(GridSpec{2, 4.0, N});
    auto ops = assemble_operators(spec, grid);
    OneFormGrid omega = smooth_bump(grid);
    Eigen::VectorXd v = omega.interior();
    Eigen::VectorXd sv = ops.S * v;
    Eigen::VectorXd msv(sv.size());
    for (std::int64_t q = 0; q < grid.interior_points(); ++q)
      msv.segment(q * 2, 2) = ops.mass_blocks[q].ldlt().solve(sv.segment(q * 2, 2));
    Eigen::VectorXd wv = ops.W * v;
    double err = 0.0;
    for (std::int64_t q = 0; q < grid.interior_points(); ++q) {
      auto mi = grid.multi_index(grid.full_index_of_interior(q));
      bool deep = true;
      for (int d = 0; d < 2; ++d) deep = deep && mi[d] >= N / 4 && mi[d] <= 3 * N / 4;
      if (!deep) continue;
      for (int u = 0; u < 2; ++u)
        err = std::max(err, std::abs(msv[q * 2 + u] - wv[q * 2 + u]));
    }
    errs[lvl] = err;
  }
  const double factor = errs[0] / errs[1];
  c.check(factor >= 1.8, fmt("refinement factor %.3f < 1.8", factor));
  c.note(fmt("errors %.3e -> %.3e, factor %.3f", errs[0], errs[1], factor));
}

void criterion_04_geometry_oracles() {
  Criterion c("criterion-04-geometry-oracles", 10.0);
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  double worst_gamma = 0.0, worst_ricci = 0.0;
  std::vector<MetricSpec> specs = {
      {MetricFamily::Flat, 2, 0.0, 4.0},
      {MetricFamily::ConformalGaussian, 2, 0.1, 4.0},
      {MetricFamily::ConformalRational, 2, 0.5, 4.0},
      {MetricFamily::DiagonalRational, 2, 0.5, 4.0}};
  for (const auto& spec : specs)
    for (int t = 0; t < 100; ++t) {
      Eigen::VectorXd x(2);
      x << u(rng), u(rng);
      auto G = christoffel(spec, x);
      // oracle: Levi-Civita from finite-difference metric derivatives
      const double step = 1e-5;
      auto mp = eval_metric(spec, x);
      std::vector<Eigen::MatrixXd> d1(2);
      for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp(j) += step;
        xm(j) -= step;
        d1[j] = (eval_metric(spec, xp).g_lower - eval_metric(spec, xm).g_lower) /
                (2.0 * step);
      }
      for (int a = 0; a < 2; ++a)
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int m = 0; m < 2; ++m)
              s += mp.g_upper(a, m) * (d1[i](m, j) + d1[j](m, i) - d1[m](i, j));
            worst_gamma = std::max(worst_gamma, std::abs(G[a](i, j) - 0.5 * s));
          }
      // oracle: Ricci from centered differences of analytic Christoffel
      auto geo = curvature(spec, x);
      std::vector<std::vector<Eigen::MatrixXd>> dG(2, std::vector<Eigen::MatrixXd>(2));
      for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += step;
        xm(k) -= step;
        auto Gp = christoffel(spec, xp);
        auto Gm = christoffel(spec, xm);
        for (int a = 0; a < 2; ++a) dG[k][a] = (Gp[a] - Gm[a]) / (2.0 * step);
      }
      Eigen::MatrixXd ric(2, 2);
      for (int s = 0; s < 2; ++s)
        for (int nu = 0; nu < 2; ++nu) {
          double v = 0.0;
          for (int m = 0; m < 2; ++m) {
            v += dG[m][m](nu, s) - dG[nu][m](m, s);
            for (int l = 0; l < 2; ++l)
              v += G[m](m, l) * G[l](nu, s) - G[m](nu, l) * G[l](m, s);
          }
          ric(s, nu) = v;
        }
      worst_ricci = std::max(
          worst_ricci,
          (geo.ricci_mixed - mp.g_upper * ric).cwiseAbs().maxCoeff());
    }
  c.check(worst_gamma <= 1e-6, fmt("christoffel error %.3e > 1e-6", worst_gamma));
  c.check(worst_ricci <= 1e-5, fmt("ricci error %.3e > 1e-5", worst_ricci));
  c.note(fmt("christoffel %.2e ricci %.2e", worst_gamma, worst_ricci));
}

void criterion_05_dense_equivalence() {
  Criterion c("criterion-05-dense-equivalence", 10.0);
  {
    MetricSpec spec{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
    Grid grid(GridSpec{2, 2.0, 7});
    auto ops = assemble_operators(spec, grid);
    const int dim = int(ops.dofs());
    auto rep = extremal_eigs(ops, SpectrumSide::Smallest, dim, 1e-10, 5);
    Eigen::MatrixXd Sd(ops.S), Md(ops.M);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Sd, Md);
    double worst = 0.0;
    for (int k = 0; k < dim; ++k)
      worst = std::max(worst, std::abs(rep.values[k] - ges.eigenvalues()(k)) /
                                  std::max(1.0, std::abs(ges.eigenvalues()(k))));
    c.check(rep.converged, "pencil eigensolver did not converge");
    c.check(worst <= 1e-9, fmt("pencil vs dense %.3e > 1e-9", worst));
    c.note(fmt("pencil max dev %.2e", worst));
  }
  {
    Grid grid(GridSpec{1, 1.0, 5});  // h = 0.5
    MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
    auto ops = assemble_operators(flat, grid);
    auto rep = extremal_eigs(ops, SpectrumSide::Smallest, 1, 1e-12, 1);
    const double expected = (2.0 - std::sqrt(2.0)) / (0.5 * 0.5);
    c.check(std::abs(rep.values[0] - expected) <= 1e-10,
            fmt("H0 smallest %.12f != %.12f", rep.values[0], expected));
  }
}

void criterion_06_spectral_verdict() {
  Criterion c("criterion-06-spectral-verdict", 120.0);
  Grid grid(GridSpec{2, 8.0, 65});
  MetricSpec flat{MetricFamily::Flat, 2, 0.0, 4.0};
  MetricSpec gauss{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
  auto ops_f = assemble_operators(flat, grid);
  auto ops_g = assemble_operators(gauss, grid);
  auto flat_rep = extremal_eigs(ops_f, SpectrumSide::Smallest, 1, 1e-9, 1);
  auto verdict = detect_discrete_spectrum(ops_g, flat_rep.values[0], 1e-8, 5, 1, 1e-9);
  c.check(verdict.converged, "eigensolver did not converge");
  c.check(verdict.offending.empty(),
          fmt("%g Ritz values below -1e-8", double(verdict.offending.size())));
  c.check(verdict.relative_gap_error <= 0.20,
          fmt("gap error %.3f > 0.20", verdict.relative_gap_error));
  c.note(fmt("lowest %.6f flat gap %.6f rel %.2e", verdict.lowest,
             verdict.flat_reference_gap, verdict.relative_gap_error));
}

void criterion_07_dos_agreement() {
  Criterion c("criterion-07-dos-agreement", 120.0);
  Grid grid(GridSpec{2, 8.0, 65});
  MetricSpec flat{MetricFamily::Flat, 2, 0.0, 4.0};
  MetricSpec gauss{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
  auto ops_f = assemble_operators(flat, grid);
  auto ops_g = assemble_operators(gauss, grid);
  auto dos_f = density_of_states(ops_f, 0.0, 4.0, 64, 32, 200, 42);
  auto dos_g = density_of_states(ops_g, 0.0, 4.0, 64, 32, 200, 42);
  const double l1 = dos_l1_distance(dos_f, dos_g);
  c.check(l1 < 0.05, fmt("L1 distance %.4f >= 0.05", l1));
  c.note(fmt("L1 %.4f (32 probes, 200 moments, seed 42)", l1));
}

void criterion_08_scattering_trend() {
  Criterion c("criterion-08-scattering-trend", 300.0);
  Grid grid(GridSpec{1, 200.0, 4096});
  MetricSpec gauss{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  auto ops = assemble_operators(gauss, grid);
  WavePacketSpec wp;
  wp.center = Eigen::VectorXd::Constant(1, -50.0);
  wp.momentum = Eigen::VectorXd::Constant(1, 1.5);
  wp.width = 10.0;
  wp.polarization = Eigen::VectorXd::Ones(1);
  auto psi = make_wave_packet(wp, grid);
  auto diag =
      scattering_diagnostics(ops, psi, {10, 20, 30, 40, 50, 60}, 1e-8, 1e-6, true);
  const double first = diag.cauchy_norms.front(), last = diag.cauchy_norms.back();
  c.check(last <= 0.5 * first, fmt("cauchy %.3e !<= 0.5 * %.3e", last, first));
  c.check(diag.isometry_defects.back() <= 0.05,
          fmt("final isometry defect %.3e > 0.05", diag.isometry_defects.back()));
  double bmax = 0.0;
  for (double b : diag.boundary_mass) bmax = std::max(bmax, b);
  c.check(bmax <= 1e-6, fmt("boundary mass %.3e > 1e-6", bmax));
  c.note(fmt("cauchy %.2e -> %.2e, defect %.2e", first, last,
             diag.isometry_defects.back()));
}

void criterion_09_hypothesis_gates() {
  Criterion c("criterion-09-hypothesis-gates", 30.0);
  MetricSpec gauss{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
  auto reps = check_decay_conditions(gauss, 3.0, {2, 4, 8});
  for (const auto& r : reps) c.check(r.pass, "gaussian failed " + r.quantity);

  MetricSpec slow{MetricFamily::ConformalRational, 2, 1.0, 2.0};
  auto slow_reps = check_decay_conditions(slow, 3.0, {4, 8, 16, 32});
  c.check(!slow_reps[1].pass, "p=2 metric deviation unexpectedly passed k=3");

  MetricSpec fast{MetricFamily::ConformalRational, 2, 1.0, 4.0};
  auto fast_reps = check_decay_conditions(fast, 3.0, {4, 8, 16, 32});
  for (const auto& r : fast_reps) c.check(r.pass, "p=4 failed " + r.quantity);

  bool rejected = false;
  try {
    l2_delta_norm([](double) { return 0.0; }, 0.5, 1, {1, 2, 4});
  } catch (const std::invalid_argument&) {
    rejected = true;
  }
  c.check(rejected, "delta <= n/2 was not rejected");

  auto div = l2_delta_norm([](double r) { return std::pow(1.0 + r * r, -0.25); },
                           0.75, 1, {2, 4, 8, 16, 32, 64, 128});
  c.check(!div.convergent, "divergent profile reported convergent");
}

void criterion_10_commutator_stability() {
  Criterion c("criterion-10-commutator-stability", 180.0);
  MetricSpec gauss{MetricFamily::ConformalGaussian, 1, 0.1, 4.0};
  auto st = commutator_stability(gauss, GridSpec{1, 40.0, 512}, 768, 0.2, 1.0, 20,
                                 1500, 23);
  c.check(st.stability_ratio <= 0.10,
          fmt("stability ratio %.4f > 0.10", st.stability_ratio));
  Grid flat_grid(GridSpec{1, 40.0, 512});
  MetricSpec flat{MetricFamily::Flat, 1, 0.0, 4.0};
  auto flat_ops = assemble_operators(flat, flat_grid);
  auto flat_rep = commutator_singular_values(flat_ops, 0.2, 1.0, 20, 1500, 23);
  c.check(flat_rep.commutator_sv[0] <= 1e-10,
          fmt("flat commutator sv %.3e above filter tolerance",
              flat_rep.commutator_sv[0]));
  c.note(fmt("ratio %.4f, sums %.4e -> %.4e", st.stability_ratio,
             st.coarse.commutator_partial_sum, st.fine.commutator_partial_sum));
}

void criterion_11_form_domain() {
  Criterion c("criterion-11-form-domain", 60.0);
  MetricSpec gauss{MetricFamily::ConformalGaussian, 2, 0.1, 4.0};
  Grid grid(GridSpec{2, 4.0, 33});
  auto forms = standard_test_forms(grid, 42);
  c.check(forms.size() >= 20, fmt("only %g test forms", double(forms.size())));
  auto rep = form_domain_equivalence(gauss, forms, 10.0);
  c.check(std::isfinite(rep.a_forward) && rep.a_forward < 2.0,
          fmt("forward constant %.3f >= 2", rep.a_forward));
  c.check(std::isfinite(rep.a_reverse) && rep.a_reverse < 2.0,
          fmt("reverse constant %.3f >= 2", rep.a_reverse));
  c.note(fmt("a_forward %.3f a_reverse %.3f", rep.a_forward, rep.a_reverse));
}

void criterion_12_determinism() {
  Criterion c("criterion-12-determinism", 600.0);
  std::ifstream is(std::string(AEFORMS_SOURCE_DIR) + "/configs/flagship2d.cfg");
  auto cfg = parse_config(is);
  const std::string d1 = "acceptance_out/rerun1", d2 = "acceptance_out/rerun2";
  auto b1 = run(cfg, d1);
  emit_report(b1, d1);
  auto b2 = run(cfg, d2);
  emit_report(b2, d2);
  c.check(slurp(d1 + "/verdicts.json") == slurp(d2 + "/verdicts.json"),
          "verdict bundles differ between identical runs");
  c.check(!slurp(d1 + "/verdicts.json").empty(), "empty bundle");
  c.check(slurp(d1 + "/summary.txt") == slurp(d2 + "/summary.txt"),
          "summaries differ");
  c.check(b1.all_pass(), "flagship bundle has failing verdicts");
  c.note("flagship bundle byte-identical across reruns");
}

}  // namespace

int main() {
  std::printf("acceptance suite, toolkit %s\n", kVersion);
  criterion_01_flat_collapse();
  criterion_02_transcription();
  criterion_03_weak_strong();
  criterion_04_geometry_oracles();
  criterion_05_dense_equivalence();
  criterion_06_spectral_verdict();
  criterion_07_dos_agreement();
  criterion_08_scattering_trend();
  criterion_09_hypothesis_gates();
  criterion_10_commutator_stability();
  criterion_11_form_domain();
  criterion_12_determinism();
  const bool total_ok = g_total_seconds < 900.0;
  if (!total_ok) ++g_failures;
  std::printf("total runtime %.1fs (< 900s: %s)\n", g_total_seconds,
              total_ok ? "yes" : "NO");
  std::printf("%s\n", g_failures == 0 ? "ALL CRITERIA PASS" : "FAILURES PRESENT");
  return g_failures == 0 ? 0 : 1;
}
