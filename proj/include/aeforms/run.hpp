#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "aeforms/analysis.hpp"
#include "aeforms/assembly.hpp"
#include "aeforms/config.hpp"
#include "aeforms/report.hpp"
#include "aeforms/scattering.hpp"
#include "aeforms/spectral.hpp"

namespace aeforms {

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace detail

/// Executes the configured tasks in dependency order (metric checks first,
/// assembly-dependent audits after), writing CSV tables into out_dir and
/// collecting one verdict per audited condition. Task failures are recorded
/// and do not stop independent tasks.
inline VerdictBundle run(const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto path = [&](const std::string& name) { return out_dir + "/" + name; };

  VerdictBundle bundle;
  bundle.config_hash = detail::hash_hex(config_hash(cfg));
  bundle.seed = cfg.seed;
  bundle.metric_family = family_name(cfg.metric.family);
  bundle.grid_points = cfg.grid.points_per_axis;
  bundle.dim = cfg.grid.dim;

  auto has_task = [&](Task t) {
    return std::find(cfg.tasks.begin(), cfg.tasks.end(), t) != cfg.tasks.end();
  };

  // ---- check-metric -------------------------------------------------------
  bool hypothesis_ok = true;
  if (cfg.metric.is_flat()) {
    hypothesis_ok = true;
  } else {
    try {
      auto reps = check_decay_conditions(cfg.metric, cfg.check_metric.k_decay,
                                         cfg.check_metric.radii,
                                         cfg.check_metric.fit_tol);
      for (const auto& r : reps) hypothesis_ok = hypothesis_ok && r.pass;
    } catch (...) {
      hypothesis_ok = false;
    }
  }

  if (has_task(Task::CheckMetric)) {
    TaskVerdict v;
    v.task = "check-metric";
    v.condition = "theorem-1-hypotheses";
    try {
      auto reps = check_decay_conditions(cfg.metric, cfg.check_metric.k_decay,
                                         cfg.check_metric.radii,
                                         cfg.check_metric.fit_tol);
      CsvWriter csv(path("decay_check.csv"), {"quantity", "radius", "max_abs"});
      bool all = true;
      for (const auto& r : reps) {
        all = all && r.pass;
        v.numbers.emplace_back(r.quantity + ".slope", r.slope);
        v.numbers.emplace_back(r.quantity + ".pass", r.pass ? 1.0 : 0.0);
        for (std::size_t i = 0; i < r.radii.size(); ++i)
          csv.row({r.quantity, CsvWriter::num(r.radii[i]),
                   CsvWriter::num(r.max_abs[i])});
      }
      v.numbers.emplace_back("k_decay", cfg.check_metric.k_decay);
      v.status = all ? Status::Pass : Status::Fail;
    } catch (const std::exception& e) {
      v.status = Status::Fail;
      v.note = e.what();
    }
    bundle.verdicts.push_back(std::move(v));

    // coefficient groups of the perturbation expansion + weighted-space
    // membership of their radial profiles
    TaskVerdict vf;
    vf.task = "check-metric";
    vf.condition = "lemma-f-coefficient-decay";
    try {
      auto audit = coefficient_decay_audit(cfg.metric, cfg.check_metric.k_decay,
                                           cfg.check_metric.radii,
                                           cfg.check_metric.fit_tol);
      CsvWriter csv(path("coefficient_decay.csv"), {"group", "radius", "max_abs"});
      bool all = true;
      double worst_slope = -std::numeric_limits<double>::infinity();
      int failing = 0, divergent = 0;
      for (std::size_t g = 0; g < audit.reports.size(); ++g) {
        const auto& r = audit.reports[g];
        all = all && r.pass && audit.l2_delta[g].convergent;
        if (!r.pass) ++failing;
        if (!audit.l2_delta[g].convergent) ++divergent;
        if (r.max_abs.back() > 0.0) worst_slope = std::max(worst_slope, r.slope);
        for (std::size_t i = 0; i < r.radii.size(); ++i)
          csv.row({r.quantity, CsvWriter::num(r.radii[i]),
                   CsvWriter::num(r.max_abs[i])});
      }
      vf.numbers.emplace_back("delta", audit.delta_used);
      vf.numbers.emplace_back("groups_failing_decay", failing);
      vf.numbers.emplace_back("groups_divergent", divergent);
      if (std::isfinite(worst_slope))
        vf.numbers.emplace_back("worst_slope", worst_slope);
      vf.status = all ? Status::Pass : Status::Fail;
    } catch (const std::exception& e) {
      vf.status = Status::Fail;
      vf.note = e.what();
    }
    bundle.verdicts.push_back(std::move(vf));
  }

  // ---- shared assembly ----------------------------------------------------
  const bool needs_ops = has_task(Task::Spectrum) || has_task(Task::Dos) ||
                         has_task(Task::Forms) || has_task(Task::Scatter);
  std::optional<Grid> grid;
  std::optional<AssembledOperators> ops, flat_ops;
  std::string assembly_error;
  if (needs_ops) {
    try {
      grid.emplace(cfg.grid);
      ops = assemble_operators(cfg.metric, *grid);
      if (has_task(Task::Spectrum) || has_task(Task::Dos)) {
        MetricSpec flat{MetricFamily::Flat, cfg.metric.dim, 0.0, 4.0};
        flat_ops = assemble_operators(flat, *grid);
      }
    } catch (const std::exception& e) {
      assembly_error = e.what();
    }
  }
  auto fail_on_assembly = [&](const char* task, const char* condition) {
    TaskVerdict v;
    v.task = task;
    v.condition = condition;
    v.status = Status::Fail;
    v.note = "assembly failed: " + assembly_error;
    bundle.verdicts.push_back(std::move(v));
  };

  // ---- spectrum -----------------------------------------------------------
  if (has_task(Task::Spectrum)) {
    if (!assembly_error.empty()) {
      fail_on_assembly("spectrum", "no-discrete-spectrum");
    } else {
      TaskVerdict v;
      v.task = "spectrum";
      v.condition = "no-discrete-spectrum";
      try {
        auto flat_rep =
            extremal_eigs(*flat_ops, SpectrumSide::Smallest, 1, cfg.spectrum.tol,
                          cfg.seed);
        auto small_rep = extremal_eigs(*ops, SpectrumSide::Smallest,
                                       cfg.spectrum.count, cfg.spectrum.tol,
                                       cfg.seed);
        auto verdict = discrete_spectrum_verdict(small_rep, flat_rep.values[0],
                                                 cfg.spectrum.negative_tol);
        auto rep = cfg.spectrum.side == SpectrumSide::Smallest
                       ? small_rep
                       : extremal_eigs(*ops, cfg.spectrum.side,
                                       cfg.spectrum.count, cfg.spectrum.tol,
                                       cfg.seed);
        CsvWriter csv(path("eigenvalues.csv"), {"index", "value", "residual"});
        for (int k = 0; k < rep.values.size(); ++k)
          csv.row({std::to_string(k), CsvWriter::num(rep.values[k]),
                   CsvWriter::num(rep.residuals[k])});
        v.numbers.emplace_back("lowest", verdict.lowest);
        v.numbers.emplace_back("flat_box_gap", verdict.flat_reference_gap);
        v.numbers.emplace_back("relative_gap_error", verdict.relative_gap_error);
        v.numbers.emplace_back("negative_count", double(verdict.offending.size()));
        v.numbers.emplace_back("negative_tol", verdict.negative_tol);
        v.status = verdict.pass ? Status::Pass : Status::Fail;
        if (!verdict.converged) {
          v.status = Status::Flagged;
          v.note = "eigensolver did not converge within the restart cap";
        }
      } catch (const std::exception& e) {
        v.status = Status::Fail;
        v.note = e.what();
      }
      bundle.verdicts.push_back(std::move(v));
    }
  }

  // ---- dos ----------------------------------------------------------------
  if (has_task(Task::Dos)) {
    if (!assembly_error.empty()) {
      fail_on_assembly("dos", "ac-spectrum-dos-agreement");
    } else {
      TaskVerdict v;
      v.task = "dos";
      v.condition = "ac-spectrum-dos-agreement";
      try {
        auto dos_c = density_of_states(*ops, cfg.dos.lo, cfg.dos.hi, cfg.dos.bins,
                                       cfg.dos.probes, cfg.dos.moments, cfg.seed);
        auto dos_f =
            density_of_states(*flat_ops, cfg.dos.lo, cfg.dos.hi, cfg.dos.bins,
                              cfg.dos.probes, cfg.dos.moments, cfg.seed);
        const double l1 = dos_l1_distance(dos_c, dos_f);
        CsvWriter csv(path("dos.csv"),
                      {"edge", "integrated", "integrated_flat", "abs_diff"});
        for (std::size_t i = 0; i < dos_c.edges.size(); ++i)
          csv.row({CsvWriter::num(dos_c.edges[i]), CsvWriter::num(dos_c.integrated[i]),
                   CsvWriter::num(dos_f.integrated[i]),
                   CsvWriter::num(std::abs(dos_c.integrated[i] - dos_f.integrated[i]))});
        v.numbers.emplace_back("l1_distance", l1);
        v.numbers.emplace_back("threshold", cfg.dos.l1_threshold);
        v.numbers.emplace_back("probes", cfg.dos.probes);
        v.numbers.emplace_back("moments", cfg.dos.moments);
        v.status = l1 < cfg.dos.l1_threshold ? Status::Pass : Status::Fail;
      } catch (const std::exception& e) {
        v.status = Status::Fail;
        v.note = e.what();
      }
      bundle.verdicts.push_back(std::move(v));
    }
  }

  // ---- forms --------------------------------------------------------------
  if (has_task(Task::Forms)) {
    if (!assembly_error.empty()) {
      fail_on_assembly("forms", "condition-4-form-domain");
    } else {
      try {
        auto forms = standard_test_forms(*grid, cfg.seed);
        CsvWriter csv(path("forms.csv"),
                      {"form", "h0", "h1", "h1_gradient", "h1_curvature", "norm_e_sq"});
        double ratio_min = std::numeric_limits<double>::infinity(), ratio_max = 0.0;
        double worst_curv_ratio = 0.0;
        const double hn = detail::pow_int(grid->spacing(), grid->dim());
        std::vector<FormsReport> reps;
        for (std::size_t i = 0; i < forms.size(); ++i) {
          reps.push_back(evaluate_quadratic_forms(cfg.metric, forms[i]));
          const auto& fr = reps.back();
          csv.row({std::to_string(i), CsvWriter::num(fr.h0), CsvWriter::num(fr.h1),
                   CsvWriter::num(fr.h1_gradient), CsvWriter::num(fr.h1_curvature),
                   CsvWriter::num(fr.norm_e_sq)});
          Eigen::VectorXd vi = forms[i].interior();
          const double r = vi.dot(ops->M * vi) / (hn * vi.squaredNorm());
          ratio_min = std::min(ratio_min, r);
          ratio_max = std::max(ratio_max, r);
          if (fr.norm_e_sq > 0.0)
            worst_curv_ratio =
                std::max(worst_curv_ratio, std::abs(fr.h1_curvature) / fr.norm_e_sq);
        }
        auto rep = form_domain_fit(cfg.metric, reps, cfg.forms.a_threshold);
        TaskVerdict v4;
        v4.task = "forms";
        v4.condition = "condition-4-form-domain";
        v4.numbers.emplace_back("a_forward", rep.a_forward);
        v4.numbers.emplace_back("b_forward", rep.b_forward);
        v4.numbers.emplace_back("a_reverse", rep.a_reverse);
        v4.numbers.emplace_back("b_reverse", rep.b_reverse);
        v4.numbers.emplace_back("a_threshold", rep.a_threshold);
        v4.numbers.emplace_back("forms", rep.forms);
        v4.status = rep.pass ? Status::Pass : Status::Fail;
        bundle.verdicts.push_back(std::move(v4));

        auto band = scan_metric_band(cfg.metric);
        TaskVerdict v1;
        v1.task = "forms";
        v1.condition = "condition-1-bounded-inverse";
        v1.numbers.emplace_back("ratio_min", ratio_min);
        v1.numbers.emplace_back("ratio_max", ratio_max);
        v1.numbers.emplace_back("band_lo", band.sqrt_det_min * band.eig_upper_min);
        v1.numbers.emplace_back("band_hi", band.sqrt_det_max * band.eig_upper_max);
        const bool in_band =
            ratio_min >= band.sqrt_det_min * band.eig_upper_min * (1 - 1e-9) &&
            ratio_max <= band.sqrt_det_max * band.eig_upper_max * (1 + 1e-9);
        v1.status = in_band ? Status::Pass : Status::Fail;
        bundle.verdicts.push_back(std::move(v1));

        // |curvature part| <= C_R |omega|_e^2 with C_R from the scan
        const double c_r = curvature_bound_euclidean(cfg.metric);
        TaskVerdict vc;
        vc.task = "forms";
        vc.condition = "eq-curvature-bound";
        vc.numbers.emplace_back("curvature_ratio_max", worst_curv_ratio);
        vc.numbers.emplace_back("c_r_scan", c_r);
        vc.status = worst_curv_ratio <= c_r * (1.0 + 1e-9) ? Status::Pass
                                                           : Status::Fail;
        bundle.verdicts.push_back(std::move(vc));
      } catch (const std::exception& e) {
        TaskVerdict v;
        v.task = "forms";
        v.condition = "condition-4-form-domain";
        v.status = Status::Fail;
        v.note = e.what();
        bundle.verdicts.push_back(std::move(v));
      }
    }
  }

  // ---- tracecheck (own grids at fixed physical box) -------------------------
  if (has_task(Task::TraceCheck)) {
    TaskVerdict v2;
    v2.task = "tracecheck";
    v2.condition = "condition-2-trace-class";
    TaskVerdict v3;
    v3.task = "tracecheck";
    v3.condition = "condition-3-compactness";
    try {
      const int fine = cfg.trace.fine_points > 0
                           ? cfg.trace.fine_points
                           : cfg.grid.points_per_axis * 3 / 2;
      auto st = commutator_stability(cfg.metric, cfg.grid, fine, cfg.trace.lo,
                                     cfg.trace.hi, cfg.trace.rank, cfg.trace.degree,
                                     cfg.seed, cfg.trace.stability_threshold);
      CsvWriter csv(path("trace_singular_values.csv"),
                    {"index", "commutator_coarse", "commutator_fine", "jstar_coarse",
                     "jstar_fine"});
      for (int k = 0; k < int(st.coarse.commutator_sv.size()); ++k)
        csv.row({std::to_string(k), CsvWriter::num(st.coarse.commutator_sv[k]),
                 CsvWriter::num(st.fine.commutator_sv[k]),
                 CsvWriter::num(st.coarse.jstar_sv[k]),
                 CsvWriter::num(st.fine.jstar_sv[k])});
      const double jstar_ratio =
          std::abs(st.fine.jstar_partial_sum - st.coarse.jstar_partial_sum) /
          std::max(st.fine.jstar_partial_sum, 1e-300);
      // for the flat metric both operators vanish; stability is then vacuous
      const double filter_floor = 1e-10;
      const bool flat_null = st.fine.commutator_partial_sum < filter_floor &&
                             st.coarse.commutator_partial_sum < filter_floor;
      v2.numbers.emplace_back("partial_sum_coarse", st.coarse.commutator_partial_sum);
      v2.numbers.emplace_back("partial_sum_fine", st.fine.commutator_partial_sum);
      v2.numbers.emplace_back("stability_ratio", st.stability_ratio);
      v2.numbers.emplace_back("threshold", st.threshold);
      v2.numbers.emplace_back("grid_coarse", st.coarse.grid_points);
      v2.numbers.emplace_back("grid_fine", st.fine.grid_points);
      v2.status = (st.pass || flat_null) ? Status::Pass : Status::Fail;

      const bool flat_null_j = st.fine.jstar_partial_sum < filter_floor &&
                               st.coarse.jstar_partial_sum < filter_floor;
      v3.numbers.emplace_back("partial_sum_coarse", st.coarse.jstar_partial_sum);
      v3.numbers.emplace_back("partial_sum_fine", st.fine.jstar_partial_sum);
      v3.numbers.emplace_back("stability_ratio", flat_null_j ? 0.0 : jstar_ratio);
      v3.numbers.emplace_back("threshold", cfg.trace.stability_threshold);
      v3.status = (flat_null_j || jstar_ratio <= cfg.trace.stability_threshold)
                      ? Status::Pass
                      : Status::Fail;
    } catch (const std::exception& e) {
      v2.status = Status::Fail;
      v2.note = e.what();
      v3.status = Status::Fail;
      v3.note = e.what();
    }
    bundle.verdicts.push_back(std::move(v2));
    bundle.verdicts.push_back(std::move(v3));
  }

  // ---- scatter --------------------------------------------------------------
  if (has_task(Task::Scatter)) {
    if (!assembly_error.empty()) {
      fail_on_assembly("scatter", "wave-operators-partial-isometry");
    } else {
      TaskVerdict v;
      v.task = "scatter";
      v.condition = "wave-operators-partial-isometry";
      try {
        std::vector<std::pair<std::string, WavePacketSpec>> packets;
        {
          WavePacketSpec wp;
          wp.center = Eigen::VectorXd::Constant(1, cfg.scatter.x0);
          wp.momentum = Eigen::VectorXd::Constant(1, cfg.scatter.momentum);
          wp.width = cfg.scatter.sigma;
          wp.polarization = Eigen::VectorXd::Ones(1);
          packets.emplace_back("outgoing", wp);
          if (cfg.scatter.mirrored) {
            wp.center = -wp.center;
            wp.momentum = -wp.momentum;
            packets.emplace_back("mirrored", wp);
          }
        }
        CsvWriter csv(path("scatter.csv"),
                      {"packet", "time", "isometry_defect", "boundary_mass"});
        CsvWriter csvc(path("scatter_cauchy.csv"),
                       {"packet", "time_from", "time_to", "cauchy_norm"});
        bool all_pass = true, any_box_limited = false;
        for (const auto& [label, wp] : packets) {
          auto psi = make_wave_packet(wp, *grid);
          auto diag = scattering_diagnostics(*ops, psi, cfg.scatter.times,
                                             cfg.scatter.tol,
                                             cfg.scatter.boundary_cap, hypothesis_ok);
          for (std::size_t j = 0; j < diag.times.size(); ++j)
            csv.row({label, CsvWriter::num(diag.times[j]),
                     CsvWriter::num(diag.isometry_defects[j]),
                     CsvWriter::num(diag.boundary_mass[j])});
          for (std::size_t j = 0; j + 1 < diag.times.size(); ++j)
            csvc.row({label, CsvWriter::num(diag.times[j]),
                      CsvWriter::num(diag.times[j + 1]),
                      CsvWriter::num(diag.cauchy_norms[j])});
          v.numbers.emplace_back(label + ".cauchy_first", diag.cauchy_norms.front());
          v.numbers.emplace_back(label + ".cauchy_last", diag.cauchy_norms.back());
          v.numbers.emplace_back(label + ".final_isometry_defect",
                                 diag.isometry_defects.back());
          v.numbers.emplace_back(
              label + ".max_boundary_mass",
              *std::max_element(diag.boundary_mass.begin(), diag.boundary_mass.end()));
          all_pass = all_pass && diag.pass;
          any_box_limited = any_box_limited || diag.box_limited;
        }
        v.numbers.emplace_back("hypothesis_ok", hypothesis_ok ? 1.0 : 0.0);
        // the isometry defect mixes norm-equivalence effects with genuine
        // scattering; report the band so readers can separate them
        auto band = scan_metric_band(cfg.metric);
        v.numbers.emplace_back("norm_band_lo",
                               std::sqrt(band.sqrt_det_min * band.eig_upper_min));
        v.numbers.emplace_back("norm_band_hi",
                               std::sqrt(band.sqrt_det_max * band.eig_upper_max));
        if (any_box_limited) {
          v.status = Status::Flagged;
          v.note = "boundary mass above cap: run is box-limited, not failed";
        } else if (!hypothesis_ok) {
          v.status = Status::Flagged;
          v.note = "metric decay hypotheses fail: no convergence guarantee";
        } else {
          v.status = all_pass ? Status::Pass : Status::Fail;
        }
      } catch (const std::exception& e) {
        v.status = Status::Fail;
        v.note = e.what();
      }
      bundle.verdicts.push_back(std::move(v));
    }
  }

  return bundle;
}

/// Writes the bundle in the requested format(s) into out_dir.
inline void emit_report(const VerdictBundle& bundle, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream os(out_dir + "/verdicts.json", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + out_dir + "/verdicts.json");
    os << bundle_to_json_text(bundle);
  }
  {
    std::ofstream os(out_dir + "/summary.txt", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + out_dir + "/summary.txt");
    os << bundle_to_text(bundle);
  }
}

}  // namespace aeforms
