#pragma once

// `run` and `verify` commands: simulation loop with file output and audits,
// and the verification table.

#include "nsch/config.hpp"
#include "nsch/coupler.hpp"
#include "nsch/galerkin.hpp"
#include "nsch/io.hpp"
#include "nsch/linalg.hpp"
#include "nsch/verification.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace nsch {

struct RunOptions {
  bool strict = false;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
};

/// Applies command-line overrides; a seed only affects the spinodal preset.
inline RunConfig apply_overrides(RunConfig cfg, const RunOptions& opts) {
  if (opts.output_dir) cfg.output.directory = *opts.output_dir;
  if (opts.seed)
    if (auto* s = std::get_if<SpinodalInit>(&cfg.phase_init)) s->seed = *opts.seed;
  return cfg;
}

inline int step_count(double t_end, double dt) {
  return static_cast<int>(std::ceil(t_end / dt - 1e-9));
}

struct RunSummary {
  std::vector<DiagnosticsRecord> records;  // one per step, records[0] at t = 0
  AuditReport dissipation;
  double energy_scale = 1.0;        // 1 + |E(0)|
  double max_energy_increase = 0.0; // max_n E_{n+1} - E_n
  double max_divergence = 0.0;
  double weighted_mass_error = 0.0; // max_n |M_weighted - initial|
  double bulk_mass_error = 0.0;
  double surface_mass_error = 0.0;
  int cfl_warnings = 0;
  std::uint64_t clamps = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

using StepObserver = std::function<void(int step, const SimState&, const DiagnosticsRecord&)>;

/// Runs the configured simulation and audits mass, energy and divergence.
/// The observer sees the initial state (step 0) and every step after it.
inline RunSummary simulate(const RunConfig& cfg, const StepObserver& observer = {}) {
  const ChannelGrid g = cfg.grid();
  const ModelParams& params = cfg.model;
  Simulation sim(g, params, cfg.consts);
  SimState s = initial_state(initial_phase(cfg.phase_init, params, g), initial_velocity(cfg.velocity_init, g),
                             params, cfg.consts, g);
  RunSummary out;
  const int steps = step_count(params.t_end, params.dt);
  out.records.reserve(static_cast<std::size_t>(steps) + 1);
  out.records.push_back(diagnose(s, params, cfg.consts, g));
  if (observer) observer(0, s, out.records.back());
  for (int n = 1; n <= steps; ++n) {
    StepInfo info;
    auto [next, rec] = sim.advance(s, params.dt, &info);
    s = std::move(next);
    out.records.push_back(rec);
    if (info.cfl_violated) ++out.cfl_warnings;
    out.max_divergence = std::max(out.max_divergence, info.max_divergence);
    if (observer) observer(n, s, rec);
  }
  out.clamps = cfg.consts.clamp_count();

  const DiagnosticsRecord& r0 = out.records.front();
  out.energy_scale = 1.0 + std::abs(r0.E_total);
  out.max_energy_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < out.records.size(); ++n) {
    const DiagnosticsRecord& r = out.records[n];
    out.weighted_mass_error = std::max(out.weighted_mass_error, std::abs(r.M_weighted - r0.M_weighted));
    out.bulk_mass_error = std::max(out.bulk_mass_error, std::abs(r.M_bulk - r0.M_bulk));
    out.surface_mass_error = std::max(out.surface_mass_error, std::abs(r.M_surf - r0.M_surf));
    if (n > 0) out.max_energy_increase = std::max(out.max_energy_increase, r.E_total - out.records[n - 1].E_total);
  }

  const double etol = cfg.audit.energy_tol * out.energy_scale;
  const auto fail = [&](const std::string& what, double value, double tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s = %.3e exceeds %.3e", what.c_str(), value, tol);
    out.failures.emplace_back(buf);
  };
  if (steps > 0) {
    out.dissipation = dissipation_audit(out.records, params.dt, etol);
    if (out.max_energy_increase > etol) fail("max energy increase", out.max_energy_increase, etol);
    if (!out.dissipation.ok()) fail("max dissipation residual", out.dissipation.max_residual, etol);
  }
  const double wtol = cfg.audit.mass_tol * (1.0 + std::abs(r0.M_weighted));
  if (out.weighted_mass_error > wtol) fail("weighted mass drift", out.weighted_mass_error, wtol);
  if (std::holds_alternative<Neumann>(params.coupling)) {
    const double btol = cfg.audit.mass_tol * (1.0 + std::abs(r0.M_bulk));
    const double stol = cfg.audit.mass_tol * (1.0 + std::abs(r0.M_surf));
    if (out.bulk_mass_error > btol) fail("bulk mass drift", out.bulk_mass_error, btol);
    if (out.surface_mass_error > stol) fail("surface mass drift", out.surface_mass_error, stol);
  }
  if (out.max_divergence > cfg.audit.divergence_tol)
    fail("max divergence", out.max_divergence, cfg.audit.divergence_tol);
  return out;
}

inline std::string snapshot_name(const char* stem, int step, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%07d.%s", stem, step, ext);
  return buf;
}

/// `run`: exit 0 on success, 2 on audit failure with --strict, 1 on errors.
inline int run_command(const RunConfig& base, const RunOptions& opts, std::ostream& out, std::ostream& err,
                       RunSummary* summary = nullptr) {
  try {
    const RunConfig cfg = apply_overrides(base, opts);
    if (const int threads = thread_cap_from_env(); threads > 0) Eigen::setNbThreads(threads);
    namespace fs = std::filesystem;
    const fs::path dir(cfg.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
      err << "error: cannot create output directory '" << dir.string() << "'"
          << (ec ? ": " + ec.message() : std::string()) << '\n';
      return 1;
    }
    const ChannelGrid g = cfg.grid();
    const int steps = step_count(cfg.model.t_end, cfg.model.dt);
    std::optional<DiagnosticsWriter> csv;
    if (cfg.output.csv) csv.emplace((dir / "diagnostics.csv").string());
    const auto observer = [&](int n, const SimState& s, const DiagnosticsRecord& r) {
      const bool last = n == steps;
      const int every = cfg.output.every, snap = cfg.output.snapshot_every;
      if (csv && (n == 0 || last || (every > 0 && n % every == 0))) csv->write(r);
      if (n == 0 || last || (snap > 0 && n % snap == 0)) {
        if (cfg.output.vtk)
          write_vtk((dir / snapshot_name("fields", n, "vtk")).string(), make_snapshot(s, g),
                    "nsch fields t=" + format_double(s.t));
        if (cfg.output.wall) write_wall_profile((dir / snapshot_name("wall", n, "csv")).string(), s, g);
      }
    };
    RunSummary sum = simulate(cfg, observer);
    if (csv) csv->close();

    const DiagnosticsRecord& last = sum.records.back();
    out << "steps " << steps << ", t = " << format_double(last.t) << ", E_total = " << format_double(last.E_total)
        << '\n';
    out << "max divergence " << format_double(sum.max_divergence) << ", max energy increase "
        << format_double(steps > 0 ? sum.max_energy_increase : 0.0) << ", max R_n "
        << format_double(steps > 0 ? sum.dissipation.max_residual : 0.0) << '\n';
    out << "weighted mass drift " << format_double(sum.weighted_mass_error) << '\n';
    if (sum.cfl_warnings > 0) err << "warning: dt exceeded the advective limit in " << sum.cfl_warnings << " steps\n";
    if (sum.clamps > 0) err << "warning: " << sum.clamps << " coefficient evaluations were clamped to their bounds\n";
    for (const auto& f : sum.failures) err << "audit: " << f << '\n';
    const bool ok = sum.ok();
    if (summary) *summary = std::move(sum);
    if (!ok && opts.strict) return 2;
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

struct CheckRow {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
  std::string note;
};

/// Runs every verification check on the configuration's grid and lengths.
inline std::vector<CheckRow> verification_checks(const RunConfig& cfg) {
  std::vector<CheckRow> rows;
  const ChannelGrid g = cfg.grid();
  const int k = cfg.verify.k;
  const double alpha = std::sqrt(cfg.model.beta);
  const auto at_most = [&](std::string name, double v, double limit, std::string note = {}) {
    rows.push_back({std::move(name), v, limit, v <= limit, std::move(note)});
  };
  const auto at_least = [&](std::string name, double v, double limit, std::string note = {}) {
    rows.push_back({std::move(name), v, limit, v >= limit, std::move(note)});
  };

  const EigenStructure es = eigen_structure(bulk_surface_eigenpairs(k, alpha, g), alpha, g);
  at_most("eigen: |lambda_1|", es.first_lambda, 1e-10);
  at_most("eigen: first pair", es.first_pair_error, 1e-10);
  at_most("eigen: gram", es.gram_error, 1e-10);
  at_most("eigen: mean constraint", es.mean_error, 1e-10);

  const StokesStructure ss = stokes_structure(stokes_eigenfields(k, g), g);
  rows.push_back({"stokes: min lambda", ss.min_lambda, 0.0, ss.min_lambda > 0.0, "must be > 0"});
  at_most("stokes: gram", ss.gram_error, 1e-10);
  at_most("stokes: divergence", ss.max_divergence, 1e-10);

  // Only the Dirichlet coupling has a Galerkin form.
  ModelParams mp = cfg.model;
  mp.coupling = Dirichlet{};
  try {
    const GalerkinSystem sys(k, g, mp, cfg.consts);
    const auto [a0, b0] = sys.project(initial_velocity(cfg.velocity_init, g), initial_phase(cfg.phase_init, mp, g));
    const GalerkinAudit audit = integrate_and_audit(sys, a0, b0, cfg.verify.t_end, cfg.verify.tol);
    at_most("galerkin: energy identity", audit.energy_residual, 1e-6 * (1.0 + std::abs(audit.initial_energy)));
    at_most("galerkin: mass", audit.mass_residual, 1e-10);
  } catch (const IntegratorError& e) {
    rows.push_back({"galerkin: energy identity", std::nan(""), 1e-6, false, e.what()});
  }

  const RefinementStudy mms = elliptic_mms_study(cfg.lx, cfg.ly, 16, 8, 3, cfg.model.kappa, alpha);
  at_least("elliptic: order phi", *std::min_element(mms.phi_orders.begin(), mms.phi_orders.end()), 1.9);
  at_least("elliptic: order psi", *std::min_element(mms.psi_orders.begin(), mms.psi_orders.end()), 1.9);

  const ChainRuleStudy cr = chain_rule_study(g, cfg.model.kappa, alpha, {1e-2, 5e-3, 2.5e-3});
  at_least("chain rule: order", *std::min_element(cr.orders.begin(), cr.orders.end()), 1.9);
  return rows;
}

inline void print_table(const std::vector<CheckRow>& rows, std::ostream& out) {
  out << "check,value,limit,status\n";
  for (const auto& r : rows) {
    out << r.name << ',' << format_double(r.value) << ',' << format_double(r.limit) << ','
        << (r.pass ? "PASS" : "FAIL");
    if (!r.note.empty()) out << " (" << r.note << ')';
    out << '\n';
  }
}

/// `verify`: exit 0 when every check passes, 2 otherwise, 1 on errors.
inline int verify_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.nx > kMaxGalerkinNx || cfg.ny > kMaxGalerkinNy) {
      err << "error: verify needs a grid of at most " << kMaxGalerkinNx << "x" << kMaxGalerkinNy << " cells\n";
      return 1;
    }
    const auto rows = verification_checks(cfg);
    print_table(rows, out);
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; }) ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace nsch
