#pragma once

// Time loop (Cahn-Hilliard substep, then Navier-Stokes substep), energy and
// mass diagnostics, and the dissipation audit.

#include "nsch/cahn_hilliard.hpp"
#include "nsch/fields.hpp"
#include "nsch/grid.hpp"
#include "nsch/model.hpp"
#include "nsch/navier_stokes.hpp"
#include "nsch/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nsch {

struct SimState {
  double t = 0.0;
  FlowState flow;
  PhasePair phase;
  ChemPair chem;
};

struct DiagnosticsRecord {
  double t = 0.0;
  double E_kin = 0.0, E_bulk = 0.0, E_surf = 0.0, E_total = 0.0;
  double M_bulk = 0.0, M_surf = 0.0, M_weighted = 0.0;
  double D_visc = 0.0, D_fric = 0.0, D_bulk = 0.0, D_surf = 0.0, D_robin = 0.0;

  double dissipation() const { return D_visc + D_fric + D_bulk + D_surf + D_robin; }
};

struct EnergyParts {
  double kinetic = 0.0, bulk = 0.0, surface = 0.0;
  double total() const { return kinetic + bulk + surface; }
};

inline double free_energy_bulk(const PhasePair& phase, const ModelParams& params,
                               const ConstitutiveSet& consts, const ChannelGrid& g) {
  double pot = 0.0;
  for (Eigen::Index k = 0; k < phase.phi.size(); ++k) pot += consts.bulk_potential.value(phase.phi.values()[k]);
  return 0.5 * params.eps * gradient_norm_sq(phase.phi, phase.psi, g) +
         pot * g.hx() * g.hy() / params.eps;
}

inline double free_energy_surface(const WallField& psi, const ModelParams& params,
                                  const ConstitutiveSet& consts, const ChannelGrid& g) {
  double pot = 0.0;
  for (Wall w : kWalls)
    for (int i = 0; i < g.nx(); ++i) pot += consts.surface_potential.value(psi(w, i));
  return 0.5 * params.delta * params.kappa * surface_gradient_norm_sq(psi, g) +
         pot * g.hx() / params.delta;
}

inline EnergyParts total_energy(const SimState& s, const ModelParams& params,
                                const ConstitutiveSet& consts, const ChannelGrid& g) {
  return {kinetic_energy(s.flow.vel, g), free_energy_bulk(s.phase, params, consts, g),
          free_energy_surface(s.phase.psi, params, consts, g)};
}

/// Energy and mass fields of a record; dissipation fields are left at zero.
inline DiagnosticsRecord energy_record(const SimState& s, const ModelParams& params,
                                       const ConstitutiveSet& consts, const ChannelGrid& g) {
  DiagnosticsRecord r;
  r.t = s.t;
  const EnergyParts e = total_energy(s, params, consts, g);
  r.E_kin = e.kinetic;
  r.E_bulk = e.bulk;
  r.E_surf = e.surface;
  r.E_total = e.total();
  r.M_bulk = quadrature(s.phase.phi, g);
  r.M_surf = quadrature(s.phase.psi, g);
  r.M_weighted = params.beta * r.M_bulk + r.M_surf;
  return r;
}

/// Full record with dissipation rates evaluated from the state (mobility and
/// viscosity at the state's own phase).
inline DiagnosticsRecord diagnose(const SimState& s, const ModelParams& params,
                                  const ConstitutiveSet& consts, const ChannelGrid& g) {
  DiagnosticsRecord r = energy_record(s, params, consts, g);
  const ChemicalDissipation c = chemical_dissipation(s.phase, s.chem, params, consts, g);
  const ViscousDissipation v = viscous_dissipation(
      s.flow.vel, s.flow.u_wall, ViscousCoefficients::evaluate(s.phase, consts, g), g);
  r.D_bulk = c.bulk;
  r.D_surf = c.surf;
  r.D_robin = c.robin;
  r.D_visc = v.viscous;
  r.D_fric = v.friction;
  return r;
}

/// Builds a consistent initial state: chemical potentials assembled from the
/// phase, slip velocity from the slip law.
inline SimState initial_state(PhasePair phase, FaceVector vel, const ModelParams& params,
                              const ConstitutiveSet& consts, const ChannelGrid& g) {
  SimState s;
  s.phase = std::move(phase);
  s.chem = assemble_potentials(s.phase, params, consts, g);
  s.flow = FlowState::rest(g);
  s.flow.vel = std::move(vel);
  for (int i = 0; i < g.nx(); ++i) {
    s.flow.vel.V(i, 0) = 0.0;
    s.flow.vel.V(i, g.ny()) = 0.0;
  }
  const ViscousCoefficients coef = ViscousCoefficients::evaluate(s.phase, consts, g);
  s.flow.u_wall =
      wall_slip_velocity(s.flow.vel, coef, marangoni_stress(s.phase.psi, s.chem.theta, g), g);
  return s;
}

/// Advective time-step limit 0.5 min(hx, hy) / max|v| (infinite at rest).
inline double cfl_limit(const FlowState& flow, const ChannelGrid& g) {
  const double vmax = std::max(flow.vel.max_abs(), flow.u_wall.side(Wall::bottom).cwiseAbs().maxCoeff());
  const double vtop = flow.u_wall.side(Wall::top).cwiseAbs().maxCoeff();
  const double m = std::max(vmax, vtop);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 * std::min(g.hx(), g.hy()) / m;
}

struct StepInfo {
  bool cfl_violated = false;
  double max_divergence = 0.0;
};

struct CouplerOptions {
  NavierStokesOptions flow;
  /// Skip the Navier-Stokes substep (velocity stays frozen).
  bool freeze_flow = false;
};

/// Owns the per-grid solver caches of a simulation.
class Simulation {
 public:
  Simulation(const ChannelGrid& g, ModelParams params, ConstitutiveSet consts,
             CouplerOptions opts = {})
      : grid_(g), params_(std::move(params)), consts_(std::move(consts)), opts_(opts),
        ch_(g), ns_(g, opts.flow) {
    params_.validate();
  }

  const ChannelGrid& grid() const { return grid_; }
  const ModelParams& params() const { return params_; }
  const ConstitutiveSet& consts() const { return consts_; }

  std::pair<SimState, DiagnosticsRecord> advance(const SimState& s, double dt, StepInfo* info = nullptr) {
    StepInfo local;
    local.cfl_violated = dt > cfl_limit(s.flow, grid_);
    ChStepResult ch = ch_.step(s.phase, s.flow, dt, params_, consts_);
    SimState next;
    next.t = s.t + dt;
    next.phase = std::move(ch.phase);
    next.chem = std::move(ch.chem);
    if (opts_.freeze_flow) {
      next.flow = s.flow;
    } else {
      next.flow = ns_.step(s.flow, next.phase, next.chem, dt, consts_);
      local.max_divergence = ns_.last_max_divergence();
    }
    DiagnosticsRecord r = energy_record(next, params_, consts_, grid_);
    r.D_bulk = ch.dissipation.bulk;
    r.D_surf = ch.dissipation.surf;
    r.D_robin = ch.dissipation.robin;
    const ViscousDissipation v = viscous_dissipation(
        next.flow.vel, next.flow.u_wall, ViscousCoefficients::evaluate(next.phase, consts_, grid_), grid_);
    r.D_visc = v.viscous;
    r.D_fric = v.friction;
    if (info) *info = local;
    return {std::move(next), r};
  }

 private:
  ChannelGrid grid_;
  ModelParams params_;
  ConstitutiveSet consts_;
  CouplerOptions opts_;
  CahnHilliardStepper ch_;
  NavierStokesStepper ns_;
};

inline std::pair<SimState, DiagnosticsRecord> advance(const SimState& s, double dt,
                                                      const ModelParams& params,
                                                      const ConstitutiveSet& consts,
                                                      const ChannelGrid& g) {
  return Simulation(g, params, consts).advance(s, dt);
}

struct AuditReport {
  std::vector<double> residuals;  // R_n, n = 0 .. records - 2
  double max_residual = 0.0;      // max R_n
  double max_abs_residual = 0.0;  // max |R_n|
  std::size_t worst_index = 0;    // argmax |R_n|
  double tolerance = 0.0;
  std::vector<std::size_t> flagged;  // indices with R_n > tolerance
  bool ok() const { return flagged.empty(); }
};

/// R_n = E(t_{n+1}) - E(t_n) + dt * D(t_{n+1}).
inline AuditReport dissipation_audit(const std::vector<DiagnosticsRecord>& records, double dt,
                                     double tolerance = std::numeric_limits<double>::infinity()) {
  if (records.size() < 2) throw std::invalid_argument("dissipation_audit needs at least 2 records");
  AuditReport rep;
  rep.tolerance = tolerance;
  rep.max_residual = -std::numeric_limits<double>::infinity();
  rep.residuals.reserve(records.size() - 1);
  for (std::size_t n = 0; n + 1 < records.size(); ++n) {
    const double r = records[n + 1].E_total - records[n].E_total + dt * records[n + 1].dissipation();
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
    if (std::abs(r) > rep.max_abs_residual) {
      rep.max_abs_residual = std::abs(r);
      rep.worst_index = n;
    }
    if (r > tolerance) rep.flagged.push_back(n);
  }
  return rep;
}

// Initial-data presets.

/// Uniform random values in [-amplitude, amplitude): bulk cells in flat
/// order, then bottom wall nodes, then top wall nodes.
inline PhasePair spinodal_phase(std::uint64_t seed, double amplitude, const ChannelGrid& g) {
  Lcg64 rng(seed);
  PhasePair p = PhasePair::constant(g, 0.0);
  for (Eigen::Index k = 0; k < p.phi.size(); ++k) p.phi.values()[k] = rng.symmetric(amplitude);
  for (Wall w : kWalls)
    for (int i = 0; i < g.nx(); ++i) p.psi(w, i) = rng.symmetric(amplitude);
  return p;
}

/// Horizontal band of phase +1 centered at y0 with the given width in a
/// phase -1 background; diffuse profile tanh(d / (√2 ε)), d = width/2 - |y - y0|.
inline PhasePair stripe_phase(double y0, double width, double eps, const ChannelGrid& g) {
  auto f = [&](double, double y) { return std::tanh((0.5 * width - std::abs(y - y0)) / (std::sqrt(2.0) * eps)); };
  return {BulkField::sample(g, f), WallField::sample(g, f)};
}

}  // namespace nsch
