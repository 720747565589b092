#pragma once

// Faedo-Galerkin system on discrete eigenbases.
//
// Velocity modes are eigenfields of the strain form with unit viscosity and
// friction restricted to discretely divergence-free fields; phase modes are
// the bulk-surface eigenpairs with α = √β. In the scaled surface variables
// Ψ = ψ/α, Θ = αθ both the phase pair (φ, Ψ) and the chemical pair (μ, Θ)
// live in the span of the same modes, and the coefficient ODE satisfies
//
//   d/dt E(v, φ, αΨ) = -(D_visc + D_fric + D_bulk + D_surf)
//
// exactly; the audit measures how well a Runge-Kutta integrator keeps it.

#include "nsch/bulk_surface.hpp"
#include "nsch/cahn_hilliard.hpp"
#include "nsch/coupler.hpp"
#include "nsch/fields.hpp"
#include "nsch/grid.hpp"
#include "nsch/model.hpp"
#include "nsch/navier_stokes.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nsch {

inline constexpr int kMaxGalerkinModes = 16;
inline constexpr int kMaxGalerkinNx = 32;
inline constexpr int kMaxGalerkinNy = 16;

// Scaled surface variables.
inline WallField to_scaled_phase(const WallField& psi, double alpha) { return (1.0 / alpha) * psi; }
inline WallField from_scaled_phase(const WallField& big_psi, double alpha) { return alpha * big_psi; }
inline WallField to_scaled_potential(const WallField& theta, double alpha) { return alpha * theta; }
inline WallField from_scaled_potential(const WallField& big_theta, double alpha) {
  return (1.0 / alpha) * big_theta;
}

/// Wall trace coefficient of the unit-viscosity, unit-friction slip law.
inline double unit_trace_coefficient(const ChannelGrid& g) {
  const double a = 2.0 / g.hy();
  return a / (a + 1.0);
}

struct StokesBasis {
  std::vector<double> lambda;
  std::vector<FaceVector> fields;
  Eigen::MatrixXd dofs;  // columns: fields in the velocity layout
  double trace_coefficient = 0.0;
};

/// Divergence matrix in the velocity layout (cells x dofs).
inline Eigen::MatrixXd divergence_matrix(const ChannelGrid& g) {
  VelocityLayout lay(g);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(g.cells(), lay.size());
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const int r = g.index(i, j);
      d(r, lay.u(i + 1, j)) += 1.0 / g.hx();
      d(r, lay.u(i, j)) -= 1.0 / g.hx();
      if (j + 1 < g.ny()) d(r, lay.v(i, j + 1)) += 1.0 / g.hy();
      if (j > 0) d(r, lay.v(i, j)) -= 1.0 / g.hy();
    }
  }
  return d;
}

/// The k smallest eigenfields of 2∫Dw:Dv + ∫_Γ w·v = λ∫w·v on discretely
/// divergence-free fields, orthonormal in the face inner product.
inline StokesBasis stokes_eigenfields(int k, const ChannelGrid& g) {
  if (g.nx() > kMaxGalerkinNx || g.ny() > kMaxGalerkinNy)
    throw std::invalid_argument("stokes_eigenfields: grid exceeds 32x16");
  VelocityLayout lay(g);
  const Eigen::MatrixXd div = divergence_matrix(g);
  // Orthonormal null-space basis of the divergence.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ns(div.transpose() * div);
  if (ns.info() != Eigen::Success) throw std::runtime_error("stokes_eigenfields: null-space solve failed");
  const double scale = ns.eigenvalues().cwiseAbs().maxCoeff();
  int nullity = 0;
  while (nullity < lay.size() && ns.eigenvalues()[nullity] <= 1e-10 * scale) ++nullity;
  if (k < 1 || k > nullity) throw std::invalid_argument("stokes_eigenfields: k out of range");
  const Eigen::MatrixXd z = ns.eigenvectors().leftCols(nullity);

  StokesBasis basis;
  basis.trace_coefficient = unit_trace_coefficient(g);
  const Eigen::MatrixXd v =
      Eigen::MatrixXd(viscous_matrix(g, ViscousCoefficients::uniform(g, 1.0, 1.0), basis.trace_coefficient));
  Eigen::MatrixXd reduced = z.transpose() * v * z;
  reduced = 0.5 * (reduced + reduced.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  if (es.info() != Eigen::Success) throw std::runtime_error("stokes_eigenfields: eigensolver failed");
  const double area = g.hx() * g.hy();
  basis.dofs = z * es.eigenvectors().leftCols(k) / std::sqrt(area);
  for (int c = 0; c < k; ++c) {
    basis.lambda.push_back(es.eigenvalues()[c] / area);
    basis.fields.push_back(unpack_velocity(basis.dofs.col(c), g));
  }
  return basis;
}

/// Galerkin coefficient system (Dirichlet coupling).
class GalerkinSystem {
 public:
  GalerkinSystem(int k, const ChannelGrid& g, ModelParams params, ConstitutiveSet consts)
      : grid_(g), params_(std::move(params)), consts_(std::move(consts)) {
    params_.validate();
    if (!std::holds_alternative<Dirichlet>(params_.coupling))
      throw std::invalid_argument("GalerkinSystem: only the Dirichlet coupling is supported");
    if (k < 1 || k > kMaxGalerkinModes) throw std::invalid_argument("GalerkinSystem: k must be in [1, 16]");
    alpha_ = std::sqrt(params_.beta);
    phase_basis_ = bulk_surface_eigenpairs(k, alpha_, g);
    stokes_ = stokes_eigenfields(k, g);
    k_ = k;
  }

  int modes() const { return k_; }
  double alpha() const { return alpha_; }
  const ChannelGrid& grid() const { return grid_; }
  const ModelParams& params() const { return params_; }
  const ConstitutiveSet& consts() const { return consts_; }
  const std::vector<EigenPair>& phase_basis() const { return phase_basis_; }
  const StokesBasis& stokes_basis() const { return stokes_; }

  FaceVector velocity(const Eigen::VectorXd& a) const {
    return unpack_velocity(stokes_.dofs * a, grid_);
  }

  /// (φ, Ψ) = Σ b_j (ζ_j, ξ_j).
  std::pair<BulkField, WallField> phase(const Eigen::VectorXd& b) const { return combine(b); }

  /// Coefficients of (μ, Θ) from the variational derivative of the free energy.
  Eigen::VectorXd chemical(const Eigen::VectorXd& b) const {
    const auto [phi, big_psi] = combine(b);
    return chemical(phi, big_psi);
  }

  /// Projection of (v, φ, ψ) onto the bases.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> project(const FaceVector& v0, const PhasePair& p0) const {
    const ChannelGrid& g = grid_;
    Eigen::VectorXd a(k_), b(k_);
    const WallField big_psi = to_scaled_phase(p0.psi, alpha_);
    for (int j = 0; j < k_; ++j) {
      a[j] = face_inner(v0, stokes_.fields[j], g);
      b[j] = inner(p0.phi, phase_basis_[j].zeta, g) + inner(big_psi, phase_basis_[j].xi, g);
    }
    return {a, b};
  }

  double energy(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const auto [phi, big_psi] = combine(b);
    SimState s;
    s.flow = FlowState::rest(grid_);
    s.flow.vel = velocity(a);
    s.phase = {phi, from_scaled_phase(big_psi, alpha_)};
    return total_energy(s, params_, consts_, grid_).total();
  }

  /// α∫φ + ∫Ψ.
  double scaled_mass(const Eigen::VectorXd& b) const {
    const auto [phi, big_psi] = combine(b);
    return alpha_ * quadrature(phi, grid_) + quadrature(big_psi, grid_);
  }

  struct Rates {
    Eigen::VectorXd da, db;
    double d_visc = 0.0, d_fric = 0.0, d_bulk = 0.0, d_surf = 0.0;
    double dissipation() const { return d_visc + d_fric + d_bulk + d_surf; }
  };

  Rates rhs(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const ChannelGrid& g = grid_;
    const double hx = g.hx(), hy = g.hy(), area = hx * hy;
    const auto [phi, big_psi] = combine(b);
    const Eigen::VectorXd c = chemical(phi, big_psi);
    const auto [mu, big_theta] = combine(c);
    const PhasePair phys{phi, from_scaled_phase(big_psi, alpha_)};

    FlowState flow = FlowState::rest(g);
    const Eigen::VectorXd vdofs = stokes_.dofs * a;
    flow.vel = unpack_velocity(vdofs, g);
    flow.u_wall = wall_trace(flow.vel);

    Rates r;
    // Momentum: -<adv, w> - a_{ν,γ}(v, w) + <μ∇φ, w> - ∫_Γ Ψ ∂_xΘ w_τ.
    const ViscousCoefficients coef = ViscousCoefficients::evaluate(phys, consts_, g);
    const SparseMatrix visc = viscous_matrix(g, coef, stokes_.trace_coefficient);
    const FaceVector forcing = korteweg_force(mu, phi, g) - advection(flow.vel, g);
    Eigen::VectorXd load = area * pack_velocity(forcing) - visc * vdofs;
    VelocityLayout lay(g);
    for (Wall w : kWalls) {
      const int j = g.wall_row(w);
      for (int i = 0; i < g.nx(); ++i) {
        const double stress = -0.5 * (big_psi.at(w, i - 1) + big_psi(w, i)) *
                              (big_theta(w, i) - big_theta.at(w, i - 1)) / hx;
        load[lay.u(i, j)] += stress * stokes_.trace_coefficient * hx;
      }
    }
    r.da = stokes_.dofs.transpose() * load;

    // Phase: -<div(φv), ζ> - <div_Γ(Ψv), ξ> - <m_Ω∇μ, ∇ζ> - <n_Γ∇Θ, ∇ξ>.
    const BulkField conv = convective_divergence_bulk(phi, flow, g);
    const WallField conv_s = convective_divergence_surface(big_psi, flow, g);
    const Mobility mob = mobility(phys);
    const WallField mu_trace = alpha_ * big_theta;
    r.db.resize(k_);
    for (int j = 0; j < k_; ++j) {
      const EigenPair& m = phase_basis_[j];
      r.db[j] = -inner(conv, m.zeta, g) - inner(conv_s, m.xi, g) -
                weighted_gradient(mob, mu, mu_trace, m.zeta, alpha_ * m.xi) -
                weighted_surface_gradient(mob, big_theta, m.xi);
    }
    const ViscousDissipation vd = viscous_dissipation(flow.vel, flow.u_wall, coef, g);
    r.d_visc = vd.viscous;
    r.d_fric = vd.friction;
    r.d_bulk = weighted_gradient(mob, mu, mu_trace, mu, mu_trace);
    r.d_surf = weighted_surface_gradient(mob, big_theta, big_theta);
    return r;
  }

 private:
  struct Mobility {
    MobilityField faces;
    WallField wall;  // m_Ω(ψ) at wall nodes
  };

  Mobility mobility(const PhasePair& phys) const {
    ModelParams p = params_;
    p.coupling = Neumann{};  // conductances unused here
    Mobility m{MobilityField::evaluate(phys, p, consts_, grid_), WallField(grid_)};
    // n_Γ(Ψ) = α⁻² m_Γ(αΨ)
    m.faces.surface_face *= 1.0 / (alpha_ * alpha_);
    for (Wall w : kWalls)
      for (int i = 0; i < grid_.nx(); ++i) m.wall(w, i) = consts_.bulk_mobility(phys.psi(w, i));
    return m;
  }

  /// ∫ m_Ω ∇f·∇h with wall half cells.
  double weighted_gradient(const Mobility& m, const BulkField& f, const WallField& tf,
                           const BulkField& h, const WallField& th) const {
    const ChannelGrid& g = grid_;
    const double hx = g.hx(), hy = g.hy();
    double s = 0.0;
    for (int j = 0; j < g.ny(); ++j) {
      for (int i = 0; i < g.nx(); ++i) {
        s += m.faces.x_face[g.index(i, j)] * (f(i, j) - f.at(i - 1, j)) * (h(i, j) - h.at(i - 1, j)) * hy / hx;
        if (j > 0)
          s += m.faces.y_face[g.index(i, j)] * (f(i, j) - f(i, j - 1)) * (h(i, j) - h(i, j - 1)) * hx / hy;
      }
    }
    for (Wall w : kWalls) {
      const int j = g.wall_row(w);
      for (int i = 0; i < g.nx(); ++i)
        s += m.wall(w, i) * (tf(w, i) - f(i, j)) * (th(w, i) - h(i, j)) * 2.0 * hx / hy;
    }
    return s;
  }

  double weighted_surface_gradient(const Mobility& m, const WallField& f, const WallField& h) const {
    double s = 0.0;
    for (Wall w : kWalls)
      for (int i = 0; i < grid_.nx(); ++i)
        s += m.faces.surface_face(w, i) * (f(w, i) - f.at(w, i - 1)) * (h(w, i) - h.at(w, i - 1));
    return s / grid_.hx();
  }

  WallField wall_trace(const FaceVector& v) const {
    WallField t(grid_);
    for (Wall w : kWalls)
      for (int i = 0; i < grid_.nx(); ++i) t(w, i) = stokes_.trace_coefficient * v.U(i, grid_.wall_row(w));
    return t;
  }

  std::pair<BulkField, WallField> combine(const Eigen::VectorXd& coeffs) const {
    BulkField f(grid_);
    WallField s(grid_);
    for (int j = 0; j < k_; ++j) {
      f.values() += coeffs[j] * phase_basis_[j].zeta.values();
      for (Wall w : kWalls) s.side(w) += coeffs[j] * phase_basis_[j].xi.side(w);
    }
    return {std::move(f), std::move(s)};
  }

  Eigen::VectorXd chemical(const BulkField& phi, const WallField& big_psi) const {
    const ChannelGrid& g = grid_;
    const double eps = params_.eps, delta = params_.delta, kappa = params_.kappa;
    const WallField trace = alpha_ * big_psi;
    BulkField fp(g);
    for (Eigen::Index q = 0; q < phi.size(); ++q) fp.values()[q] = consts_.bulk_potential.first(phi.values()[q]);
    WallField gp(g);
    for (Wall w : kWalls)
      for (int i = 0; i < g.nx(); ++i) gp(w, i) = consts_.surface_potential.first(trace(w, i));
    Eigen::VectorXd c(k_);
    for (int j = 0; j < k_; ++j) {
      const EigenPair& m = phase_basis_[j];
      c[j] = eps * gradient_inner(phi, trace, m.zeta, alpha_ * m.xi, g) + inner(fp, m.zeta, g) / eps +
             delta * kappa * alpha_ * alpha_ * surface_gradient_inner(big_psi, m.xi, g) +
             alpha_ * inner(gp, m.xi, g) / delta;
    }
    return c;
  }

  ChannelGrid grid_;
  ModelParams params_;
  ConstitutiveSet consts_;
  double alpha_ = 1.0;
  int k_ = 0;
  std::vector<EigenPair> phase_basis_;
  StokesBasis stokes_;
};

/// Right-hand side (da/dt, db/dt).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> galerkin_rhs(const Eigen::VectorXd& a,
                                                                const Eigen::VectorXd& b,
                                                                const GalerkinSystem& sys) {
  auto r = sys.rhs(a, b);
  return {std::move(r.da), std::move(r.db)};
}

class IntegratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GalerkinAudit {
  double energy_residual = 0.0;  // max |E(t) + ∫D - E(0)|
  double mass_residual = 0.0;    // max |α∫φ + ∫Ψ - initial|
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double dissipated = 0.0;
  int accepted_steps = 0;
  int rejected_steps = 0;
  std::vector<double> times;
  std::vector<double> energies;
  Eigen::VectorXd a_final, b_final;
};

/// Dormand-Prince 5(4) integration of the coefficient ODE together with the
/// accumulated dissipation; relative and absolute tolerance `tol`.
inline GalerkinAudit integrate_and_audit(const GalerkinSystem& sys, const Eigen::VectorXd& a0,
                                         const Eigen::VectorXd& b0, double t_end, double tol) {
  const int k = sys.modes();
  if (a0.size() != k || b0.size() != k) throw std::invalid_argument("integrate_and_audit: size mismatch");
  if (!(t_end >= 0.0)) throw std::invalid_argument("integrate_and_audit: t_end must be nonnegative");
  const int n = 2 * k + 1;
  auto f = [&](const Eigen::VectorXd& y) {
    auto r = sys.rhs(y.head(k), y.segment(k, k));
    Eigen::VectorXd dy(n);
    dy << r.da, r.db, r.dissipation();
    return dy;
  };
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  GalerkinAudit out;
  Eigen::VectorXd y(n);
  y << a0, b0, 0.0;
  const double mass0 = sys.scaled_mass(b0);
  out.initial_energy = sys.energy(a0, b0);
  out.times.push_back(0.0);
  out.energies.push_back(out.initial_energy);

  double t = 0.0;
  Eigen::VectorXd k1 = f(y);
  double h = std::min(t_end, 1e-4);
  const double h_min = 1e-14 * std::max(1.0, t_end);
  while (t < t_end) {
    h = std::min(h, t_end - t);
    if (h < h_min || !(tol > 0.0)) throw IntegratorError("Galerkin integrator step size collapsed");
    const Eigen::VectorXd k2 = f(y + h * a21 * k1);
    const Eigen::VectorXd k3 = f(y + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Eigen::VectorXd y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = f(y5);
    const Eigen::VectorXd err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const Eigen::ArrayXd sc = tol * (1.0 + y.array().abs().max(y5.array().abs()));
    const double en = std::sqrt((err.array() / sc).square().mean());
    if (!std::isfinite(en)) throw IntegratorError("Galerkin integrator produced a non-finite state");
    if (en <= 1.0) {
      t += h;
      y = y5;
      k1 = k7;
      ++out.accepted_steps;
      const Eigen::VectorXd a = y.head(k), b = y.segment(k, k);
      const double e = sys.energy(a, b);
      out.times.push_back(t);
      out.energies.push_back(e);
      out.energy_residual = std::max(out.energy_residual, std::abs(e + y[n - 1] - out.initial_energy));
      out.mass_residual = std::max(out.mass_residual, std::abs(sys.scaled_mass(b) - mass0));
    } else {
      ++out.rejected_steps;
    }
    const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    h *= factor;
  }
  out.a_final = y.head(k);
  out.b_final = y.segment(k, k);
  out.final_energy = out.energies.back();
  out.dissipated = y[n - 1];
  return out;
}

}  // namespace nsch
