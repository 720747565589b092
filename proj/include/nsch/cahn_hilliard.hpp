#pragma once

// Convective Cahn-Hilliard system with a surface Cahn-Hilliard equation on
// both walls, coupled through the transfer flux J = m_Ω ∂_nμ:
//
//   ∂tφ + div(φv)     = div(m_Ω ∇μ),       μ = -εΔφ + F'(φ)/ε
//   ∂tψ + div_Γ(ψv_τ) = div_Γ(m_Γ ∇_Γθ) - βJ,
//   θ = -δκΔ_Γψ + G'(ψ)/δ + ε∂_nφ,         φ|Γ = ψ,
//
// with L J = βθ - μ|Γ (L = 0: μ|Γ = βθ; L = ∞: J = 0).
//
// The wall-adjacent cell receives the transfer through its wall face and the
// wall loses β times the same amount, so β∫φ + ∫ψ is conserved to rounding.

#include "nsch/bulk_surface.hpp"
#include "nsch/fields.hpp"
#include "nsch/grid.hpp"
#include "nsch/linalg.hpp"
#include "nsch/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <variant>

namespace nsch {

namespace detail {

inline double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

/// Wall transfer conductance: J = c (βθ - μ_adjacent).
inline double transfer_conductance(const Coupling& coupling, double wall_mobility, double hy) {
  if (std::holds_alternative<Neumann>(coupling)) return 0.0;
  const double length = std::holds_alternative<Robin>(coupling) ? std::get<Robin>(coupling).length : 0.0;
  return 1.0 / (hy / (2.0 * wall_mobility) + length);
}

inline double robin_length(const Coupling& coupling) {
  if (const auto* r = std::get_if<Robin>(&coupling)) return r->length;
  return 0.0;
}

}  // namespace detail

/// μ = -εΔφ + F'(φ)/ε and θ = -δκΔ_Γψ + G'(ψ)/δ + ε∂_nφ with trace φ|Γ = ψ.
/// The wall value μ|Γ follows from the coupling closure with m_Ω(ψ).
inline ChemPair assemble_potentials(const PhasePair& phase, const ModelParams& params,
                                    const ConstitutiveSet& consts, const ChannelGrid& g) {
  detail::check_shapes(phase.phi, phase.psi, g);
  ChemPair c;
  c.mu = -params.eps * bulk_laplacian(phase.phi, phase.psi, g);
  for (Eigen::Index k = 0; k < c.mu.size(); ++k)
    c.mu.values()[k] += consts.bulk_potential.first(phase.phi.values()[k]) / params.eps;
  c.theta = params.eps * wall_flux(phase.phi, phase.psi, g);
  if (params.kappa != 0.0) c.theta -= params.delta * params.kappa * surface_laplacian(phase.psi, g);
  for (Wall w : kWalls)
    for (int i = 0; i < g.nx(); ++i)
      c.theta(w, i) += consts.surface_potential.first(phase.psi(w, i)) / params.delta;
  c.mu_wall = WallField(g);
  const double length = detail::robin_length(params.coupling);
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < g.nx(); ++i) {
      const double cond = detail::transfer_conductance(params.coupling,
                                                       consts.bulk_mobility(phase.psi(w, i)), g.hy());
      const double drive = params.beta * c.theta(w, i);
      if (std::holds_alternative<Neumann>(params.coupling))
        c.mu_wall(w, i) = c.mu(i, j);
      else
        c.mu_wall(w, i) = drive - length * cond * (drive - c.mu(i, j));
    }
  }
  return c;
}

/// div(φv) in conservative flux form with centered face values of φ.
inline BulkField convective_divergence_bulk(const BulkField& phi, const FlowState& flow,
                                            const ChannelGrid& g) {
  detail::require(phi.matches(g), "convective_divergence_bulk: shape mismatch");
  const FaceVector& f = flow.vel;
  BulkField out(g);
  const int nx = g.nx(), ny = g.ny();
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double east = 0.5 * (phi(i, j) + phi.at(i + 1, j)) * f.U(i + 1, j);
      const double west = 0.5 * (phi.at(i - 1, j) + phi(i, j)) * f.U(i, j);
      const double north = j + 1 < ny ? 0.5 * (phi(i, j) + phi(i, j + 1)) * f.V(i, j + 1) : 0.0;
      const double south = j > 0 ? 0.5 * (phi(i, j - 1) + phi(i, j)) * f.V(i, j) : 0.0;
      out(i, j) = (east - west) / g.hx() + (north - south) / g.hy();
    }
  }
  return out;
}

/// div_Γ(ψ v_τ) with v_τ the slip velocity stored at the face positions x = i hx.
inline WallField convective_divergence_surface(const WallField& psi, const FlowState& flow,
                                               const ChannelGrid& g) {
  detail::require(psi.matches(g) && flow.u_wall.matches(g),
                  "convective_divergence_surface: shape mismatch");
  WallField out(g);
  for (Wall w : kWalls) {
    for (int i = 0; i < g.nx(); ++i) {
      const double east = 0.5 * (psi(w, i) + psi.at(w, i + 1)) * flow.u_wall.at(w, i + 1);
      const double west = 0.5 * (psi.at(w, i - 1) + psi(w, i)) * flow.u_wall(w, i);
      out(w, i) = (east - west) / g.hx();
    }
  }
  return out;
}

/// Diffusive dissipation rates of one chemical state.
struct ChemicalDissipation {
  double bulk = 0.0;   // ∫ m_Ω |∇μ|², including the wall half cells
  double surf = 0.0;   // ∫_Γ m_Γ |∇_Γθ|²
  double robin = 0.0;  // h(L) ∫_Γ (βθ - μ|Γ)²
};

/// Mobilities frozen for one step.
struct MobilityField {
  Eigen::VectorXd x_face;  // bulk x-faces: face (i, j) between cells i-1 and i
  Eigen::VectorXd y_face;  // interior bulk y-faces: face (i, j) between rows j-1 and j, j >= 1
  WallField surface_face;  // m_Γ between wall nodes i-1 and i
  WallField transfer;      // conductance c of J = c (βθ - μ_adjacent)

  static MobilityField evaluate(const PhasePair& phase, const ModelParams& params,
                                const ConstitutiveSet& consts, const ChannelGrid& g) {
    const int nx = g.nx(), ny = g.ny();
    Eigen::VectorXd cell(g.cells());
    for (int k = 0; k < g.cells(); ++k) cell[k] = consts.bulk_mobility(phase.phi.values()[k]);
    MobilityField m;
    m.x_face.resize(g.cells());
    m.y_face.resize(Eigen::Index(nx) * ny);
    m.y_face.setZero();
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        m.x_face[g.index(i, j)] = detail::harmonic_mean(cell[g.index(i - 1, j)], cell[g.index(i, j)]);
    for (int j = 1; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        m.y_face[g.index(i, j)] = detail::harmonic_mean(cell[g.index(i, j - 1)], cell[g.index(i, j)]);
    m.surface_face = WallField(g);
    m.transfer = WallField(g);
    for (Wall w : kWalls) {
      for (int i = 0; i < nx; ++i) {
        m.surface_face(w, i) = detail::harmonic_mean(consts.surface_mobility(phase.psi.at(w, i - 1)),
                                                     consts.surface_mobility(phase.psi(w, i)));
        m.transfer(w, i) = detail::transfer_conductance(
            params.coupling, consts.bulk_mobility(phase.psi(w, i)), g.hy());
      }
    }
    return m;
  }
};

/// Transfer flux J (outward m_Ω ∂_nμ) for the given chemical state.
inline WallField transfer_flux(const ChemPair& chem, const MobilityField& mob, const ModelParams& params,
                               const ChannelGrid& g) {
  WallField j_flux(g);
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < g.nx(); ++i)
      j_flux(w, i) = mob.transfer(w, i) * (params.beta * chem.theta(w, i) - chem.mu(i, j));
  }
  return j_flux;
}

inline ChemicalDissipation chemical_dissipation(const ChemPair& chem, const MobilityField& mob,
                                                const ModelParams& params, const ChannelGrid& g) {
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy();
  ChemicalDissipation d;
  const BulkField& mu = chem.mu;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double dx = mu(i, j) - mu.at(i - 1, j);
      d.bulk += mob.x_face[g.index(i, j)] * dx * dx * hy / hx;
      if (j > 0) {
        const double dy = mu(i, j) - mu(i, j - 1);
        d.bulk += mob.y_face[g.index(i, j)] * dy * dy * hx / hy;
      }
    }
  }
  const WallField flux = transfer_flux(chem, mob, params, g);
  const double length = detail::robin_length(params.coupling);
  for (Wall w : kWalls) {
    for (int i = 0; i < nx; ++i) {
      const double dth = chem.theta(w, i) - chem.theta.at(w, i - 1);
      d.surf += mob.surface_face(w, i) * dth * dth / hx;
      const double jf = flux(w, i);
      if (mob.transfer(w, i) > 0.0) {
        // Half-cell part of ∫ m_Ω |∇μ|² between the wall and the first cell center.
        d.bulk += jf * jf * (1.0 / mob.transfer(w, i) - length) * hx;
        d.robin += length * jf * jf * hx;
      }
    }
  }
  return d;
}

inline ChemicalDissipation chemical_dissipation(const PhasePair& phase, const ChemPair& chem,
                                                const ModelParams& params,
                                                const ConstitutiveSet& consts, const ChannelGrid& g) {
  return chemical_dissipation(chem, MobilityField::evaluate(phase, params, consts, g), params, g);
}

struct ChStepResult {
  PhasePair phase;
  ChemPair chem;
  /// Dissipation of the new chemical state with the mobilities of the step.
  ChemicalDissipation dissipation;
};

/// Linearly stabilized semi-implicit step. One sparse solve for the unknowns
/// (δφ, δψ, μ, θ) with δ the phase increment, so a stationary state has an
/// exactly zero right-hand side. The factorization is reused while the matrix
/// is unchanged.
class CahnHilliardStepper {
 public:
  explicit CahnHilliardStepper(const ChannelGrid& g) : grid_(g) {}

  ChStepResult step(const PhasePair& phase, const FlowState& flow, double dt,
                    const ModelParams& params, const ConstitutiveSet& consts) {
    const ChannelGrid& g = grid_;
    if (!(dt > 0.0)) throw std::invalid_argument("ch_step: dt must be positive");
    detail::check_shapes(phase.phi, phase.psi, g);
    const int nx = g.nx(), ny = g.ny(), n = g.cells();
    const double hx = g.hx(), hy = g.hy();
    const double eps = params.eps, delta = params.delta, beta = params.beta, s = params.stabilization;
    PairLayout lay(g);
    const int pair = lay.size();
    const MobilityField mob = MobilityField::evaluate(phase, params, consts, g);

    Triplets t;
    t.reserve(static_cast<std::size_t>(pair) * 20);
    // Rows [0, pair): mass balances for (φ, ψ). Rows [pair, 2 pair): (μ, θ).
    const int mu0 = pair;
    auto psi_col = [&](Wall w, int i) { return lay.wall(w, i); };
    auto mu_col = [&](int i, int j) { return mu0 + lay.bulk(i, j); };
    auto theta_col = [&](Wall w, int i) { return mu0 + lay.wall(w, i); };

    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int r = lay.bulk(i, j);
        t.emplace_back(r, r, 1.0 / dt);
        auto couple = [&](int nb, double coeff) {
          t.emplace_back(r, mu_col(i, j), coeff);
          t.emplace_back(r, nb, -coeff);
        };
        couple(mu_col(i - 1, j), mob.x_face[g.index(i, j)] / (hx * hx));
        couple(mu_col(i + 1, j), mob.x_face[g.index(i + 1, j)] / (hx * hx));
        if (j > 0) couple(mu_col(i, j - 1), mob.y_face[g.index(i, j)] / (hy * hy));
        if (j + 1 < ny) couple(mu_col(i, j + 1), mob.y_face[g.index(i, j + 1)] / (hy * hy));
        for (Wall w : kWalls) {
          if (j != g.wall_row(w)) continue;
          const double c = mob.transfer(w, i) / hy;
          if (c == 0.0) continue;
          // -J / hy with J = c (βθ - μ).
          t.emplace_back(r, theta_col(w, i), -c * beta);
          t.emplace_back(r, mu_col(i, j), c);
        }
      }
    }
    for (Wall w : kWalls) {
      const int j = g.wall_row(w);
      for (int i = 0; i < nx; ++i) {
        const int r = lay.wall(w, i);
        t.emplace_back(r, r, 1.0 / dt);
        const double west = mob.surface_face(w, i) / (hx * hx);
        const double east = mob.surface_face.at(w, i + 1) / (hx * hx);
        t.emplace_back(r, theta_col(w, i), west + east);
        t.emplace_back(r, theta_col(w, i - 1), -west);
        t.emplace_back(r, theta_col(w, i + 1), -east);
        const double c = mob.transfer(w, i);
        if (c != 0.0) {
          // +βJ
          t.emplace_back(r, theta_col(w, i), beta * c * beta);
          t.emplace_back(r, mu_col(i, j), -beta * c);
        }
      }
    }
    // (μ, θ) - ε A_{δκ/ε, 1}(δφ, δψ) - S (δφ/ε, δψ/δ) = (F'(φⁿ)/ε, G'(ψⁿ)/δ) + ε A_{δκ/ε, 1}(φⁿ, ψⁿ)
    for (int r = 0; r < pair; ++r) t.emplace_back(mu0 + r, mu0 + r, 1.0);
    append_coupled_operator(t, g, delta * params.kappa / eps, 1.0, -eps, mu0, 0);
    for (int k = 0; k < n; ++k) t.emplace_back(mu0 + k, k, -s / eps);
    for (Wall w : kWalls)
      for (int i = 0; i < nx; ++i) t.emplace_back(mu0 + lay.wall(w, i), psi_col(w, i), -s / delta);

    SparseMatrix a(2 * pair, 2 * pair);
    a.setFromTriplets(t.begin(), t.end());
    lu_.prepare(std::move(a));

    Eigen::VectorXd rhs(2 * pair);
    const BulkField conv = convective_divergence_bulk(phase.phi, flow, g);
    const WallField conv_s = convective_divergence_surface(phase.psi, flow, g);
    const auto [op_bulk, op_wall] = apply_coupled_operator(phase.phi, phase.psi, delta * params.kappa / eps, 1.0, g);
    for (int k = 0; k < n; ++k) {
      rhs[k] = -conv.values()[k];
      rhs[mu0 + k] = consts.bulk_potential.first(phase.phi.values()[k]) / eps + eps * op_bulk.values()[k];
    }
    for (Wall w : kWalls) {
      for (int i = 0; i < nx; ++i) {
        rhs[lay.wall(w, i)] = -conv_s(w, i);
        rhs[mu0 + lay.wall(w, i)] = consts.surface_potential.first(phase.psi(w, i)) / delta + eps * op_wall(w, i);
      }
    }
    const Eigen::VectorXd x = lu_.solve(rhs, 1e-10, "Cahn-Hilliard solve");

    ChStepResult out;
    const auto [dphi, dpsi] = unpack(x.head(pair), g);
    out.phase = {phase.phi + dphi, phase.psi + dpsi};
    std::tie(out.chem.mu, out.chem.theta) = unpack(x.tail(pair), g);
    const WallField flux = transfer_flux(out.chem, mob, params, g);
    out.chem.mu_wall = WallField(g);
    const double length = detail::robin_length(params.coupling);
    for (Wall w : kWalls) {
      const int j = g.wall_row(w);
      for (int i = 0; i < nx; ++i) {
        out.chem.mu_wall(w, i) = std::holds_alternative<Neumann>(params.coupling)
                                     ? out.chem.mu(i, j)
                                     : beta * out.chem.theta(w, i) - length * flux(w, i);
      }
    }
    out.dissipation = chemical_dissipation(out.chem, mob, params, g);
    return out;
  }

 private:
  ChannelGrid grid_;
  CachedLU lu_;
};

inline ChStepResult ch_step(const PhasePair& phase, const FlowState& flow, double dt,
                            const ModelParams& params, const ConstitutiveSet& consts,
                            const ChannelGrid& g) {
  return CahnHilliardStepper(g).step(phase, flow, dt, params, consts);
}

}  // namespace nsch
