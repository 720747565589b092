#pragma once

// Incremental-projection Navier-Stokes on the staggered channel grid.
//
// Viscous stresses come from a strain-rate quadratic form: cell-centered
// normal strains, corner shear strains, and a wall closure in which the
// tangential wall velocity u_w solves the Navier-slip law with the surface
// Marangoni stress s = -ψ ∂_xθ as inhomogeneity:
//
//   2 ν_w (u_w - u_0) / hy + γ_w u_w = s.
//
// The viscous operator is exactly -M^{-1} V with V the Gram matrix of that
// form, so discrete kinetic-energy budgets close.

#include "nsch/fields.hpp"
#include "nsch/grid.hpp"
#include "nsch/linalg.hpp"
#include "nsch/model.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nsch {

/// Unknown layout for velocity systems: all u faces, then interior v faces.
struct VelocityLayout {
  int nx, ny;
  explicit VelocityLayout(const ChannelGrid& g) : nx(g.nx()), ny(g.ny()) {}
  int u(int i, int j) const { return ((i % nx) + nx) % nx + nx * j; }
  /// Interior v face, 1 <= j <= ny - 1.
  int v(int i, int j) const { return nx * ny + ((i % nx) + nx) % nx + nx * (j - 1); }
  int size() const { return nx * ny + nx * (ny - 1); }
};

inline Eigen::VectorXd pack_velocity(const FaceVector& f) {
  const Eigen::Index nu = f.u.size(), nv = Eigen::Index(f.nx) * (f.ny - 1);
  Eigen::VectorXd x(nu + nv);
  x.head(nu) = f.u;
  x.tail(nv) = f.v.segment(f.nx, nv);
  return x;
}

inline FaceVector unpack_velocity(const Eigen::VectorXd& x, const ChannelGrid& g) {
  FaceVector f(g);
  const Eigen::Index nu = f.u.size(), nv = Eigen::Index(g.nx()) * (g.ny() - 1);
  f.u = x.head(nu);
  f.v.segment(g.nx(), nv) = x.tail(nv);
  return f;
}

inline BulkField divergence(const FaceVector& f, const ChannelGrid& g) {
  BulkField d(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      d(i, j) = (f.U(i + 1, j) - f.U(i, j)) / g.hx() + (f.V(i, j + 1) - f.V(i, j)) / g.hy();
  return d;
}

inline double max_divergence(const FaceVector& f, const ChannelGrid& g) {
  return divergence(f, g).values().cwiseAbs().maxCoeff();
}

/// Face gradient of a cell-centered scalar; zero on the wall v faces.
inline FaceVector gradient(const BulkField& q, const ChannelGrid& g) {
  FaceVector f(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) f.U(i, j) = (q(i, j) - q.at(i - 1, j)) / g.hx();
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) f.V(i, j) = (q(i, j) - q(i, j - 1)) / g.hy();
  return f;
}

inline double face_inner(const FaceVector& a, const FaceVector& b, const ChannelGrid& g) {
  return (a.u.dot(b.u) + a.v.dot(b.v)) * g.hx() * g.hy();
}

inline double kinetic_energy(const FaceVector& f, const ChannelGrid& g) {
  return 0.5 * face_inner(f, f, g);
}

/// Korteweg force μ∇φ at the velocity faces.
inline FaceVector korteweg_force(const BulkField& mu, const BulkField& phi, const ChannelGrid& g) {
  detail::require(mu.matches(g) && phi.matches(g), "korteweg_force: shape mismatch");
  FaceVector f(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      f.U(i, j) = 0.5 * (mu.at(i - 1, j) + mu(i, j)) * (phi(i, j) - phi.at(i - 1, j)) / g.hx();
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i)
      f.V(i, j) = 0.5 * (mu(i, j - 1) + mu(i, j)) * (phi(i, j) - phi(i, j - 1)) / g.hy();
  return f;
}

/// Divergence-form advection div(v ⊗ v) with centered interpolants. Its
/// pairing with any discretely divergence-free field vanishes.
inline FaceVector advection(const FaceVector& f, const ChannelGrid& g) {
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy();
  FaceVector n(g);
  auto uc = [&](int i, int j) { return 0.5 * (f.U(i, j) + f.U(i + 1, j)); };
  auto vc = [&](int i, int j) { return 0.5 * (f.V(i, j) + f.V(i, j + 1)); };
  // Corner (i, j) sits at (i hx, j hy).
  auto v_at_corner = [&](int i, int j) { return 0.5 * (f.V(i - 1, j) + f.V(i, j)); };
  auto u_at_corner = [&](int i, int j) {
    if (j == 0 || j == ny) return 0.0;  // multiplied by a zero wall flux
    return 0.5 * (f.U(i, j - 1) + f.U(i, j));
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double xflux = uc(i, j) * uc(i, j) - uc(i - 1, j) * uc(i - 1, j);
      const double yflux = v_at_corner(i, j + 1) * u_at_corner(i, j + 1) -
                           v_at_corner(i, j) * u_at_corner(i, j);
      n.U(i, j) = xflux / hx + yflux / hy;
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double xflux = u_at_corner(i + 1, j) * v_at_corner(i + 1, j) -
                           u_at_corner(i, j) * v_at_corner(i, j);
      const double yflux = vc(i, j) * vc(i, j) - vc(i, j - 1) * vc(i, j - 1);
      n.V(i, j) = xflux / hx + yflux / hy;
    }
  }
  return n;
}

/// Viscosity and friction sampled where the strain form needs them.
struct ViscousCoefficients {
  BulkField cell_nu;         // ν(φ) at cell centers
  Eigen::VectorXd wall_nu[2];     // ν(ψ) at wall u-face positions
  Eigen::VectorXd wall_gamma[2];  // γ(ψ) at wall u-face positions

  double corner_nu(int i, int j) const {
    return 0.25 * (cell_nu.at(i - 1, j - 1) + cell_nu.at(i, j - 1) + cell_nu.at(i - 1, j) +
                   cell_nu.at(i, j));
  }
  double nu_w(Wall w, int i) const { return wall_nu[static_cast<int>(w)][i]; }
  double gamma_w(Wall w, int i) const { return wall_gamma[static_cast<int>(w)][i]; }

  /// u_w = c u_0 + d s solves the slip law; returns (c, d).
  std::pair<double, double> slip_coefficients(Wall w, int i, double hy) const {
    const double a = 2.0 * nu_w(w, i) / hy;
    const double den = a + gamma_w(w, i);
    return {a / den, 1.0 / den};
  }

  static ViscousCoefficients evaluate(const PhasePair& phase, const ConstitutiveSet& consts,
                                      const ChannelGrid& g) {
    ViscousCoefficients c;
    c.cell_nu = BulkField(g);
    for (Eigen::Index k = 0; k < c.cell_nu.size(); ++k)
      c.cell_nu.values()[k] = consts.viscosity(phase.phi.values()[k]);
    for (Wall w : kWalls) {
      auto& nu = c.wall_nu[static_cast<int>(w)];
      auto& ga = c.wall_gamma[static_cast<int>(w)];
      nu.resize(g.nx());
      ga.resize(g.nx());
      for (int i = 0; i < g.nx(); ++i) {
        const double a = phase.psi.at(w, i - 1), b = phase.psi(w, i);
        nu[i] = 0.5 * (consts.viscosity(a) + consts.viscosity(b));
        ga[i] = 0.5 * (consts.friction(a) + consts.friction(b));
      }
    }
    return c;
  }

  static ViscousCoefficients uniform(const ChannelGrid& g, double nu, double gamma) {
    ViscousCoefficients c;
    c.cell_nu = BulkField(g, nu);
    for (Wall w : kWalls) {
      c.wall_nu[static_cast<int>(w)] = Eigen::VectorXd::Constant(g.nx(), nu);
      c.wall_gamma[static_cast<int>(w)] = Eigen::VectorXd::Constant(g.nx(), gamma);
    }
    return c;
  }
};

/// Gram matrix V of the strain form in the velocity layout:
///   uᵀ V u = Σ 2ν (e_xx² + e_yy²) hx hy + Σ ν e_xy² hx hy
///          + Σ_wall [2ν_w (u_0 - u_w)² / hy + γ_w u_w²] hx,
/// with u_w = c u_0. When `trace_coefficient` is empty c is the homogeneous
/// slip-law value, which minimizes the wall term.
inline SparseMatrix viscous_matrix(const ChannelGrid& g, const ViscousCoefficients& coef,
                                   std::optional<double> trace_coefficient = {}) {
  VelocityLayout lay(g);
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy(), area = hx * hy;
  Triplets t;
  t.reserve(static_cast<std::size_t>(lay.size()) * 16);
  // Adds weight * (Σ a_k x_k)² to the form.
  auto add_square = [&](const int* idx, const double* c, int n, double weight) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) t.emplace_back(idx[a], idx[b], weight * c[a] * c[b]);
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double w = 2.0 * coef.cell_nu(i, j) * area;
      {
        const int idx[2] = {lay.u(i + 1, j), lay.u(i, j)};
        const double c[2] = {1.0 / hx, -1.0 / hx};
        add_square(idx, c, 2, w);
      }
      // e_yy; wall v faces are fixed at zero.
      int idx[2];
      double c[2];
      int n = 0;
      if (j + 1 < ny) { idx[n] = lay.v(i, j + 1); c[n++] = 1.0 / hy; }
      if (j > 0) { idx[n] = lay.v(i, j); c[n++] = -1.0 / hy; }
      add_square(idx, c, n, w);
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int idx[4] = {lay.u(i, j), lay.u(i, j - 1), lay.v(i, j), lay.v(i - 1, j)};
      const double c[4] = {1.0 / hy, -1.0 / hy, 1.0 / hx, -1.0 / hx};
      add_square(idx, c, 4, coef.corner_nu(i, j) * area);
    }
  }
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < nx; ++i) {
      const double nu = coef.nu_w(w, i), ga = coef.gamma_w(w, i);
      const double c = trace_coefficient ? *trace_coefficient : coef.slip_coefficients(w, i, hy).first;
      const double diag = (2.0 * nu * (1.0 - c) * (1.0 - c) / hy + ga * c * c) * hx;
      t.emplace_back(lay.u(i, j), lay.u(i, j), diag);
    }
  }
  SparseMatrix v(lay.size(), lay.size());
  v.setFromTriplets(t.begin(), t.end());
  return v;
}

/// Marangoni stress s = -ψ ∂_xθ at the wall u-face positions.
inline WallField marangoni_stress(const WallField& psi, const WallField& theta, const ChannelGrid& g) {
  WallField s(g);
  for (Wall w : kWalls)
    for (int i = 0; i < g.nx(); ++i)
      s(w, i) = -0.5 * (psi.at(w, i - 1) + psi(w, i)) * (theta(w, i) - theta.at(w, i - 1)) / g.hx();
  return s;
}

/// Tangential wall velocity from the slip law for the given interior velocity.
inline WallField wall_slip_velocity(const FaceVector& f, const ViscousCoefficients& coef,
                                    const WallField& stress, const ChannelGrid& g) {
  WallField uw(g);
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < g.nx(); ++i) {
      const auto [c, d] = coef.slip_coefficients(w, i, g.hy());
      uw(w, i) = c * f.U(i, j) + d * stress(w, i);
    }
  }
  return uw;
}

struct ViscousDissipation {
  double viscous = 0.0;   // ∫ 2ν|Dv|²
  double friction = 0.0;  // ∫_Γ γ|v|²
};

inline ViscousDissipation viscous_dissipation(const FaceVector& f, const WallField& u_wall,
                                              const ViscousCoefficients& coef, const ChannelGrid& g) {
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy(), area = hx * hy;
  ViscousDissipation d;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double exx = (f.U(i + 1, j) - f.U(i, j)) / hx;
      const double eyy = (f.V(i, j + 1) - f.V(i, j)) / hy;
      d.viscous += 2.0 * coef.cell_nu(i, j) * (exx * exx + eyy * eyy) * area;
    }
  }
  for (int j = 1; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double exy = (f.U(i, j) - f.U(i, j - 1)) / hy + (f.V(i, j) - f.V(i - 1, j)) / hx;
      d.viscous += coef.corner_nu(i, j) * exy * exy * area;
    }
  }
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < nx; ++i) {
      const double slip = f.U(i, j) - u_wall(w, i);
      d.viscous += 2.0 * coef.nu_w(w, i) * slip * slip / hy * hx;
      d.friction += coef.gamma_w(w, i) * u_wall(w, i) * u_wall(w, i) * hx;
    }
  }
  return d;
}

struct ProjectionResult {
  FaceVector vel;
  BulkField p;  // vel = u_star - ∇p, zero mean
};

/// Pressure Poisson solver (periodic in x, homogeneous Neumann at the walls).
class ProjectionSolver {
 public:
  explicit ProjectionSolver(const ChannelGrid& g) : grid_(g) {
    const int nx = g.nx(), ny = g.ny(), n = g.cells();
    const double ihx2 = 1.0 / (g.hx() * g.hx()), ihy2 = 1.0 / (g.hy() * g.hy());
    Triplets t;
    t.reserve(static_cast<std::size_t>(n) * 5);
    // -L with cell 0 pinned to zero; symmetric positive definite.
    auto add = [&](int r, int c, double v) {
      if (r == 0 || c == 0) return;
      t.emplace_back(r, c, v);
    };
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int r = g.index(i, j);
        add(r, r, 2.0 * ihx2);
        add(r, g.index(i - 1, j), -ihx2);
        add(r, g.index(i + 1, j), -ihx2);
        if (j > 0) { add(r, r, ihy2); add(r, g.index(i, j - 1), -ihy2); }
        if (j < ny - 1) { add(r, r, ihy2); add(r, g.index(i, j + 1), -ihy2); }
      }
    }
    t.emplace_back(0, 0, 1.0);
    matrix_.resize(n, n);
    matrix_.setFromTriplets(t.begin(), t.end());
    anorm_ = matrix_.norm();
    ldlt_.compute(matrix_);
    if (ldlt_.info() != Eigen::Success) throw SolverError("pressure Poisson factorization failed", 1.0);
  }

  ProjectionResult project(const FaceVector& u_star) const {
    const ChannelGrid& g = grid_;
    for (int i = 0; i < g.nx(); ++i) {
      if (u_star.V(i, 0) != 0.0 || u_star.V(i, g.ny()) != 0.0)
        throw std::invalid_argument("project: wall-normal velocity must vanish at the walls");
    }
    Eigen::VectorXd rhs = -divergence(u_star, g).values();
    rhs[0] = 0.0;
    Eigen::VectorXd q = ldlt_.solve(rhs);
    const double r = relative_residual(matrix_, q, rhs, anorm_);
    if (!(r <= 1e-10)) throw SolverError("pressure Poisson solve did not converge", r);
    q.array() -= q.mean();
    BulkField p(g);
    p.values() = q;
    FaceVector vel = u_star - gradient(p, g);
    return {std::move(vel), std::move(p)};
  }

 private:
  ChannelGrid grid_;
  SparseMatrix matrix_;
  double anorm_ = 0.0;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

inline ProjectionResult project(const FaceVector& u_star, const ChannelGrid& g) {
  return ProjectionSolver(g).project(u_star);
}

struct NavierStokesOptions {
  /// Uniform x-acceleration (pressure-gradient drive).
  double body_force_x = 0.0;
  bool advection = true;
};

/// One Navier-Stokes step: second-order extrapolated advection, implicit
/// viscosity with coefficients frozen from the supplied phase, explicit
/// Korteweg and Marangoni forcing, incremental projection.
class NavierStokesStepper {
 public:
  explicit NavierStokesStepper(const ChannelGrid& g, NavierStokesOptions opts = {})
      : grid_(g), opts_(opts), projection_(g) {}

  FlowState step(const FlowState& flow, const PhasePair& phase, const ChemPair& chem, double dt,
                 const ConstitutiveSet& consts) {
    const ChannelGrid& g = grid_;
    if (!(dt > 0.0)) throw std::invalid_argument("ns_step: dt must be positive");
    VelocityLayout lay(g);
    const ViscousCoefficients coef = ViscousCoefficients::evaluate(phase, consts, g);
    const WallField stress = marangoni_stress(phase.psi, chem.theta, g);

    FaceVector adv_now = opts_.advection ? advection(flow.vel, g) : FaceVector(g);
    FaceVector adv = adv_now;
    if (opts_.advection && flow.advection_prev) adv = 1.5 * adv_now - 0.5 * *flow.advection_prev;

    FaceVector force = korteweg_force(chem.mu, phase.phi, g) - gradient(flow.p, g) - adv;
    if (opts_.body_force_x != 0.0) force.u.array() += opts_.body_force_x;

    const double area = g.hx() * g.hy();
    SparseMatrix a = viscous_matrix(g, coef);
    for (int r = 0; r < lay.size(); ++r) a.coeffRef(r, r) += area / dt;
    lu_.prepare(std::move(a));

    Eigen::VectorXd rhs = area * (pack_velocity(flow.vel) / dt + pack_velocity(force));
    for (Wall w : kWalls) {
      const int j = g.wall_row(w);
      for (int i = 0; i < g.nx(); ++i) {
        const double c = coef.slip_coefficients(w, i, g.hy()).first;
        rhs[lay.u(i, j)] += c * stress(w, i) * g.hx();
      }
    }
    const FaceVector u_star = unpack_velocity(lu_.solve(rhs, 1e-10, "momentum solve"), g);

    ProjectionResult pr = projection_.project(u_star);
    FlowState next;
    next.vel = std::move(pr.vel);
    next.p = flow.p;
    next.p.values() += pr.p.values() / dt;
    next.p.values().array() -= next.p.values().mean();
    next.u_wall = wall_slip_velocity(next.vel, coef, stress, g);
    if (opts_.advection) next.advection_prev = std::move(adv_now);
    last_max_divergence_ = max_divergence(next.vel, g);
    return next;
  }

  double last_max_divergence() const { return last_max_divergence_; }
  const ProjectionSolver& projection() const { return projection_; }

 private:
  ChannelGrid grid_;
  NavierStokesOptions opts_;
  ProjectionSolver projection_;
  CachedLU lu_;
  double last_max_divergence_ = 0.0;
};

inline FlowState ns_step(const FlowState& flow, const PhasePair& phase, const ChemPair& chem,
                         double dt, const ConstitutiveSet& consts, const ChannelGrid& g) {
  return NavierStokesStepper(g).step(flow, phase, chem, dt, consts);
}

}  // namespace nsch
