#pragma once

// Coupled bulk-surface elliptic operator
//
//   A(φ, ψ) = (-Δφ, -κ Δ_Γ ψ + σ ∂_n φ),   φ|Γ = σ ψ,
//
// its resolvent (I + A)^{-1}, the eigenpairs of the κ = 1, σ = α instance,
// and the chain-rule residual for trajectories in its domain.
//
// The trace constraint is eliminated: ψ fixes the ghost values of φ, and
// ∂_n φ is the ghost-consistent wall flux. With the midpoint weights
// W = diag(hx hy, ..., hx, ...) the matrix W A is symmetric and
// <A u, u>_W = ‖∇φ‖² + κ ‖∇_Γ ψ‖² holds exactly.

#include "nsch/fields.hpp"
#include "nsch/grid.hpp"
#include "nsch/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nsch {

/// Flat index layout for a (bulk, wall) unknown pair.
struct PairLayout {
  int nx, ny;
  explicit PairLayout(const ChannelGrid& g) : nx(g.nx()), ny(g.ny()) {}
  int bulk(int i, int j) const { return ((i % nx) + nx) % nx + nx * j; }
  int wall(Wall w, int i) const {
    return nx * ny + static_cast<int>(w) * nx + ((i % nx) + nx) % nx;
  }
  int size() const { return nx * ny + 2 * nx; }
};

inline Eigen::VectorXd pack(const BulkField& f, const WallField& s) {
  const Eigen::Index n = f.size(), m = s.nx();
  Eigen::VectorXd x(n + 2 * m);
  x.head(n) = f.values();
  x.segment(n, m) = s.side(Wall::bottom);
  x.tail(m) = s.side(Wall::top);
  return x;
}

inline std::pair<BulkField, WallField> unpack(const Eigen::VectorXd& x, const ChannelGrid& g) {
  BulkField f(g);
  WallField s(g);
  const Eigen::Index n = f.size(), m = g.nx();
  f.values() = x.head(n);
  s.side(Wall::bottom) = x.segment(n, m);
  s.side(Wall::top) = x.segment(n + m, m);
  return {std::move(f), std::move(s)};
}

/// Midpoint quadrature weights matching `pack`.
inline Eigen::VectorXd pair_weights(const ChannelGrid& g) {
  PairLayout lay(g);
  Eigen::VectorXd w(lay.size());
  w.head(g.cells()).setConstant(g.hx() * g.hy());
  w.tail(2 * g.nx()).setConstant(g.hx());
  return w;
}

/// Appends the triplets of A_{κ,σ} (operator rows, unweighted), scaled by
/// `scale`, with row/column offsets.
inline void append_coupled_operator(Triplets& t, const ChannelGrid& g, double kappa, double sigma,
                                    double scale = 1.0, int row0 = 0, int col0 = 0) {
  PairLayout lay(g);
  const int nx = g.nx(), ny = g.ny();
  const double ihx2 = 1.0 / (g.hx() * g.hx()), ihy2 = 1.0 / (g.hy() * g.hy());
  auto add = [&](int r, int c, double v) { t.emplace_back(row0 + r, col0 + c, scale * v); };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int r = lay.bulk(i, j);
      add(r, r, 2.0 * ihx2);
      add(r, lay.bulk(i - 1, j), -ihx2);
      add(r, lay.bulk(i + 1, j), -ihx2);
      if (j > 0) {
        add(r, r, ihy2);
        add(r, lay.bulk(i, j - 1), -ihy2);
      } else {
        add(r, r, 2.0 * ihy2);
        add(r, lay.wall(Wall::bottom, i), -2.0 * sigma * ihy2);
      }
      if (j < ny - 1) {
        add(r, r, ihy2);
        add(r, lay.bulk(i, j + 1), -ihy2);
      } else {
        add(r, r, 2.0 * ihy2);
        add(r, lay.wall(Wall::top, i), -2.0 * sigma * ihy2);
      }
    }
  }
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < nx; ++i) {
      const int r = lay.wall(w, i);
      if (kappa != 0.0) {
        add(r, r, 2.0 * kappa * ihx2);
        add(r, lay.wall(w, i - 1), -kappa * ihx2);
        add(r, lay.wall(w, i + 1), -kappa * ihx2);
      }
      add(r, r, 2.0 * sigma * sigma / g.hy());
      add(r, lay.bulk(i, j), -2.0 * sigma / g.hy());
    }
  }
}

inline SparseMatrix coupled_operator_matrix(const ChannelGrid& g, double kappa, double sigma) {
  PairLayout lay(g);
  Triplets t;
  t.reserve(static_cast<std::size_t>(lay.size()) * 7);
  append_coupled_operator(t, g, kappa, sigma);
  SparseMatrix a(lay.size(), lay.size());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// Forward operator A_{κ,σ}(φ, ψ) built from the grid operators.
inline std::pair<BulkField, WallField> apply_coupled_operator(const BulkField& phi,
                                                              const WallField& psi, double kappa,
                                                              double sigma, const ChannelGrid& g) {
  const WallField trace = sigma * psi;
  BulkField bulk = -1.0 * bulk_laplacian(phi, trace, g);
  WallField wall = sigma * wall_flux(phi, trace, g);
  if (kappa != 0.0) wall -= kappa * surface_laplacian(psi, g);
  return {std::move(bulk), std::move(wall)};
}

/// Dirichlet form ½‖∇φ‖² + κ/2 ‖∇_Γψ‖² with trace φ|Γ = σψ.
inline double coupled_dirichlet_energy(const BulkField& phi, const WallField& psi, double kappa,
                                       double sigma, const ChannelGrid& g) {
  return 0.5 * gradient_norm_sq(phi, sigma * psi, g) + 0.5 * kappa * surface_gradient_norm_sq(psi, g);
}

/// Solves (φ, ψ) + A_{κ,σ}(φ, ψ) = (f, g).
inline std::pair<BulkField, WallField> solve_coupled_elliptic(const BulkField& f,
                                                              const WallField& gw, double kappa,
                                                              double sigma,
                                                              const ChannelGrid& g) {
  if (!(kappa > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("solve_coupled_elliptic requires kappa, sigma > 0");
  detail::check_shapes(f, gw, g);
  PairLayout lay(g);
  const Eigen::VectorXd w = pair_weights(g);
  // W (I + A) is symmetric positive definite.
  Triplets t;
  t.reserve(static_cast<std::size_t>(lay.size()) * 8);
  append_coupled_operator(t, g, kappa, sigma);
  for (int r = 0; r < lay.size(); ++r) t.emplace_back(r, r, 1.0);
  for (auto& e : t) e = Eigen::Triplet<double>(e.row(), e.col(), e.value() * w[e.row()]);
  SparseMatrix m(lay.size(), lay.size());
  m.setFromTriplets(t.begin(), t.end());
  const Eigen::VectorXd rhs = w.cwiseProduct(pack(f, gw));
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(m);
  if (ldlt.info() != Eigen::Success) throw SolverError("coupled elliptic factorization failed", 1.0);
  const Eigen::VectorXd x = ldlt.solve(rhs);
  const double r = relative_residual(m, x, rhs);
  if (!(r <= 1e-10)) throw SolverError("coupled elliptic solve did not converge", r);
  return unpack(x, g);
}

struct EigenPair {
  double lambda = 0.0;
  BulkField zeta;
  WallField xi;
};

/// The largest mode count served by the dense eigensolver.
inline constexpr int kMaxEigenpairs = 64;
inline constexpr int kMaxDenseUnknowns = 6000;

/// The k smallest eigenpairs of -Δζ = λζ, -Δ_Γξ + α∂_nζ = λξ, ζ|Γ = αξ,
/// orthonormal under the midpoint inner product. The first pair is fixed to
/// (α, 1) / sqrt(α²|Ω| + |Γ|); all others are orthogonal to it.
inline std::vector<EigenPair> bulk_surface_eigenpairs(int k, double alpha, const ChannelGrid& g) {
  PairLayout lay(g);
  if (!(alpha > 0.0)) throw std::invalid_argument("bulk_surface_eigenpairs requires alpha > 0");
  if (k < 1 || k > std::min(kMaxEigenpairs, lay.size()))
    throw std::invalid_argument("bulk_surface_eigenpairs: k out of range");
  if (lay.size() > kMaxDenseUnknowns)
    throw std::invalid_argument("bulk_surface_eigenpairs: grid too large for the dense solver");

  const Eigen::MatrixXd a = Eigen::MatrixXd(coupled_operator_matrix(g, 1.0, alpha));
  const Eigen::VectorXd w = pair_weights(g);
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::VectorXd isw = sw.cwiseInverse();
  // B = W^{1/2} A W^{-1/2} is symmetric.
  Eigen::MatrixXd b = sw.asDiagonal() * a * isw.asDiagonal();
  b = 0.5 * (b + b.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw std::runtime_error("bulk-surface eigensolver failed");

  // Columns of `modes` are W-orthonormal eigenvectors.
  Eigen::MatrixXd modes = isw.asDiagonal() * es.eigenvectors().leftCols(k);
  Eigen::VectorXd lambdas = es.eigenvalues().head(k);

  const double norm = std::sqrt(alpha * alpha * g.area() + g.boundary_length());
  Eigen::VectorXd first(lay.size());
  first.head(g.cells()).setConstant(alpha / norm);
  first.tail(2 * g.nx()).setConstant(1.0 / norm);
  modes.col(0) = first;
  lambdas[0] = 0.0;
  // Modified Gram-Schmidt in the weighted inner product.
  for (int c = 1; c < k; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int d = 0; d < c; ++d) {
        const double proj = modes.col(d).dot(w.cwiseProduct(modes.col(c)));
        modes.col(c) -= proj * modes.col(d);
      }
      modes.col(c) /= std::sqrt(modes.col(c).dot(w.cwiseProduct(modes.col(c))));
    }
  }

  std::vector<EigenPair> out;
  out.reserve(k);
  for (int c = 0; c < k; ++c) {
    auto [zeta, xi] = unpack(modes.col(c), g);
    out.push_back({lambdas[c], std::move(zeta), std::move(xi)});
  }
  return out;
}

/// Max over interior time levels of
///   | d/dt[½‖∇φ‖² + κ/2‖∇_Γψ‖²] - <(∂tφ, ∂tψ), A_{κ,σ}(φ, ψ)> |
/// with central differences in time.
inline double chain_rule_residual(const std::vector<PhasePair>& trajectory, double kappa,
                                  double sigma, double dt, const ChannelGrid& g) {
  if (trajectory.size() < 3) throw std::invalid_argument("chain_rule_residual needs 3 time levels");
  if (!(dt > 0.0)) throw std::invalid_argument("chain_rule_residual needs dt > 0");
  std::vector<double> energy;
  energy.reserve(trajectory.size());
  for (const auto& s : trajectory)
    energy.push_back(coupled_dirichlet_energy(s.phi, s.psi, kappa, sigma, g));
  double worst = 0.0;
  for (std::size_t n = 1; n + 1 < trajectory.size(); ++n) {
    const double de = (energy[n + 1] - energy[n - 1]) / (2.0 * dt);
    const BulkField dphi = (0.5 / dt) * (trajectory[n + 1].phi - trajectory[n - 1].phi);
    const WallField dpsi = (0.5 / dt) * (trajectory[n + 1].psi - trajectory[n - 1].psi);
    const auto [abulk, awall] = apply_coupled_operator(trajectory[n].phi, trajectory[n].psi, kappa, sigma, g);
    const double pairing = inner(dphi, abulk, g) + inner(dpsi, awall, g);
    worst = std::max(worst, std::abs(de - pairing));
  }
  return worst;
}

}  // namespace nsch
