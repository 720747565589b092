#include "nsch/bulk_surface.hpp"
#include "support.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace nsch;
using nsch::testing::max_abs;

namespace {

constexpr double kPi = std::numbers::pi;

struct Manufactured {
  BulkField phi, f;
  WallField psi, g;
};

/// φ* = cos(kx)(1 + y(Ly - y)), ψ* = φ*|Γ / σ, with (f, g) from the continuous operator.
Manufactured manufactured(const ChannelGrid& grid, double kappa, double sigma) {
  const double k = 2 * kPi / grid.lx(), ly = grid.ly();
  auto p = [&](double y) { return 1 + y * (ly - y); };
  Manufactured m;
  m.phi = BulkField::sample(grid, [&](double x, double y) { return std::cos(k * x) * p(y); });
  m.f = BulkField::sample(grid, [&](double x, double y) { return std::cos(k * x) * (p(y) + k * k * p(y) + 2); });
  m.psi = WallField::sample(grid, [&](double x, double) { return std::cos(k * x) / sigma; });
  // ∂_n φ* = -Ly cos(kx) on both walls.
  m.g = WallField::sample(grid, [&](double x, double) {
    return std::cos(k * x) * ((1 + kappa * k * k) / sigma - sigma * ly);
  });
  return m;
}

double l2(const BulkField& f, const ChannelGrid& g) { return std::sqrt(inner(f, f, g)); }
double l2(const WallField& s, const ChannelGrid& g) { return std::sqrt(inner(s, s, g)); }

}  // namespace

TEST(SolveCoupledElliptic, ConstantPair) {
  const ChannelGrid g(1.5, 1, 12, 8);
  const double sigma = 0.7;
  const auto [phi, psi] = solve_coupled_elliptic(BulkField(g, 1.0), WallField(g, 1 / sigma), 0.4, sigma, g);
  EXPECT_LT(max_abs(phi - BulkField(g, 1.0)), 1e-12);
  EXPECT_LT(max_abs(psi - WallField(g, 1 / sigma)), 1e-12);
}

TEST(SolveCoupledElliptic, ManufacturedSolutionSecondOrder) {
  const double kappa = 0.8, sigma = 1.3;
  double prev_phi = 0, prev_psi = 0;
  for (int n : {16, 32, 64}) {
    const ChannelGrid g(2.0, 1.0, n, n / 2);
    const Manufactured m = manufactured(g, kappa, sigma);
    const auto [phi, psi] = solve_coupled_elliptic(m.f, m.g, kappa, sigma, g);
    const double ephi = l2(phi - m.phi, g), epsi = l2(psi - m.psi, g);
    if (prev_phi > 0) {
      EXPECT_GE(nsch::testing::order(prev_phi, ephi), 1.9);
      EXPECT_GE(nsch::testing::order(prev_psi, epsi), 1.9);
    }
    prev_phi = ephi;
    prev_psi = epsi;
  }
}

TEST(SolveCoupledElliptic, Linear) {
  const ChannelGrid g(1, 1, 10, 8);
  std::mt19937_64 rng(1);
  const BulkField f1 = nsch::testing::random_bulk(rng, g), f2 = nsch::testing::random_bulk(rng, g);
  const WallField g1 = nsch::testing::random_wall(rng, g), g2 = nsch::testing::random_wall(rng, g);
  const auto [p1, s1] = solve_coupled_elliptic(f1, g1, 1.0, 1.0, g);
  const auto [p2, s2] = solve_coupled_elliptic(f2, g2, 1.0, 1.0, g);
  const auto [p, s] = solve_coupled_elliptic(2.0 * f1 + (-3.0) * f2, 2.0 * g1 + (-3.0) * g2, 1.0, 1.0, g);
  EXPECT_LT(max_abs(p - (2.0 * p1 + (-3.0) * p2)), 1e-10);
  EXPECT_LT(max_abs(s - (2.0 * s1 + (-3.0) * s2)), 1e-10);
}

TEST(SolveCoupledElliptic, InvertsIdentityPlusOperator) {
  const ChannelGrid g(1.2, 0.8, 12, 10);
  std::mt19937_64 rng(2);
  const BulkField f = nsch::testing::random_bulk(rng, g);
  const WallField s = nsch::testing::random_wall(rng, g);
  const double kappa = 0.3, sigma = 2.0;
  const auto [phi, psi] = solve_coupled_elliptic(f, s, kappa, sigma, g);
  const auto [ab, aw] = apply_coupled_operator(phi, psi, kappa, sigma, g);
  EXPECT_LT(max_abs(phi + ab - f), 1e-9);
  EXPECT_LT(max_abs(psi + aw - s), 1e-9);
}

TEST(SolveCoupledElliptic, RejectsNonpositiveParameters) {
  const ChannelGrid g(1, 1, 8, 8);
  EXPECT_THROW(solve_coupled_elliptic(BulkField(g), WallField(g), 0.0, 1.0, g), std::invalid_argument);
  EXPECT_THROW(solve_coupled_elliptic(BulkField(g), WallField(g), 1.0, -1.0, g), std::invalid_argument);
}

TEST(CoupledOperator, MatrixMatchesForwardOperator) {
  const ChannelGrid g(1, 1, 8, 6);
  std::mt19937_64 rng(3);
  const BulkField f = nsch::testing::random_bulk(rng, g);
  const WallField s = nsch::testing::random_wall(rng, g);
  const Eigen::VectorXd x = coupled_operator_matrix(g, 0.6, 1.7) * pack(f, s);
  const auto [ab, aw] = apply_coupled_operator(f, s, 0.6, 1.7, g);
  EXPECT_LT((x - pack(ab, aw)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CoupledOperator, EnergyIdentity) {
  const ChannelGrid g(1.4, 0.9, 14, 9);
  std::mt19937_64 rng(4);
  for (double kappa : {0.0, 0.5, 2.0}) {
    const double sigma = 1.6;
    const BulkField f = nsch::testing::random_bulk(rng, g);
    const WallField s = nsch::testing::random_wall(rng, g);
    const auto [ab, aw] = apply_coupled_operator(f, s, kappa, sigma, g);
    const double lhs = inner(f, ab, g) + inner(s, aw, g);
    const double rhs = gradient_norm_sq(f, sigma * s, g) + kappa * surface_gradient_norm_sq(s, g);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * rhs);
  }
}

TEST(Eigenpairs, FirstPairAndStructure) {
  const ChannelGrid g(1.0, 0.5, 8, 4);
  const double alpha = std::sqrt(2.0);
  const auto pairs = bulk_surface_eigenpairs(10, alpha, g);
  ASSERT_EQ(pairs.size(), 10u);
  const double norm = std::sqrt(alpha * alpha * g.lx() * g.ly() + 2 * g.lx());
  EXPECT_NEAR(pairs[0].lambda, 0.0, 1e-10);
  EXPECT_LT(max_abs(pairs[0].zeta - BulkField(g, alpha / norm)), 1e-10);
  EXPECT_LT(max_abs(pairs[0].xi - WallField(g, 1 / norm)), 1e-10);
  for (std::size_t a = 0; a < pairs.size(); ++a) {
    EXPECT_GE(pairs[a].lambda, -1e-10);
    if (a > 0) {
      EXPECT_GE(pairs[a].lambda, pairs[a - 1].lambda - 1e-12);
      EXPECT_NEAR(alpha * quadrature(pairs[a].zeta, g) + quadrature(pairs[a].xi, g), 0.0, 1e-10);
    }
    for (std::size_t b = 0; b < pairs.size(); ++b) {
      const double gram = inner(pairs[a].zeta, pairs[b].zeta, g) + inner(pairs[a].xi, pairs[b].xi, g);
      EXPECT_NEAR(gram, a == b ? 1.0 : 0.0, 1e-10);
    }
  }
}

TEST(Eigenpairs, MatchDenseOracle) {
  // Oracle: assemble the operator column by column from the forward map and
  // solve the weighted symmetric problem independently.
  const ChannelGrid g(1.0, 1.0, 6, 5);
  const double alpha = 0.8;
  const int n = PairLayout(g).size();
  Eigen::MatrixXd a(n, n);
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[c] = 1.0;
    const auto [f, s] = unpack(e, g);
    const auto [ab, aw] = apply_coupled_operator(f, s, 1.0, alpha, g);
    a.col(c) = pack(ab, aw);
  }
  Eigen::VectorXd w(n);
  w.head(g.cells()).setConstant(g.hx() * g.hy());
  w.tail(2 * g.nx()).setConstant(g.hx());
  const Eigen::MatrixXd sym = w.cwiseSqrt().asDiagonal() * a * w.cwiseSqrt().cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (sym + sym.transpose()));
  const auto pairs = bulk_surface_eigenpairs(12, alpha, g);
  for (int k = 0; k < 12; ++k) EXPECT_NEAR(pairs[k].lambda, es.eigenvalues()[k], 1e-9);
  // Each returned pair satisfies the eigen relation.
  for (int k = 1; k < 12; ++k) {
    const auto [ab, aw] = apply_coupled_operator(pairs[k].zeta, pairs[k].xi, 1.0, alpha, g);
    EXPECT_LT(max_abs(ab - pairs[k].lambda * pairs[k].zeta), 1e-8 * (1 + pairs[k].lambda));
    EXPECT_LT(max_abs(aw - pairs[k].lambda * pairs[k].xi), 1e-8 * (1 + pairs[k].lambda));
  }
}

TEST(Eigenpairs, PoincareConstantFromSecondEigenvalue) {
  const ChannelGrid g(1.0, 1.0, 10, 8);
  const double alpha = 1.0;
  const auto pairs = bulk_surface_eigenpairs(2, alpha, g);
  const double cp = 1 / std::sqrt(pairs[1].lambda);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    BulkField f = nsch::testing::random_bulk(rng, g);
    WallField s = nsch::testing::random_wall(rng, g);
    const double c = inner(f, pairs[0].zeta, g) + inner(s, pairs[0].xi, g);
    f -= c * pairs[0].zeta;
    s -= c * pairs[0].xi;
    const double lhs = std::sqrt(inner(f, f, g) + inner(s, s, g));
    const double rhs = std::sqrt(gradient_norm_sq(f, alpha * s, g) + surface_gradient_norm_sq(s, g));
    EXPECT_LE(lhs, cp * rhs * (1 + 1e-12));
  }
  // Equality for the second eigenpair.
  const double l = std::sqrt(gradient_norm_sq(pairs[1].zeta, alpha * pairs[1].xi, g) +
                             surface_gradient_norm_sq(pairs[1].xi, g));
  EXPECT_NEAR(cp * l, 1.0, 1e-9);
}

TEST(Eigenpairs, RejectsBadInput) {
  const ChannelGrid g(1, 1, 8, 8);
  EXPECT_THROW(bulk_surface_eigenpairs(0, 1.0, g), std::invalid_argument);
  EXPECT_THROW(bulk_surface_eigenpairs(65, 1.0, g), std::invalid_argument);
  EXPECT_THROW(bulk_surface_eigenpairs(4, 0.0, g), std::invalid_argument);
}

TEST(ChainRule, StationaryTrajectory) {
  const ChannelGrid g(1, 1, 8, 8);
  std::mt19937_64 rng(5);
  const PhasePair p{nsch::testing::random_bulk(rng, g), nsch::testing::random_wall(rng, g)};
  EXPECT_EQ(chain_rule_residual({p, p, p, p}, 1.0, 1.0, 0.1, g), 0.0);
}

TEST(ChainRule, SpatiallyConstantTrajectory) {
  const ChannelGrid g(1, 1, 8, 8);
  std::vector<PhasePair> traj;
  for (int n = 0; n < 5; ++n) {
    const double t = 0.1 * n;
    traj.push_back({BulkField(g, t * t), WallField(g, t * t)});
  }
  EXPECT_EQ(chain_rule_residual(traj, 1.0, 1.0, 0.1, g), 0.0);
}

TEST(ChainRule, ManufacturedTrajectorySecondOrder) {
  const ChannelGrid g(1.0, 1.0, 16, 8);
  const double kappa = 1.0, sigma = 1.0, k = 2 * kPi;
  const BulkField shape = BulkField::sample(g, [&](double x, double y) { return std::cos(k * x) * y * (1 - y); });
  const WallField wshape(g, 0.0);  // trace of y(1 - y) vanishes
  std::vector<double> res;
  for (double dt : {1e-2, 5e-3, 2.5e-3}) {
    std::vector<PhasePair> traj;
    for (int n = 0; n * dt <= 1.0 + 1e-12; ++n) {
      const double t = n * dt;
      traj.push_back({(t * t) * shape, (t * t) * wshape});
    }
    res.push_back(chain_rule_residual(traj, kappa, sigma, dt, g));
  }
  EXPECT_GT(res[0], 0.0);
  EXPECT_GE(nsch::testing::order(res[0], res[1]), 1.9);
  EXPECT_GE(nsch::testing::order(res[1], res[2]), 1.9);
}

TEST(ChainRule, NeedsThreeLevels) {
  const ChannelGrid g(1, 1, 8, 8);
  const PhasePair p = PhasePair::constant(g, 0.0);
  EXPECT_THROW(chain_rule_residual({p, p}, 1.0, 1.0, 0.1, g), std::invalid_argument);
}
