#include "nsch/cahn_hilliard.hpp"
#include "nsch/navier_stokes.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace nsch;
using nsch::testing::max_abs;

namespace {

constexpr double kPi = std::numbers::pi;

double max_face_error(const FaceVector& f, const ChannelGrid& g, double (*u)(double, double),
                      double (*v)(double, double)) {
  double e = 0.0;
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) e = std::max(e, std::abs(f.U(i, j) - u(i * g.hx(), g.yc(j))));
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) e = std::max(e, std::abs(f.V(i, j) - v(g.xc(i), j * g.hy())));
  return e;
}

/// 1D oracle: u_t = ν u_yy on (0, Ly) with ν ∂_n u = -γ u at both ends,
/// vertex-centered differences and explicit Euler steps. Returns E_kin(t) per unit length.
std::vector<double> slip_decay_oracle(double nu, double gamma, double ly, double u0,
                                      const std::vector<double>& times) {
  const int m = 400;
  const double h = ly / m, dt = 0.2 * h * h / nu;
  std::vector<double> u(m + 1, u0), next(m + 1);
  std::vector<double> out;
  double t = 0.0;
  auto energy = [&] {
    double e = 0.0;
    for (int k = 0; k <= m; ++k) e += (k == 0 || k == m ? 0.5 : 1.0) * u[k] * u[k] * h;
    return 0.5 * e;
  };
  for (double target : times) {
    while (t < target - 1e-15) {
      const double step = std::min(dt, target - t);
      for (int k = 0; k <= m; ++k) {
        const double below = k > 0 ? u[k - 1] : u[1] - 2 * h * gamma / nu * u[0];
        const double above = k < m ? u[k + 1] : u[m - 1] - 2 * h * gamma / nu * u[m];
        next[k] = u[k] + step * nu * (below - 2 * u[k] + above) / (h * h);
      }
      u.swap(next);
      t += step;
    }
    out.push_back(energy());
  }
  return out;
}

}  // namespace

TEST(KortewegForce, ConstantPhase) {
  const ChannelGrid g(1, 1, 8, 8);
  std::mt19937_64 rng(1);
  const FaceVector f = korteweg_force(nsch::testing::random_bulk(rng, g), BulkField(g, 0.3), g);
  EXPECT_EQ(f.max_abs(), 0.0);
}

TEST(KortewegForce, ConstantPotential) {
  const ChannelGrid g(1.2, 1, 10, 8);
  std::mt19937_64 rng(2);
  const BulkField phi = nsch::testing::random_bulk(rng, g);
  const FaceVector f = korteweg_force(BulkField(g, 2.5), phi, g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) EXPECT_NEAR(f.U(i, j), 2.5 * (phi(i, j) - phi.at(i - 1, j)) / g.hx(), 1e-12);
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) EXPECT_NEAR(f.V(i, j), 2.5 * (phi(i, j) - phi(i, j - 1)) / g.hy(), 1e-12);
  for (int i = 0; i < g.nx(); ++i) {
    EXPECT_EQ(f.V(i, 0), 0.0);
    EXPECT_EQ(f.V(i, g.ny()), 0.0);
  }
}

TEST(KortewegForce, SecondOrderOnSineModes) {
  auto mu = [](double x, double y) { return std::sin(2 * kPi * x) * std::cos(kPi * y); };
  auto phi = [](double x, double y) { return std::cos(2 * kPi * x) + std::sin(kPi * y); };
  auto fu = [](double x, double y) {
    return std::sin(2 * kPi * x) * std::cos(kPi * y) * (-2 * kPi * std::sin(2 * kPi * x));
  };
  auto fv = [](double x, double y) {
    return std::sin(2 * kPi * x) * std::cos(kPi * y) * (kPi * std::cos(kPi * y));
  };
  double prev = 0.0;
  for (int n : {16, 32, 64}) {
    const ChannelGrid g(1, 1, n, n);
    const FaceVector f = korteweg_force(BulkField::sample(g, mu), BulkField::sample(g, phi), g);
    const double err = max_face_error(f, g, fu, fv);
    if (prev > 0) {
      EXPECT_GE(nsch::testing::order(prev, err), 1.9);
    }
    prev = err;
  }
}

TEST(Projection, DivergenceFreeInputIsFixedPoint) {
  const ChannelGrid g(1, 1, 12, 10);
  std::mt19937_64 rng(3);
  const FaceVector u = nsch::testing::random_divergence_free(rng, g);
  const ProjectionResult r = project(u, g);
  EXPECT_LT((r.vel - u).max_abs(), 1e-10);
  EXPECT_LT(max_abs(r.p), 1e-10);
}

TEST(Projection, PureGradientVanishes) {
  const ChannelGrid g(1, 1, 16, 16);
  // q with ∂_y q = 0 at the walls; the discrete gradient is compatible by construction.
  const BulkField q = BulkField::sample(g, [](double x, double y) { return std::cos(2 * kPi * x) * std::cos(kPi * y); });
  const ProjectionResult r = project(gradient(q, g), g);
  EXPECT_LT(r.vel.max_abs(), 1e-10);
}

TEST(Projection, RandomInputIdempotent) {
  const ChannelGrid g(1.5, 1, 15, 10);
  std::mt19937_64 rng(4);
  const ProjectionSolver solver(g);
  for (int trial = 0; trial < 10; ++trial) {
    const FaceVector u = nsch::testing::random_faces(rng, g);
    const ProjectionResult once = solver.project(u);
    EXPECT_LE(max_divergence(once.vel, g), 1e-8);
    const ProjectionResult twice = solver.project(once.vel);
    EXPECT_LE((twice.vel - once.vel).max_abs(), 1e-12 * (1 + once.vel.max_abs()));
    EXPECT_NEAR(quadrature(once.p, g), 0.0, 1e-12);
  }
}

TEST(Projection, RejectsWallNormalVelocity) {
  const ChannelGrid g(1, 1, 8, 8);
  FaceVector u(g);
  u.V(2, 0) = 1.0;
  EXPECT_THROW(project(u, g), std::invalid_argument);
}

TEST(Advection, SkewSymmetricOnDivergenceFreeFields) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const ChannelGrid g(1.0 + 0.01 * trial, 1.0, 8 + trial % 9, 6 + trial % 7);
    const FaceVector v = nsch::testing::random_divergence_free(rng, g);
    const FaceVector a = advection(v, g);
    const double production = face_inner(v, a, g);
    FaceVector av = v, aa = a;
    av.u = av.u.cwiseAbs();
    av.v = av.v.cwiseAbs();
    aa.u = aa.u.cwiseAbs();
    aa.v = aa.v.cwiseAbs();
    EXPECT_LE(std::abs(production), 1e-10 * face_inner(av, aa, g));
  }
}

TEST(Advection, UniformFlowHasNoAdvection) {
  const ChannelGrid g(1, 1, 8, 8);
  FaceVector v(g);
  v.u.setConstant(1.3);
  EXPECT_LT(advection(v, g).max_abs(), 1e-14);
}

TEST(NsStep, EquilibriumStaysAtRest) {
  const ChannelGrid g(1, 1, 8, 8);
  const PhasePair phase = PhasePair::constant(g, 1.0);
  const ChemPair chem = ChemPair::zero(g);
  NavierStokesStepper ns(g);
  FlowState f = FlowState::rest(g);
  for (int n = 0; n < 5; ++n) f = ns.step(f, phase, chem, 1e-2, ConstitutiveSet{});
  EXPECT_EQ(f.vel.max_abs(), 0.0);
  EXPECT_EQ(max_abs(f.p), 0.0);
}

TEST(NsStep, RejectsNonpositiveStep) {
  const ChannelGrid g(1, 1, 8, 8);
  EXPECT_THROW(ns_step(FlowState::rest(g), PhasePair::constant(g, 0.0), ChemPair::zero(g), -1.0, ConstitutiveSet{}, g),
               std::invalid_argument);
}

TEST(NsStep, UniformFlowDecayMatchesSlipReduction) {
  const double nu = 1.0, gamma = 1.0, u0 = 1.0;
  const ChannelGrid g(1.0, 1.0, 4, 64);
  ConstitutiveSet consts;
  consts.viscosity = BoundedCoefficient(nu);
  consts.friction = BoundedCoefficient(gamma);
  const PhasePair phase = PhasePair::constant(g, 0.0);
  const ChemPair chem = ChemPair::zero(g);
  NavierStokesStepper ns(g);
  FlowState f = FlowState::rest(g);
  f.vel.u.setConstant(u0);
  const double dt = 2e-5;
  const std::vector<double> times{0.05, 0.1};
  std::vector<double> energies;
  double t = 0.0;
  for (double target : times) {
    while (t < target - 1e-12) {
      f = ns.step(f, phase, chem, dt, consts);
      t += dt;
    }
    energies.push_back(kinetic_energy(f.vel, g) / g.lx());
  }
  const std::vector<double> oracle = slip_decay_oracle(nu, gamma, g.ly(), u0, times);
  const double rate = std::log(energies[0] / energies[1]) / (times[1] - times[0]);
  const double rate_oracle = std::log(oracle[0] / oracle[1]) / (times[1] - times[0]);
  EXPECT_NEAR(rate / rate_oracle, 1.0, 0.01);
  EXPECT_NEAR(energies[1] / oracle[1], 1.0, 0.01);
}

TEST(NsStep, SlipChannelProfileSecondOrder) {
  // Steady body-force flow with slip: u = f/(2ν) y(Ly - y) + f Ly/(2γ).
  const double nu = 0.7, gamma = 2.0, force = 1.5, ly = 1.0;
  ConstitutiveSet consts;
  consts.viscosity = BoundedCoefficient(nu);
  consts.friction = BoundedCoefficient(gamma);
  auto exact = [&](double y) { return force / (2 * nu) * y * (ly - y) + force * ly / (2 * gamma); };
  double prev = 0.0;
  for (int n : {8, 16, 32}) {
    const ChannelGrid g(1.0, ly, 4, n);
    NavierStokesOptions opts;
    opts.body_force_x = force;
    NavierStokesStepper ns(g, opts);
    FlowState f = FlowState::rest(g);
    for (int k = 0; k < 40; ++k)
      f = ns.step(f, PhasePair::constant(g, 0.0), ChemPair::zero(g), 10.0, consts);
    double err = 0.0;
    for (int j = 0; j < n; ++j) err = std::max(err, std::abs(f.vel.U(0, j) - exact(g.yc(j))));
    for (Wall w : kWalls) err = std::max(err, std::abs(f.u_wall(w, 0) - exact(g.wall_y(w))));
    if (prev > 0) {
      EXPECT_GE(nsch::testing::order(prev, err), 1.9) << "n = " << n;
    }
    prev = err;
  }
}

TEST(NsStep, DivergenceBoundEveryStep) {
  const ChannelGrid g(1, 1, 16, 16);
  std::mt19937_64 rng(6);
  ModelParams params;
  params.eps = 0.1;
  const PhasePair phase{nsch::testing::random_bulk(rng, g, 0.8), nsch::testing::random_wall(rng, g, 0.8)};
  const ChemPair chem = assemble_potentials(phase, params, ConstitutiveSet{}, g);
  NavierStokesStepper ns(g);
  FlowState f = FlowState::rest(g);
  f.vel = nsch::testing::random_divergence_free(rng, g);
  for (int n = 0; n < 10; ++n) {
    f = ns.step(f, phase, chem, 1e-3, ConstitutiveSet{});
    EXPECT_LE(ns.last_max_divergence(), 1e-8);
    EXPECT_LE(max_divergence(f.vel, g), 1e-8);
    EXPECT_NEAR(quadrature(f.p, g), 0.0, 1e-10);
  }
}

TEST(NsStep, ViscousMatrixMatchesDissipation) {
  const ChannelGrid g(1.1, 0.9, 9, 7);
  std::mt19937_64 rng(7);
  ConstitutiveSet consts;
  consts.viscosity = BoundedCoefficient(Polynomial({1.0, 0.5}), 0.2, 3.0);
  const PhasePair phase{nsch::testing::random_bulk(rng, g, 0.5), nsch::testing::random_wall(rng, g, 0.5)};
  const ViscousCoefficients coef = ViscousCoefficients::evaluate(phase, consts, g);
  const FaceVector v = nsch::testing::random_faces(rng, g);
  const Eigen::VectorXd x = pack_velocity(v);
  const double form = x.dot(viscous_matrix(g, coef) * x);
  const WallField uw = wall_slip_velocity(v, coef, WallField(g), g);
  const ViscousDissipation d = viscous_dissipation(v, uw, coef, g);
  EXPECT_NEAR(form, d.viscous + d.friction, 1e-10 * form);
}

TEST(NsStep, KineticEnergyBudgetFirstOrderResidual) {
  // ΔE_kin = dt (-D + Korteweg work + Marangoni work) + O(dt²).
  const ChannelGrid g(1, 1, 16, 16);
  std::mt19937_64 rng(8);
  ModelParams params;
  params.eps = 0.2;
  params.delta = 0.2;
  const PhasePair phase{nsch::testing::random_bulk(rng, g, 0.5), nsch::testing::random_wall(rng, g, 0.5)};
  const ChemPair chem = assemble_potentials(phase, params, ConstitutiveSet{}, g);
  FlowState f0 = FlowState::rest(g);
  f0.vel = nsch::testing::random_divergence_free(rng, g, 0.2);
  NavierStokesOptions opts;
  opts.advection = false;
  const ViscousCoefficients coef = ViscousCoefficients::evaluate(phase, ConstitutiveSet{}, g);
  const WallField stress = marangoni_stress(phase.psi, chem.theta, g);
  std::vector<double> residuals;
  for (double dt : {1e-4, 5e-5, 2.5e-5}) {
    NavierStokesStepper ns(g, opts);
    const FlowState f1 = ns.step(f0, phase, chem, dt, ConstitutiveSet{});
    const ViscousDissipation d = viscous_dissipation(f1.vel, f1.u_wall, coef, g);
    const double korteweg = face_inner(korteweg_force(chem.mu, phase.phi, g), f1.vel, g);
    const double marangoni = inner(stress, f1.u_wall, g);
    const double de = kinetic_energy(f1.vel, g) - kinetic_energy(f0.vel, g);
    residuals.push_back(std::abs(de - dt * (-d.viscous - d.friction + korteweg + marangoni)));
  }
  EXPECT_GE(nsch::testing::order(residuals[0], residuals[1]), 1.8);
  EXPECT_GE(nsch::testing::order(residuals[1], residuals[2]), 1.8);
}
