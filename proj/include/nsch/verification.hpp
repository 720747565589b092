#pragma once

// Self-checks driven by the `verify` command: eigen structure, manufactured
// solution for the coupled elliptic kernel, chain-rule residual under time
// refinement, and the Galerkin energy audit.

#include "nsch/bulk_surface.hpp"
#include "nsch/galerkin.hpp"
#include "nsch/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace nsch {

struct EigenStructure {
  double first_lambda = 0.0;     // |λ₁|
  double min_lambda = 0.0;       // min λ_i
  double first_pair_error = 0.0; // max deviation of (ζ₁, ξ₁) from (α, 1)/norm
  double gram_error = 0.0;       // max |Gram - I|
  double mean_error = 0.0;       // max_i≥2 |α|Ω|<ζ_i> + |Γ|<ξ_i>|
  bool sorted = true;
};

inline EigenStructure eigen_structure(const std::vector<EigenPair>& pairs, double alpha,
                                      const ChannelGrid& g) {
  EigenStructure s;
  const int k = static_cast<int>(pairs.size());
  const double norm = std::sqrt(alpha * alpha * g.area() + g.boundary_length());
  s.first_lambda = std::abs(pairs[0].lambda);
  s.min_lambda = pairs[0].lambda;
  s.first_pair_error = std::max((pairs[0].zeta.values().array() - alpha / norm).abs().maxCoeff(),
                                std::max((pairs[0].xi.side(Wall::bottom).array() - 1.0 / norm).abs().maxCoeff(),
                                         (pairs[0].xi.side(Wall::top).array() - 1.0 / norm).abs().maxCoeff()));
  for (int a = 0; a < k; ++a) {
    s.min_lambda = std::min(s.min_lambda, pairs[a].lambda);
    if (a > 0 && pairs[a].lambda < pairs[a - 1].lambda - 1e-12) s.sorted = false;
    if (a > 0)
      s.mean_error = std::max(s.mean_error, std::abs(alpha * quadrature(pairs[a].zeta, g) + quadrature(pairs[a].xi, g)));
    for (int b = 0; b < k; ++b) {
      const double gram = inner(pairs[a].zeta, pairs[b].zeta, g) + inner(pairs[a].xi, pairs[b].xi, g);
      s.gram_error = std::max(s.gram_error, std::abs(gram - (a == b ? 1.0 : 0.0)));
    }
  }
  return s;
}

struct StokesStructure {
  double min_lambda = 0.0;
  double gram_error = 0.0;
  double max_divergence = 0.0;
};

inline StokesStructure stokes_structure(const StokesBasis& basis, const ChannelGrid& g) {
  StokesStructure s;
  const int k = static_cast<int>(basis.fields.size());
  s.min_lambda = *std::min_element(basis.lambda.begin(), basis.lambda.end());
  for (int a = 0; a < k; ++a) {
    s.max_divergence = std::max(s.max_divergence, max_divergence(basis.fields[a], g));
    for (int b = 0; b < k; ++b)
      s.gram_error = std::max(s.gram_error,
                              std::abs(face_inner(basis.fields[a], basis.fields[b], g) - (a == b ? 1.0 : 0.0)));
  }
  return s;
}

/// Observed orders log2(e_k / e_{k+1}) for successive halvings.
inline std::vector<double> observed_orders(const std::vector<double>& errors) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) out.push_back(std::log2(errors[k] / errors[k + 1]));
  return out;
}

struct RefinementStudy {
  std::vector<double> phi_errors, psi_errors;
  std::vector<double> phi_orders, psi_orders;
  double min_order() const {
    double m = 1e300;
    for (double o : phi_orders) m = std::min(m, o);
    for (double o : psi_orders) m = std::min(m, o);
    return m;
  }
};

/// Solves (I + A_{κ,σ}) u = (f, g) for the data of
///   φ* = cos(2πx/Lx)(1 + y(Ly - y)),   ψ* = φ*|Γ / σ
/// on nx0 x ny0 and `levels - 1` successive refinements; L² errors at the nodes.
inline RefinementStudy elliptic_mms_study(double lx, double ly, int nx0, int ny0, int levels,
                                          double kappa, double sigma) {
  RefinementStudy st;
  const double k = 2.0 * std::numbers::pi / lx;
  for (int l = 0; l < levels; ++l) {
    const ChannelGrid g(lx, ly, nx0 << l, ny0 << l);
    auto profile = [&](double y) { return 1.0 + y * (ly - y); };
    const BulkField f = BulkField::sample(g, [&](double x, double y) {
      const double p = profile(y);
      return std::cos(k * x) * (p + k * k * p + 2.0);
    });
    const WallField gw = WallField::sample(g, [&](double x, double) {
      return std::cos(k * x) * ((1.0 + kappa * k * k) / sigma - sigma * ly);
    });
    const auto [phi, psi] = solve_coupled_elliptic(f, gw, kappa, sigma, g);
    const BulkField phi_exact = BulkField::sample(g, [&](double x, double y) { return std::cos(k * x) * profile(y); });
    const WallField psi_exact = WallField::sample(g, [&](double x, double) { return std::cos(k * x) / sigma; });
    const BulkField ep = phi - phi_exact;
    const WallField es = psi - psi_exact;
    st.phi_errors.push_back(std::sqrt(inner(ep, ep, g)));
    st.psi_errors.push_back(std::sqrt(inner(es, es, g)));
  }
  st.phi_orders = observed_orders(st.phi_errors);
  st.psi_orders = observed_orders(st.psi_errors);
  return st;
}

struct ChainRuleStudy {
  std::vector<double> dts, residuals, orders;
};

/// Trajectory φ = t² cos(2πx/Lx)(1 + y(Ly - y)), ψ = φ|Γ/σ on [0, t_end].
inline ChainRuleStudy chain_rule_study(const ChannelGrid& g, double kappa, double sigma,
                                       const std::vector<double>& dts, double t_end = 1.0) {
  ChainRuleStudy st;
  st.dts = dts;
  const double k = 2.0 * std::numbers::pi / g.lx();
  const BulkField shape = BulkField::sample(g, [&](double x, double y) { return std::cos(k * x) * (1.0 + y * (g.ly() - y)); });
  const WallField wall_shape = WallField::sample(g, [&](double x, double) { return std::cos(k * x) / sigma; });
  for (double dt : dts) {
    const int levels = static_cast<int>(std::lround(t_end / dt)) + 1;
    std::vector<PhasePair> traj;
    traj.reserve(static_cast<std::size_t>(levels));
    for (int n = 0; n < levels; ++n) {
      const double t = n * dt;
      traj.push_back({(t * t) * shape, (t * t) * wall_shape});
    }
    st.residuals.push_back(chain_rule_residual(traj, kappa, sigma, dt, g));
  }
  st.orders = observed_orders(st.residuals);
  return st;
}

}  // namespace nsch
