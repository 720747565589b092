#pragma once

// Model parameters, coupling regimes and constitutive functions.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace nsch {

/// Polynomial in monomial coefficients c0 + c1 s + c2 s^2 + ...
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
    if (c_.empty()) c_.push_back(0.0);
  }
  static Polynomial constant(double v) { return Polynomial({v}); }

  const std::vector<double>& coeffs() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }

  double operator()(double s) const {
    double r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * s + *it;
    return r;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return constant(0.0);
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Polynomial(std::move(d));
  }

 private:
  std::vector<double> c_{0.0};
};

/// A potential with exact first and second derivatives.
struct Potential {
  Polynomial value;
  Polynomial first;
  Polynomial second;
  /// Declared growth exponent (p for F, q for G).
  int growth_exponent = 4;
  /// Constant in |W''(s)| <= c (1 + |s|^(p-2)).
  double growth_constant = 3.0;

  static Potential from(Polynomial w, int exponent = 4, double growth_constant = 3.0) {
    Potential p;
    p.first = w.derivative();
    p.second = p.first.derivative();
    p.value = std::move(w);
    p.growth_exponent = exponent;
    p.growth_constant = growth_constant;
    return p;
  }

  /// 1/4 (s^2 - 1)^2.
  static Potential double_well() { return from(Polynomial({0.25, 0.0, -0.5, 0.0, 0.25}), 4, 3.0); }
};

struct PotentialValues {
  double value, first, second;
};

inline PotentialValues eval_double_well(double s) {
  const double q = s * s - 1.0;
  return {0.25 * q * q, s * q, 3.0 * s * s - 1.0};
}

/// Positive coefficient function with declared bounds [lower, upper].
/// Evaluations outside the bounds are clamped and counted.
class BoundedCoefficient {
 public:
  BoundedCoefficient() : BoundedCoefficient(1.0) {}
  explicit BoundedCoefficient(double v) : BoundedCoefficient(Polynomial::constant(v), v, v) {}
  BoundedCoefficient(Polynomial f, double lower, double upper)
      : f_(std::move(f)), lower_(lower), upper_(upper),
        clamps_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    if (!(lower > 0.0) || !(upper >= lower) || !std::isfinite(upper)) {
      throw std::invalid_argument("coefficient bounds must satisfy 0 < lower <= upper < inf");
    }
  }

  double operator()(double s) const {
    const double v = f_(s);
    if (v < lower_ || v > upper_ || !std::isfinite(v)) {
      clamps_->fetch_add(1, std::memory_order_relaxed);
      return std::isfinite(v) ? std::clamp(v, lower_, upper_) : upper_;
    }
    return v;
  }
  /// Unclamped evaluation.
  double raw(double s) const { return f_(s); }

  bool is_constant() const { return f_.degree() == 0; }
  const Polynomial& polynomial() const { return f_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  std::uint64_t clamp_count() const { return clamps_->load(std::memory_order_relaxed); }

 private:
  Polynomial f_;
  double lower_, upper_;
  std::shared_ptr<std::atomic<std::uint64_t>> clamps_;
};

struct ConstitutiveSet {
  Potential bulk_potential = Potential::double_well();     // F
  Potential surface_potential = Potential::double_well();  // G
  BoundedCoefficient bulk_mobility{1.0};                   // m_Ω
  BoundedCoefficient surface_mobility{1.0};                // m_Γ
  BoundedCoefficient viscosity{1.0};                       // ν
  BoundedCoefficient friction{1.0};                        // γ

  std::uint64_t clamp_count() const {
    return bulk_mobility.clamp_count() + surface_mobility.clamp_count() + viscosity.clamp_count() +
           friction.clamp_count();
  }
};

// Coupling regime of the bulk/surface chemical potentials.
struct Dirichlet {};
struct Robin {
  double length;  // L in (0, inf)
};
struct Neumann {};
using Coupling = std::variant<Dirichlet, Robin, Neumann>;

/// Weight of the Robin transfer dissipation: 0 for L = 0 or L = inf, 1/L otherwise.
inline double h_of_L(const Coupling& c) {
  if (const auto* r = std::get_if<Robin>(&c)) return 1.0 / r->length;
  return 0.0;
}

inline std::string coupling_name(const Coupling& c) {
  if (std::holds_alternative<Dirichlet>(c)) return "dirichlet";
  if (std::holds_alternative<Neumann>(c)) return "neumann";
  return "robin:" + std::to_string(std::get<Robin>(c).length);
}

struct ModelParams {
  double eps = 1.0;
  double delta = 1.0;
  double kappa = 1.0;
  double beta = 1.0;
  Coupling coupling = Dirichlet{};
  double stabilization = 2.0;
  double dt = 1e-4;
  double t_end = 1.0;
  /// Require kappa > 0 (existence-theory setting).
  bool require_positive_kappa = false;

  void validate() const {
    auto fail = [](const std::string& key, const std::string& why) {
      throw std::invalid_argument(key + ": " + why);
    };
    if (!(eps > 0.0) || !std::isfinite(eps)) fail("model.eps", "must be positive");
    if (!(delta > 0.0) || !std::isfinite(delta)) fail("model.delta", "must be positive");
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) fail("model.kappa", "must be nonnegative");
    if (require_positive_kappa && !(kappa > 0.0)) fail("model.kappa", "must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) fail("model.beta", "must be positive");
    if (const auto* r = std::get_if<Robin>(&coupling)) {
      if (!(r->length > 0.0) || !std::isfinite(r->length))
        fail("model.coupling", "Robin length must be positive and finite");
    }
    if (!(stabilization >= 0.0)) fail("model.stabilization", "must be nonnegative");
    if (!(dt > 0.0) || !std::isfinite(dt)) fail("model.dt", "must be positive");
    if (!(t_end >= 0.0)) fail("model.t_end", "must be nonnegative");
  }
};

struct ConstitutiveViolation {
  std::string function;
  double s;
  double value;
  std::string bound;
};

struct ConstitutiveReport {
  std::vector<ConstitutiveViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Samples every constitutive function on [lo, hi] and collects violations
/// of nonnegativity, growth and positivity bounds. With `potential_relation`
/// set, additionally checks F(s) = beta * G(s).
inline ConstitutiveReport validate_constitutive(const ConstitutiveSet& set, double lo, double hi,
                                                int samples,
                                                std::optional<double> potential_relation = {}) {
  if (samples < 2) throw std::invalid_argument("validate_constitutive needs at least 2 samples");
  if (!(hi >= lo)) throw std::invalid_argument("validate_constitutive needs lo <= hi");
  ConstitutiveReport report;
  auto add = [&](std::string fn, double s, double v, std::string bound) {
    report.violations.push_back({std::move(fn), s, v, std::move(bound)});
  };
  auto check_potential = [&](const char* name, const Potential& p, double s) {
    const double v = p.value(s);
    if (v < 0.0) add(name, s, v, ">= 0");
    const double bound = p.growth_constant * (1.0 + std::pow(std::abs(s), p.growth_exponent - 2));
    const double second = p.second(s);
    if (std::abs(second) > bound) add(std::string(name) + "''", s, second, "growth");
  };
  auto check_bounded = [&](const char* name, const BoundedCoefficient& c, double s) {
    const double v = c.raw(s);
    if (!(v >= c.lower())) add(name, s, v, ">= " + std::to_string(c.lower()));
    if (!(v <= c.upper())) add(name, s, v, "<= " + std::to_string(c.upper()));
  };
  for (int k = 0; k < samples; ++k) {
    const double s = lo + (hi - lo) * k / (samples - 1);
    check_potential("F", set.bulk_potential, s);
    check_potential("G", set.surface_potential, s);
    check_bounded("m_bulk", set.bulk_mobility, s);
    check_bounded("m_surface", set.surface_mobility, s);
    check_bounded("viscosity", set.viscosity, s);
    check_bounded("friction", set.friction, s);
    if (potential_relation) {
      const double f = set.bulk_potential.value(s);
      const double g = *potential_relation * set.surface_potential.value(s);
      if (std::abs(f - g) > 1e-12 * (1.0 + std::abs(f))) add("F - beta G", s, f - g, "== 0");
    }
  }
  return report;
}

}  // namespace nsch
