#pragma once

// INI-style run configuration.
//
//   [section]
//   key = value   # comment
//
// Sections: grid, model, constitutive, init, output, verify, audit.
// Unknown sections or keys are errors; every error names the line and key.

#include "nsch/coupler.hpp"
#include "nsch/galerkin.hpp"
#include "nsch/grid.hpp"
#include "nsch/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nsch {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string key, const std::string& message)
      : std::runtime_error(format(line, key, message)), line_(line), key_(std::move(key)) {}
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(int line, const std::string& key, const std::string& message) {
    std::string s = line > 0 ? "line " + std::to_string(line) + ": " : std::string();
    if (!key.empty()) s += key + ": ";
    return s + message;
  }
  int line_;
  std::string key_;
};

struct SpinodalInit {
  std::uint64_t seed = 42;
  double amplitude = 0.05;
};
struct StripeInit {
  double y0 = 0.5;
  double width = 0.5;
};
struct ConstantInit {
  double value = 0.0;
};
using PhaseInit = std::variant<SpinodalInit, StripeInit, ConstantInit>;

struct ZeroVelocity {};
struct UniformVelocity {
  double u = 0.0;
};
using VelocityInit = std::variant<ZeroVelocity, UniformVelocity>;

struct OutputSettings {
  std::string directory = "output";
  bool csv = true;
  bool vtk = true;
  bool wall = true;
  /// Steps between diagnostics rows (0: initial and final rows only).
  int every = 100;
  /// Steps between field snapshots (0: initial and final snapshots only).
  int snapshot_every = 0;
};

struct VerifySettings {
  int k = 8;
  double tol = 1e-8;
  double t_end = 0.1;
};

struct AuditSettings {
  /// Tolerance on R_n and on per-step energy increase, relative to 1 + E(0).
  double energy_tol = 1e-8;
  /// Mass-law tolerance relative to 1 + |initial mass|.
  double mass_tol = 1e-9;
  /// Post-projection divergence bound.
  double divergence_tol = 1e-8;
};

struct RunConfig {
  double lx = 1.0, ly = 1.0;
  int nx = 0, ny = 0;
  ModelParams model;
  ConstitutiveSet consts;
  /// Set when F = βG is asserted for the constitutive set.
  bool potential_relation = false;
  PhaseInit phase_init = SpinodalInit{};
  VelocityInit velocity_init = ZeroVelocity{};
  OutputSettings output;
  VerifySettings verify;
  AuditSettings audit;

  ChannelGrid grid() const { return ChannelGrid(lx, ly, nx, ny); }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

struct Entry {
  std::string value;
  int line;
};

class Reader {
 public:
  Reader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const Entry& entry(const std::string& key) const { return entries_.at(key); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const Entry& e = entry(key);
    return parse_double(e.value, e.line, key);
  }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const Entry& e = entry(key);
    long long v = 0;
    const char* end = e.value.data() + e.value.size();
    auto [p, ec] = std::from_chars(e.value.data(), end, v);
    if (ec != std::errc() || p != end) throw ConfigError(e.line, key, "expected an integer, got '" + e.value + "'");
    return v;
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? entry(key).value : fallback;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const Entry& e = entry(key);
    if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
    if (e.value == "false" || e.value == "no" || e.value == "0") return false;
    throw ConfigError(e.line, key, "expected true or false, got '" + e.value + "'");
  }

  int line(const std::string& key) const { return has(key) ? entry(key).line : 0; }

  static double parse_double(const std::string& s, int line, const std::string& key) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v))
      throw ConfigError(line, key, "expected a number, got '" + s + "'");
    return v;
  }

  std::vector<double> numbers(const std::string& list, int line, const std::string& key) const {
    std::vector<double> out;
    for (const auto& part : split(list, ',')) out.push_back(parse_double(part, line, key));
    return out;
  }

 private:
  std::map<std::string, Entry> entries_;
};

inline const std::map<std::string, std::vector<std::string>>& schema() {
  static const std::map<std::string, std::vector<std::string>> s{
      {"grid", {"lx", "ly", "nx", "ny"}},
      {"model",
       {"eps", "delta", "kappa", "beta", "coupling", "stabilization", "dt", "t_end", "output_every",
        "require_positive_kappa"}},
      {"constitutive",
       {"potential", "surface_potential", "potential_relation", "bulk_mobility", "bulk_mobility_bounds",
        "surface_mobility", "surface_mobility_bounds", "viscosity", "viscosity_bounds", "friction",
        "friction_bounds"}},
      {"init", {"phase", "velocity"}},
      {"output", {"directory", "formats", "snapshot_every"}},
      {"verify", {"k", "tol", "t_end"}},
      {"audit", {"energy_tol", "mass_tol", "divergence_tol"}},
  };
  return s;
}

/// Potential from "double_well" or "poly:c0,c1,...". The growth exponent is
/// the degree; the growth constant bounds |W''| by Σ k(k-1)|c_k| (1 + |s|^(p-2)).
inline Potential parse_potential(const Reader& r, const std::string& key) {
  const std::string v = r.text(key, "double_well");
  if (v == "double_well") return Potential::double_well();
  if (v.rfind("poly:", 0) == 0) {
    const std::vector<double> c = r.numbers(v.substr(5), r.line(key), key);
    Polynomial p(c);
    const int degree = p.degree();
    if (degree < 2) throw ConfigError(r.line(key), key, "polynomial potential needs degree >= 2");
    double bound = 0.0;
    for (int k = 2; k <= degree; ++k) bound += k * (k - 1) * std::abs(p.coeffs()[k]);
    return Potential::from(std::move(p), degree, bound);
  }
  throw ConfigError(r.line(key), key, "expected double_well or poly:<coefficients>");
}

/// Coefficient from "<value>" or "poly:c0,c1,..." with bounds "lower,upper".
inline BoundedCoefficient parse_coefficient(const Reader& r, const std::string& key, double fallback) {
  const std::string v = r.text(key, "");
  const std::string bkey = key + "_bounds";
  std::optional<std::pair<double, double>> bounds;
  if (r.has(bkey)) {
    const auto b = r.numbers(r.entry(bkey).value, r.line(bkey), bkey);
    if (b.size() != 2) throw ConfigError(r.line(bkey), bkey, "expected lower,upper");
    bounds = {b[0], b[1]};
  }
  try {
    if (v.empty() || v.rfind("poly:", 0) != 0) {
      const double c = v.empty() ? fallback : Reader::parse_double(v, r.line(key), key);
      if (!(c > 0.0)) throw ConfigError(r.line(key), key, "must be positive");
      if (bounds) return BoundedCoefficient(Polynomial::constant(c), bounds->first, bounds->second);
      return BoundedCoefficient(c);
    }
    if (!bounds) throw ConfigError(r.line(key), key, "polynomial coefficients need " + bkey);
    return BoundedCoefficient(Polynomial(r.numbers(v.substr(5), r.line(key), key)), bounds->first,
                              bounds->second);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(r.line(bkey) ? r.line(bkey) : r.line(key), bkey, e.what());
  }
}

inline Coupling parse_coupling(const Reader& r) {
  const std::string key = "model.coupling";
  const std::string v = r.text(key, "dirichlet");
  if (v == "dirichlet") return Dirichlet{};
  if (v == "neumann") return Neumann{};
  if (v.rfind("robin:", 0) == 0) {
    const double length = Reader::parse_double(trim(v.substr(6)), r.line(key), key);
    if (!(length > 0.0)) throw ConfigError(r.line(key), key, "Robin length must be positive");
    return Robin{length};
  }
  throw ConfigError(r.line(key), key, "expected dirichlet, neumann or robin:<L>");
}

inline PhaseInit parse_phase_init(const Reader& r) {
  const std::string key = "init.phase";
  const std::string v = r.text(key, "spinodal:42,0.05");
  const auto colon = v.find(':');
  const std::string kind = v.substr(0, colon);
  const std::string args = colon == std::string::npos ? std::string() : v.substr(colon + 1);
  const int line = r.line(key);
  if (kind == "spinodal") {
    const auto parts = split(args, ',');
    if (parts.size() != 2) throw ConfigError(line, key, "expected spinodal:<seed>,<amplitude>");
    std::uint64_t seed = 0;
    auto [p, ec] = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), seed);
    if (ec != std::errc() || p != parts[0].data() + parts[0].size())
      throw ConfigError(line, key, "seed must be an unsigned 64-bit integer");
    const double amp = Reader::parse_double(parts[1], line, key);
    if (amp < 0.0) throw ConfigError(line, key, "amplitude must be nonnegative");
    return SpinodalInit{seed, amp};
  }
  if (kind == "stripe") {
    const auto c = r.numbers(args, line, key);
    if (c.size() != 2 || !(c[1] > 0.0)) throw ConfigError(line, key, "expected stripe:<y0>,<width> with width > 0");
    return StripeInit{c[0], c[1]};
  }
  if (kind == "constant") return ConstantInit{Reader::parse_double(args, line, key)};
  throw ConfigError(line, key, "expected spinodal:<seed>,<amp>, stripe:<y0>,<width> or constant:<value>");
}

inline VelocityInit parse_velocity_init(const Reader& r) {
  const std::string key = "init.velocity";
  const std::string v = r.text(key, "zero");
  if (v == "zero") return ZeroVelocity{};
  if (v.rfind("uniform:", 0) == 0) return UniformVelocity{Reader::parse_double(trim(v.substr(8)), r.line(key), key)};
  throw ConfigError(r.line(key), key, "expected zero or uniform:<U>");
}

}  // namespace config_detail

inline RunConfig parse_config(const std::string& text) {
  using namespace config_detail;
  std::map<std::string, Entry> entries;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "", "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!schema().count(section)) throw ConfigError(line_no, section, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "", "expected key = value");
    if (section.empty()) throw ConfigError(line_no, trim(line.substr(0, eq)), "key outside of a section");
    const std::string name = trim(line.substr(0, eq));
    const std::string key = section + "." + name;
    const auto& allowed = schema().at(section);
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end())
      throw ConfigError(line_no, key, "unknown key");
    if (entries.count(key)) throw ConfigError(line_no, key, "duplicate key");
    const std::string value = trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(line_no, key, "missing value");
    entries[key] = {value, line_no};
  }

  Reader r(std::move(entries));
  RunConfig c;
  for (const char* key : {"grid.nx", "grid.ny"})
    if (!r.has(key)) throw ConfigError(0, key, "required key is missing");
  c.lx = r.number("grid.lx", 1.0);
  c.ly = r.number("grid.ly", 1.0);
  const long long nx = r.integer("grid.nx", 0), ny = r.integer("grid.ny", 0);
  if (nx < 4 || nx > 1 << 20) throw ConfigError(r.line("grid.nx"), "grid.nx", "must be at least 4");
  if (ny < 4 || ny > 1 << 20) throw ConfigError(r.line("grid.ny"), "grid.ny", "must be at least 4");
  c.nx = static_cast<int>(nx);
  c.ny = static_cast<int>(ny);
  if (!(c.lx > 0.0)) throw ConfigError(r.line("grid.lx"), "grid.lx", "must be positive");
  if (!(c.ly > 0.0)) throw ConfigError(r.line("grid.ly"), "grid.ly", "must be positive");

  ModelParams& m = c.model;
  m.eps = r.number("model.eps", 1.0);
  m.delta = r.number("model.delta", 1.0);
  m.kappa = r.number("model.kappa", 1.0);
  m.beta = r.number("model.beta", 1.0);
  m.coupling = parse_coupling(r);
  m.stabilization = r.number("model.stabilization", 2.0);
  m.dt = r.number("model.dt", 1e-4);
  m.t_end = r.number("model.t_end", 1.0);
  m.require_positive_kappa = r.flag("model.require_positive_kappa", false);
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    const std::string key = what.substr(0, what.find(':'));
    throw ConfigError(r.line(key), key, what.substr(what.find(':') + 2));
  }
  const long long every = r.integer("model.output_every", 100);
  if (every < 0) throw ConfigError(r.line("model.output_every"), "model.output_every", "must be nonnegative");
  c.output.every = static_cast<int>(every);

  ConstitutiveSet& k = c.consts;
  k.bulk_potential = parse_potential(r, "constitutive.potential");
  k.surface_potential = r.has("constitutive.surface_potential")
                            ? parse_potential(r, "constitutive.surface_potential")
                            : k.bulk_potential;
  k.bulk_mobility = parse_coefficient(r, "constitutive.bulk_mobility", 1.0);
  k.surface_mobility = parse_coefficient(r, "constitutive.surface_mobility", 1.0);
  k.viscosity = parse_coefficient(r, "constitutive.viscosity", 1.0);
  k.friction = parse_coefficient(r, "constitutive.friction", 1.0);
  c.potential_relation = r.flag("constitutive.potential_relation", false);
  if (c.potential_relation) {
    const auto rep = validate_constitutive(k, -3.0, 3.0, 121, m.beta);
    for (const auto& v : rep.violations)
      if (v.function == "F - beta G")
        throw ConfigError(r.line("constitutive.potential_relation"), "constitutive.potential_relation",
                          "F differs from beta * G at s = " + std::to_string(v.s));
  }

  c.phase_init = parse_phase_init(r);
  c.velocity_init = parse_velocity_init(r);

  c.output.directory = r.text("output.directory", "output");
  if (r.has("output.formats")) {
    c.output.csv = c.output.vtk = c.output.wall = false;
    for (const auto& f : split(r.text("output.formats", ""), ',')) {
      if (f == "csv") c.output.csv = true;
      else if (f == "vtk") c.output.vtk = true;
      else if (f == "wall") c.output.wall = true;
      else throw ConfigError(r.line("output.formats"), "output.formats", "unknown format '" + f + "'");
    }
  }
  const long long snap = r.integer("output.snapshot_every", 0);
  if (snap < 0) throw ConfigError(r.line("output.snapshot_every"), "output.snapshot_every", "must be nonnegative");
  c.output.snapshot_every = static_cast<int>(snap);

  const long long kv = r.integer("verify.k", 8);
  if (kv < 1 || kv > kMaxGalerkinModes) throw ConfigError(r.line("verify.k"), "verify.k", "must be in [1, 16]");
  c.verify.k = static_cast<int>(kv);
  c.verify.tol = r.number("verify.tol", 1e-8);
  if (c.verify.tol < 0.0) throw ConfigError(r.line("verify.tol"), "verify.tol", "must be nonnegative");
  c.verify.t_end = r.number("verify.t_end", 0.1);
  if (!(c.verify.t_end > 0.0)) throw ConfigError(r.line("verify.t_end"), "verify.t_end", "must be positive");

  c.audit.energy_tol = r.number("audit.energy_tol", 1e-8);
  c.audit.mass_tol = r.number("audit.mass_tol", 1e-9);
  c.audit.divergence_tol = r.number("audit.divergence_tol", 1e-8);
  for (const char* key : {"audit.energy_tol", "audit.mass_tol", "audit.divergence_tol"})
    if (r.number(key, 1.0) < 0.0) throw ConfigError(r.line(key), key, "must be nonnegative");
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline PhasePair initial_phase(const PhaseInit& init, const ModelParams& params, const ChannelGrid& g) {
  if (const auto* s = std::get_if<SpinodalInit>(&init)) return spinodal_phase(s->seed, s->amplitude, g);
  if (const auto* s = std::get_if<StripeInit>(&init)) return stripe_phase(s->y0, s->width, params.eps, g);
  return PhasePair::constant(g, std::get<ConstantInit>(init).value);
}

inline FaceVector initial_velocity(const VelocityInit& init, const ChannelGrid& g) {
  FaceVector v(g);
  if (const auto* u = std::get_if<UniformVelocity>(&init)) v.u.setConstant(u->u);
  return v;
}

}  // namespace nsch
