#pragma once

// Diagnostics CSV, legacy-ASCII VTK snapshots (with a reader), and wall
// profile CSV. Floating-point values are written with 17 significant digits
// so every value reads back bit-identically.

#include "nsch/coupler.hpp"
#include "nsch/fields.hpp"
#include "nsch/grid.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsch {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kDiagnosticsHeader =
    "t,E_kin,E_bulk,E_surf,E_total,M_bulk,M_surf,M_weighted,D_visc,D_fric,D_bulk,D_surf,D_robin";

inline std::string diagnostics_row(const DiagnosticsRecord& r) {
  const double v[] = {r.t,      r.E_kin,  r.E_bulk,     r.E_surf,  r.E_total, r.M_bulk, r.M_surf,
                      r.M_weighted, r.D_visc, r.D_fric, r.D_bulk, r.D_surf, r.D_robin};
  std::string s;
  for (std::size_t k = 0; k < std::size(v); ++k) {
    if (k) s += ',';
    s += format_double(v[k]);
  }
  return s;
}

class DiagnosticsWriter {
 public:
  explicit DiagnosticsWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
    out_ << kDiagnosticsHeader << '\n';
  }
  void write(const DiagnosticsRecord& r) {
    out_ << diagnostics_row(r) << '\n';
    if (!out_) throw IoError("write to diagnostics file failed");
  }
  void close() {
    out_.close();
    if (out_.fail()) throw IoError("closing diagnostics file failed");
  }

 private:
  std::ofstream out_;
};

/// Cell-centered snapshot data.
struct Snapshot {
  int nx = 0, ny = 0;
  std::vector<double> x, y;                     // point coordinates
  std::map<std::string, std::vector<double>> scalars;
  std::map<std::string, std::vector<double>> vectors;  // 3 components per point
};

inline Snapshot make_snapshot(const SimState& s, const ChannelGrid& g) {
  Snapshot snap;
  snap.nx = g.nx();
  snap.ny = g.ny();
  const std::size_t n = static_cast<std::size_t>(g.cells());
  snap.x.resize(n);
  snap.y.resize(n);
  std::vector<double> vel(3 * n, 0.0);
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = static_cast<std::size_t>(g.index(i, j));
      snap.x[k] = g.xc(i);
      snap.y[k] = g.yc(j);
      vel[3 * k] = 0.5 * (s.flow.vel.U(i, j) + s.flow.vel.U(i + 1, j));
      vel[3 * k + 1] = 0.5 * (s.flow.vel.V(i, j) + s.flow.vel.V(i, j + 1));
    }
  }
  auto copy = [](const BulkField& f) { return std::vector<double>(f.values().data(), f.values().data() + f.size()); };
  snap.scalars["phi"] = copy(s.phase.phi);
  snap.scalars["mu"] = copy(s.chem.mu);
  snap.scalars["p"] = copy(s.flow.p);
  snap.vectors["velocity"] = std::move(vel);
  return snap;
}

inline void write_vtk(const std::string& path, const Snapshot& s, const std::string& title) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const std::size_t n = s.x.size();
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET STRUCTURED_GRID\n";
  out << "DIMENSIONS " << s.nx << ' ' << s.ny << " 1\n";
  out << "POINTS " << n << " double\n";
  for (std::size_t k = 0; k < n; ++k)
    out << format_double(s.x[k]) << ' ' << format_double(s.y[k]) << " 0\n";
  out << "POINT_DATA " << n << '\n';
  for (const auto& [name, values] : s.scalars) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : values) out << format_double(v) << '\n';
  }
  for (const auto& [name, values] : s.vectors) {
    out << "VECTORS " << name << " double\n";
    for (std::size_t k = 0; k < n; ++k)
      out << format_double(values[3 * k]) << ' ' << format_double(values[3 * k + 1]) << ' '
          << format_double(values[3 * k + 2]) << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline Snapshot read_vtk(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  for (int k = 0; k < 4; ++k) std::getline(in, line);
  if (line != "DATASET STRUCTURED_GRID") throw IoError(path + ": not a structured-grid VTK file");
  Snapshot s;
  std::string word;
  std::size_t n = 0;
  auto number = [&]() {
    if (!(in >> word)) throw IoError(path + ": unexpected end of file");
    char* end = nullptr;
    const double v = std::strtod(word.c_str(), &end);
    if (end != word.c_str() + word.size()) throw IoError(path + ": bad number '" + word + "'");
    return v;
  };
  while (in >> word) {
    if (word == "DIMENSIONS") {
      int nz = 0;
      in >> s.nx >> s.ny >> nz;
    } else if (word == "POINTS") {
      in >> n >> word;
      s.x.resize(n);
      s.y.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        s.x[k] = number();
        s.y[k] = number();
        number();
      }
    } else if (word == "POINT_DATA") {
      in >> n;
    } else if (word == "SCALARS") {
      std::string name, type;
      int comps = 1;
      in >> name >> type >> comps >> word >> word;  // LOOKUP_TABLE default
      auto& v = s.scalars[name];
      v.resize(n);
      for (auto& x : v) x = number();
    } else if (word == "VECTORS") {
      std::string name, type;
      in >> name >> type;
      auto& v = s.vectors[name];
      v.resize(3 * n);
      for (auto& x : v) x = number();
    } else {
      throw IoError(path + ": unexpected token '" + word + "'");
    }
  }
  return s;
}

/// Wall profiles: x, then (psi, theta, mu_wall, u_wall) on the bottom and top walls.
inline void write_wall_profile(const std::string& path, const SimState& s, const ChannelGrid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "x,psi_bottom,theta_bottom,mu_wall_bottom,u_wall_bottom,psi_top,theta_top,mu_wall_top,u_wall_top\n";
  for (int i = 0; i < g.nx(); ++i) {
    out << format_double(g.xc(i));
    for (Wall w : kWalls) {
      // Slip velocity interpolated from the face positions to the wall node.
      const double uw = 0.5 * (s.flow.u_wall(w, i) + s.flow.u_wall.at(w, i + 1));
      for (double v : {s.phase.psi(w, i), s.chem.theta(w, i), s.chem.mu_wall(w, i), uw})
        out << ',' << format_double(v);
    }
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace nsch
