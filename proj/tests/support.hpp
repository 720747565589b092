#pragma once

// Test helpers: random fields and divergence-free velocities.

#include "nsch/fields.hpp"
#include "nsch/grid.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace nsch::testing {

inline BulkField random_bulk(std::mt19937_64& rng, const ChannelGrid& g, double amp = 1.0) {
  std::uniform_real_distribution<double> d(-amp, amp);
  BulkField f(g);
  for (Eigen::Index k = 0; k < f.size(); ++k) f.values()[k] = d(rng);
  return f;
}

inline WallField random_wall(std::mt19937_64& rng, const ChannelGrid& g, double amp = 1.0) {
  std::uniform_real_distribution<double> d(-amp, amp);
  WallField s(g);
  for (Wall w : kWalls)
    for (int i = 0; i < g.nx(); ++i) s(w, i) = d(rng);
  return s;
}

/// Streamfunction on cell corners (i hx, j hy), constant along each wall.
/// u = ∂_y s, v = -∂_x s is discretely divergence-free with v = 0 on the walls.
inline FaceVector from_streamfunction(const std::vector<double>& s, const ChannelGrid& g) {
  const int nx = g.nx(), ny = g.ny();
  auto at = [&](int i, int j) { return s[static_cast<std::size_t>(((i % nx) + nx) % nx + nx * j)]; };
  FaceVector f(g);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) f.U(i, j) = (at(i, j + 1) - at(i, j)) / g.hy();
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) f.V(i, j) = -(at(i + 1, j) - at(i, j)) / g.hx();
  return f;
}

inline FaceVector random_divergence_free(std::mt19937_64& rng, const ChannelGrid& g, double amp = 1.0) {
  std::uniform_real_distribution<double> d(-amp, amp);
  const int nx = g.nx(), ny = g.ny();
  std::vector<double> s(static_cast<std::size_t>(nx) * (ny + 1), 0.0);
  const double top = d(rng) * g.ly();
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) s[static_cast<std::size_t>(i + nx * j)] = d(rng) * g.hy();
  for (int i = 0; i < nx; ++i) s[static_cast<std::size_t>(i + nx * ny)] = top;
  return from_streamfunction(s, g);
}

/// Random face field with zero wall-normal velocity (not divergence-free).
inline FaceVector random_faces(std::mt19937_64& rng, const ChannelGrid& g, double amp = 1.0) {
  std::uniform_real_distribution<double> d(-amp, amp);
  FaceVector f(g);
  for (Eigen::Index k = 0; k < f.u.size(); ++k) f.u[k] = d(rng);
  for (int j = 1; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) f.V(i, j) = d(rng);
  return f;
}

inline double max_abs(const BulkField& f) { return f.values().cwiseAbs().maxCoeff(); }
inline double max_abs(const WallField& s) {
  return std::max(s.side(Wall::bottom).cwiseAbs().maxCoeff(), s.side(Wall::top).cwiseAbs().maxCoeff());
}

inline double order(double coarse, double fine) { return std::log2(coarse / fine); }

}  // namespace nsch::testing
