#pragma once

// State containers shared by the Cahn-Hilliard and Navier-Stokes steppers.

#include "nsch/grid.hpp"

#include <algorithm>
#include <optional>

namespace nsch {

/// Bulk phase field and its wall counterpart; the wall values are the trace.
struct PhasePair {
  BulkField phi;
  WallField psi;

  static PhasePair constant(const ChannelGrid& g, double value) {
    return {BulkField(g, value), WallField(g, value)};
  }
};

struct ChemPair {
  BulkField mu;
  WallField theta;
  /// Wall value of mu implied by the coupling closure (mu|Γ).
  WallField mu_wall;

  static ChemPair zero(const ChannelGrid& g) { return {BulkField(g), WallField(g), WallField(g)}; }
};

/// Staggered velocity components.
///   u(i, j): x-velocity on the vertical face x = i hx, row j    (nx * ny)
///   v(i, j): y-velocity on the horizontal face y = j hy, column i (nx * (ny + 1))
/// Rows j = 0 and j = ny of v are the walls and stay zero.
struct FaceVector {
  int nx = 0, ny = 0;
  Eigen::VectorXd u, v;

  FaceVector() = default;
  explicit FaceVector(const ChannelGrid& g)
      : nx(g.nx()), ny(g.ny()),
        u(Eigen::VectorXd::Zero(Eigen::Index(g.nx()) * g.ny())),
        v(Eigen::VectorXd::Zero(Eigen::Index(g.nx()) * (g.ny() + 1))) {}

  double& U(int i, int j) { return u[((i % nx) + nx) % nx + nx * j]; }
  double U(int i, int j) const { return u[((i % nx) + nx) % nx + nx * j]; }
  double& V(int i, int j) { return v[((i % nx) + nx) % nx + nx * j]; }
  double V(int i, int j) const { return v[((i % nx) + nx) % nx + nx * j]; }

  FaceVector& operator+=(const FaceVector& o) { u += o.u; v += o.v; return *this; }
  FaceVector& operator-=(const FaceVector& o) { u -= o.u; v -= o.v; return *this; }
  FaceVector& operator*=(double s) { u *= s; v *= s; return *this; }

  double max_abs() const {
    return std::max(u.size() ? u.cwiseAbs().maxCoeff() : 0.0, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
  }
};

inline FaceVector operator+(FaceVector a, const FaceVector& b) { return a += b; }
inline FaceVector operator-(FaceVector a, const FaceVector& b) { return a -= b; }
inline FaceVector operator*(double s, FaceVector a) { return a *= s; }

struct FlowState {
  FaceVector vel;
  BulkField p;
  /// Tangential slip velocity on each wall at the u-face positions x = i hx.
  WallField u_wall;
  /// Advection term of the previous step (second-order extrapolation).
  std::optional<FaceVector> advection_prev;

  static FlowState rest(const ChannelGrid& g) {
    return {FaceVector(g), BulkField(g), WallField(g), std::nullopt};
  }
};

}  // namespace nsch
