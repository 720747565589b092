#pragma once

// Periodic channel geometry, field layouts and the finite-difference
// operators shared by every solver in the library.
//
// Layout: cell (i, j) has center ((i + 1/2) hx, (j + 1/2) hy), stored at
// flat index i + nx * j. Each wall carries nx nodes located at the x
// positions of the cell centers. Wall traces close the bulk stencils
// through a ghost cell whose linear interpolant with the adjacent interior
// value reproduces the trace: ghost = 2 * trace - interior.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nsch {

enum class Wall : int { bottom = 0, top = 1 };

inline constexpr std::array<Wall, 2> kWalls{Wall::bottom, Wall::top};

class ChannelGrid {
 public:
  ChannelGrid(double lx, double ly, int nx, int ny)
      : lx_(lx), ly_(ly), nx_(nx), ny_(ny) {
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
      throw std::invalid_argument("channel lengths must be positive and finite");
    }
    if (nx < 4 || ny < 4) {
      throw std::invalid_argument("channel grid needs at least 4 cells per direction, got " +
                                  std::to_string(nx) + "x" + std::to_string(ny));
    }
    hx_ = lx / nx;
    hy_ = ly / ny;
  }

  double lx() const { return lx_; }
  double ly() const { return ly_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  int cells() const { return nx_ * ny_; }

  double area() const { return lx_ * ly_; }
  /// Total boundary length |Γ| (both walls).
  double boundary_length() const { return 2.0 * lx_; }

  double xc(int i) const { return (i + 0.5) * hx_; }
  double yc(int j) const { return (j + 0.5) * hy_; }
  double wall_y(Wall w) const { return w == Wall::bottom ? 0.0 : ly_; }
  /// Row index of the cell layer adjacent to a wall.
  int wall_row(Wall w) const { return w == Wall::bottom ? 0 : ny_ - 1; }

  int wrap(int i) const { return ((i % nx_) + nx_) % nx_; }
  int index(int i, int j) const { return wrap(i) + nx_ * j; }

  bool operator==(const ChannelGrid& o) const {
    return lx_ == o.lx_ && ly_ == o.ly_ && nx_ == o.nx_ && ny_ == o.ny_;
  }

 private:
  double lx_, ly_;
  int nx_, ny_;
  double hx_ = 0.0, hy_ = 0.0;
};

inline ChannelGrid build_grid(double lx, double ly, int nx, int ny) {
  return ChannelGrid(lx, ly, nx, ny);
}

/// Scalar values at the nx*ny cell centers.
class BulkField {
 public:
  BulkField() = default;
  BulkField(int nx, int ny, double fill = 0.0)
      : nx_(nx), ny_(ny), values_(Eigen::VectorXd::Constant(Eigen::Index(nx) * ny, fill)) {}
  explicit BulkField(const ChannelGrid& g, double fill = 0.0) : BulkField(g.nx(), g.ny(), fill) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  Eigen::Index size() const { return values_.size(); }

  double& operator()(int i, int j) { return values_[i + nx_ * j]; }
  double operator()(int i, int j) const { return values_[i + nx_ * j]; }
  /// Periodic access in x.
  double at(int i, int j) const { return values_[((i % nx_) + nx_) % nx_ + nx_ * j]; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  bool matches(const ChannelGrid& g) const { return nx_ == g.nx() && ny_ == g.ny(); }

  BulkField& operator+=(const BulkField& o) { values_ += o.values_; return *this; }
  BulkField& operator-=(const BulkField& o) { values_ -= o.values_; return *this; }
  BulkField& operator*=(double s) { values_ *= s; return *this; }

  template <class Fn>
  static BulkField sample(const ChannelGrid& g, Fn&& fn) {
    BulkField f(g);
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) f(i, j) = fn(g.xc(i), g.yc(j));
    return f;
  }

 private:
  int nx_ = 0, ny_ = 0;
  Eigen::VectorXd values_;
};

/// Scalar values at the nx nodes of both walls.
class WallField {
 public:
  WallField() = default;
  explicit WallField(int nx, double fill = 0.0)
      : nx_(nx),
        sides_{Eigen::VectorXd::Constant(nx, fill), Eigen::VectorXd::Constant(nx, fill)} {}
  explicit WallField(const ChannelGrid& g, double fill = 0.0) : WallField(g.nx(), fill) {}

  int nx() const { return nx_; }

  Eigen::VectorXd& side(Wall w) { return sides_[static_cast<int>(w)]; }
  const Eigen::VectorXd& side(Wall w) const { return sides_[static_cast<int>(w)]; }

  double& operator()(Wall w, int i) { return sides_[static_cast<int>(w)][i]; }
  double operator()(Wall w, int i) const { return sides_[static_cast<int>(w)][i]; }
  double at(Wall w, int i) const { return sides_[static_cast<int>(w)][((i % nx_) + nx_) % nx_]; }

  bool matches(const ChannelGrid& g) const { return nx_ == g.nx(); }

  WallField& operator+=(const WallField& o) {
    for (Wall w : kWalls) side(w) += o.side(w);
    return *this;
  }
  WallField& operator-=(const WallField& o) {
    for (Wall w : kWalls) side(w) -= o.side(w);
    return *this;
  }
  WallField& operator*=(double s) {
    for (Wall w : kWalls) side(w) *= s;
    return *this;
  }

  template <class Fn>
  static WallField sample(const ChannelGrid& g, Fn&& fn) {
    WallField f(g);
    for (Wall w : kWalls)
      for (int i = 0; i < g.nx(); ++i) f(w, i) = fn(g.xc(i), g.wall_y(w));
    return f;
  }

 private:
  int nx_ = 0;
  std::array<Eigen::VectorXd, 2> sides_;
};

inline BulkField operator+(BulkField a, const BulkField& b) { return a += b; }
inline BulkField operator-(BulkField a, const BulkField& b) { return a -= b; }
inline BulkField operator*(double s, BulkField a) { return a *= s; }
inline WallField operator+(WallField a, const WallField& b) { return a += b; }
inline WallField operator-(WallField a, const WallField& b) { return a -= b; }
inline WallField operator*(double s, WallField a) { return a *= s; }

namespace detail {

inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

inline void check_shapes(const BulkField& f, const WallField& trace, const ChannelGrid& g) {
  require(f.matches(g), "bulk field does not match grid");
  require(trace.matches(g), "wall field does not match grid");
}

/// Outward sign of the y-direction at a wall.
inline double outward(Wall w) { return w == Wall::bottom ? -1.0 : 1.0; }

}  // namespace detail

/// Ghost value below/above the wall that closes the stencil for `trace`.
inline double ghost_value(const BulkField& f, const WallField& trace, const ChannelGrid& g,
                          Wall w, int i) {
  return 2.0 * trace(w, i) - f(i, g.wall_row(w));
}

/// Five-point Laplacian, periodic in x, ghost-closed at both walls.
inline BulkField bulk_laplacian(const BulkField& f, const WallField& trace, const ChannelGrid& g) {
  detail::check_shapes(f, trace, g);
  const int nx = g.nx(), ny = g.ny();
  const double ihx2 = 1.0 / (g.hx() * g.hx()), ihy2 = 1.0 / (g.hy() * g.hy());
  BulkField out(g);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double c = f(i, j);
      const double south = j > 0 ? f(i, j - 1) : ghost_value(f, trace, g, Wall::bottom, i);
      const double north = j < ny - 1 ? f(i, j + 1) : ghost_value(f, trace, g, Wall::top, i);
      out(i, j) = (f.at(i - 1, j) - 2.0 * c + f.at(i + 1, j)) * ihx2 +
                  (south - 2.0 * c + north) * ihy2;
    }
  }
  return out;
}

/// Periodic three-point second difference on each wall.
inline WallField surface_laplacian(const WallField& s, const ChannelGrid& g) {
  detail::require(s.matches(g), "wall field does not match grid");
  const double ihx2 = 1.0 / (g.hx() * g.hx());
  WallField out(g);
  for (Wall w : kWalls)
    for (int i = 0; i < g.nx(); ++i)
      out(w, i) = (s.at(w, i - 1) - 2.0 * s(w, i) + s.at(w, i + 1)) * ihx2;
  return out;
}

/// Outward normal derivative implied by the ghost closure: the flux the
/// bulk Laplacian sees through the wall face, 2 (trace - interior) / hy.
/// This is the discrete adjoint of the trace in the summation-by-parts
/// identity, so every coupled operator uses it.
inline WallField wall_flux(const BulkField& f, const WallField& trace, const ChannelGrid& g) {
  detail::check_shapes(f, trace, g);
  WallField out(g);
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < g.nx(); ++i) out(w, i) = 2.0 * (trace(w, i) - f(i, j)) / g.hy();
  }
  return out;
}

/// Second-order one-sided outward normal derivative from the trace and the
/// two nearest cell layers: (8 trace - 9 f_1 + f_2) / (3 hy).
inline WallField normal_derivative(const BulkField& f, const WallField& trace,
                                   const ChannelGrid& g) {
  detail::check_shapes(f, trace, g);
  WallField out(g);
  for (Wall w : kWalls) {
    const int j1 = g.wall_row(w);
    const int j2 = w == Wall::bottom ? 1 : g.ny() - 2;
    for (int i = 0; i < g.nx(); ++i)
      out(w, i) = (8.0 * trace(w, i) - 9.0 * f(i, j1) + f(i, j2)) / (3.0 * g.hy());
  }
  return out;
}

// Midpoint-rule quadratures.

inline double quadrature(const BulkField& f, const ChannelGrid& g) {
  detail::require(f.matches(g), "bulk field does not match grid");
  return f.values().sum() * g.hx() * g.hy();
}

inline double quadrature(const WallField& s, const ChannelGrid& g, Wall w) {
  detail::require(s.matches(g), "wall field does not match grid");
  return s.side(w).sum() * g.hx();
}

inline double quadrature(const WallField& s, const ChannelGrid& g) {
  return quadrature(s, g, Wall::bottom) + quadrature(s, g, Wall::top);
}

inline double inner(const BulkField& a, const BulkField& b, const ChannelGrid& g) {
  return a.values().dot(b.values()) * g.hx() * g.hy();
}

inline double inner(const WallField& a, const WallField& b, const ChannelGrid& g) {
  return (a.side(Wall::bottom).dot(b.side(Wall::bottom)) + a.side(Wall::top).dot(b.side(Wall::top))) *
         g.hx();
}

/// Bilinear gradient form <∇a, ∇b> on trace-closed fields. Wall faces
/// contribute the half-cell gradient between trace and first interior cell.
inline double gradient_inner(const BulkField& a, const WallField& ta, const BulkField& b,
                             const WallField& tb, const ChannelGrid& g) {
  detail::check_shapes(a, ta, g);
  detail::check_shapes(b, tb, g);
  const int nx = g.nx(), ny = g.ny();
  const double hx = g.hx(), hy = g.hy();
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) sx += (a(i, j) - a.at(i - 1, j)) * (b(i, j) - b.at(i - 1, j));
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) sy += (a(i, j) - a(i, j - 1)) * (b(i, j) - b(i, j - 1));
  for (Wall w : kWalls) {
    const int j = g.wall_row(w);
    for (int i = 0; i < nx; ++i) sw += (ta(w, i) - a(i, j)) * (tb(w, i) - b(i, j));
  }
  return sx * hy / hx + sy * hx / hy + sw * 2.0 * hx / hy;
}

inline double gradient_norm_sq(const BulkField& f, const WallField& trace, const ChannelGrid& g) {
  return gradient_inner(f, trace, f, trace, g);
}

inline double surface_gradient_inner(const WallField& a, const WallField& b, const ChannelGrid& g) {
  double s = 0.0;
  for (Wall w : kWalls)
    for (int i = 0; i < g.nx(); ++i) s += (a(w, i) - a.at(w, i - 1)) * (b(w, i) - b.at(w, i - 1));
  return s / g.hx();
}

inline double surface_gradient_norm_sq(const WallField& s, const ChannelGrid& g) {
  return surface_gradient_inner(s, s, g);
}

}  // namespace nsch
