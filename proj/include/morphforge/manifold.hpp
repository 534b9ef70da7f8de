#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "grid.hpp"
#include "quadrature.hpp"

namespace morphforge {

using Param = std::array<double, 2>;
using Vec3 = Eigen::Vector3d;

// Embedded hypersurface sampled on a uniform parameter grid. Ambient dimension
// is dim+1; planar objects pad the third component with zero. An analytic
// chart (with derivatives and inverse) is optional; all operations fall back
// to 4th-order finite differences of the sampled positions.
struct EmbeddedManifold {
  int dim = 1;
  Grid grid;
  double orientation_sign = 1.0;
  std::vector<double> positions;  // node*3

  std::function<Vec3(const Param&)> chart;
  std::function<Vec3(const Param&, int)> chart_d1;
  std::function<Vec3(const Param&, int, int)> chart_d2;
  std::function<Param(const Vec3&)> chart_inv;

  int ambient() const { return dim + 1; }

  Vec3 position(int node) const {
    return Vec3(positions[3 * node], positions[3 * node + 1], positions[3 * node + 2]);
  }

  Param param(int i0, int i1 = 0) const {
    return {grid.coord(0, i0), dim == 2 ? grid.coord(1, i1) : 0.0};
  }

  double diameter() const {
    Vec3 lo = position(0), hi = position(0);
    for (int k = 1; k < grid.nodes(); ++k) {
      lo = lo.cwiseMin(position(k));
      hi = hi.cwiseMax(position(k));
    }
    return (hi - lo).norm();
  }

  void validate() const {
    grid.validate();
    if (grid.dim != dim) throw ValidationError("manifold dim does not match grid dim");
    if (static_cast<int>(positions.size()) != 3 * grid.nodes())
      throw ValidationError("positions size does not match grid");
    if (orientation_sign != 1.0 && orientation_sign != -1.0)
      throw ValidationError("orientation_sign must be +1 or -1");
  }
};

inline std::vector<double> sample_chart(const Grid& g, const std::function<Vec3(const Param&)>& chart) {
  std::vector<double> pos(3 * g.nodes());
  for (int i0 = 0; i0 < g.shape[0]; ++i0)
    for (int i1 = 0; i1 < g.shape[1]; ++i1) {
      Param u{g.coord(0, i0), g.dim == 2 ? g.coord(1, i1) : 0.0};
      Vec3 p = chart(u);
      int n = g.id(i0, i1);
      pos[3 * n] = p[0];
      pos[3 * n + 1] = p[1];
      pos[3 * n + 2] = p[2];
    }
  return pos;
}

// Circle of radius R, angle chart on [0, 2pi). The default orientation makes
// the second fundamental form of the unit circle equal +g.
inline EmbeddedManifold make_circle(double R, int n, double orientation = 1.0) {
  if (R <= 0 || n < 8) throw ValidationError("circle needs R > 0 and n >= 8");
  EmbeddedManifold M;
  M.dim = 1;
  M.grid = Grid{1, {n, 1}, {0.0, 0.0}, {2 * std::numbers::pi / n, 1.0}, {true, false}, false};
  M.orientation_sign = orientation;
  M.chart = [R](const Param& u) { return Vec3(R * std::cos(u[0]), R * std::sin(u[0]), 0.0); };
  M.chart_d1 = [R](const Param& u, int) { return Vec3(-R * std::sin(u[0]), R * std::cos(u[0]), 0.0); };
  M.chart_d2 = [R](const Param& u, int, int) { return Vec3(-R * std::cos(u[0]), -R * std::sin(u[0]), 0.0); };
  M.chart_inv = [](const Vec3& p) {
    double a = std::atan2(p[1], p[0]);
    if (a < 0) a += 2 * std::numbers::pi;
    return Param{a, 0.0};
  };
  M.positions = sample_chart(M.grid, M.chart);
  return M;
}

// Sphere of radius R in the colatitude/longitude chart, cell-centered in the
// colatitude so no node sits on a pole. Orientation again fixed so that the
// unit sphere has second fundamental form +g.
inline EmbeddedManifold make_sphere(double R, int ntheta, int nphi) {
  if (R <= 0 || ntheta < 8 || nphi < 8 || nphi % 2 != 0)
    throw ValidationError("sphere needs R > 0, ntheta >= 8, even nphi >= 8");
  EmbeddedManifold M;
  M.dim = 2;
  double ht = std::numbers::pi / ntheta, hp = 2 * std::numbers::pi / nphi;
  M.grid = Grid{2, {ntheta, nphi}, {0.5 * ht, 0.0}, {ht, hp}, {false, true}, true};
  M.orientation_sign = -1.0;
  M.chart = [R](const Param& u) {
    return Vec3(R * std::sin(u[0]) * std::cos(u[1]), R * std::sin(u[0]) * std::sin(u[1]),
                R * std::cos(u[0]));
  };
  M.chart_d1 = [R](const Param& u, int a) {
    if (a == 0)
      return Vec3(R * std::cos(u[0]) * std::cos(u[1]), R * std::cos(u[0]) * std::sin(u[1]),
                  -R * std::sin(u[0]));
    return Vec3(-R * std::sin(u[0]) * std::sin(u[1]), R * std::sin(u[0]) * std::cos(u[1]), 0.0);
  };
  M.chart_d2 = [R](const Param& u, int a, int b) {
    if (a == 0 && b == 0)
      return Vec3(-R * std::sin(u[0]) * std::cos(u[1]), -R * std::sin(u[0]) * std::sin(u[1]),
                  -R * std::cos(u[0]));
    if (a != b)
      return Vec3(-R * std::cos(u[0]) * std::sin(u[1]), R * std::cos(u[0]) * std::cos(u[1]), 0.0);
    return Vec3(-R * std::sin(u[0]) * std::cos(u[1]), -R * std::sin(u[0]) * std::sin(u[1]), 0.0);
  };
  M.chart_inv = [R](const Vec3& p) {
    double th = std::acos(std::clamp(p[2] / R, -1.0, 1.0));
    double ph = std::atan2(p[1], p[0]);
    if (ph < 0) ph += 2 * std::numbers::pi;
    return Param{th, ph};
  };
  M.positions = sample_chart(M.grid, M.chart);
  return M;
}

// Straight segment from p0 to p1 with the arc-length chart.
inline EmbeddedManifold make_segment(const Vec3& p0, const Vec3& p1, int n) {
  double L = (p1 - p0).norm();
  if (L <= 0 || n < 8) throw ValidationError("segment needs distinct endpoints and n >= 8");
  EmbeddedManifold M;
  M.dim = 1;
  M.grid = Grid{1, {n, 1}, {0.0, 0.0}, {L / (n - 1), 1.0}, {false, false}, false};
  Vec3 dir = (p1 - p0) / L;
  M.chart = [p0, dir](const Param& u) { return Vec3(p0 + u[0] * dir); };
  M.chart_d1 = [dir](const Param&, int) { return dir; };
  M.chart_d2 = [](const Param&, int, int) { return Vec3::Zero(); };
  M.positions = sample_chart(M.grid, M.chart);
  return M;
}

// Ellipse x = a cos, y = b sin. Angle chart by default; with `arclength` the
// nodes are spaced uniformly in arc length and only tabulated positions are
// kept (no analytic chart), which exercises the finite-difference path.
inline EmbeddedManifold make_ellipse(double a, double b, int n, bool arclength = false) {
  if (a <= 0 || b <= 0 || n < 8) throw ValidationError("ellipse needs a, b > 0 and n >= 8");
  auto point = [a, b](double th) { return Vec3(a * std::cos(th), b * std::sin(th), 0.0); };
  auto speed = [a, b](double th) {
    double sx = -a * std::sin(th), sy = b * std::cos(th);
    return std::sqrt(sx * sx + sy * sy);
  };
  EmbeddedManifold M;
  M.dim = 1;
  if (!arclength) {
    M.grid = Grid{1, {n, 1}, {0.0, 0.0}, {2 * std::numbers::pi / n, 1.0}, {true, false}, false};
    M.chart = [point](const Param& u) { return point(u[0]); };
    M.chart_d1 = [a, b](const Param& u, int) {
      return Vec3(-a * std::sin(u[0]), b * std::cos(u[0]), 0.0);
    };
    M.chart_d2 = [a, b](const Param& u, int, int) {
      return Vec3(-a * std::cos(u[0]), -b * std::sin(u[0]), 0.0);
    };
    M.positions = sample_chart(M.grid, M.chart);
    return M;
  }
  double L = integrate_adaptive(speed, 0.0, 2 * std::numbers::pi, 1e-13);
  M.grid = Grid{1, {n, 1}, {0.0, 0.0}, {L / n, 1.0}, {true, false}, false};
  M.positions.resize(3 * n);
  double th = 0.0;
  for (int i = 0; i < n; ++i) {
    double target = i * L / n;
    // Newton on cumulative arc length; the running theta is monotone.
    for (int it = 0; it < 60; ++it) {
      double arc = integrate_adaptive(speed, 0.0, th, 1e-13) - target;
      double step = arc / speed(th);
      th -= step;
      if (std::abs(step) < 1e-14) break;
    }
    Vec3 p = point(th);
    M.positions[3 * i] = p[0];
    M.positions[3 * i + 1] = p[1];
    M.positions[3 * i + 2] = p[2];
  }
  return M;
}

// Wraps externally produced positions (e.g. a pushed-forward grid) in a
// manifold that shares the source's grid and orientation.
inline EmbeddedManifold make_tabulated(const Grid& grid, std::vector<double> positions,
                                       double orientation_sign) {
  EmbeddedManifold M;
  M.dim = grid.dim;
  M.grid = grid;
  M.orientation_sign = orientation_sign;
  M.positions = std::move(positions);
  M.validate();
  return M;
}

}  // namespace morphforge
