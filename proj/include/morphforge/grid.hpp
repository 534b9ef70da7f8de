#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <vector>

#include "errors.hpp"

namespace morphforge {

// Uniform structured parameter grid, dim 1 or 2. Axis 0 of a `polar` grid is
// a colatitude with cell-centered nodes (j+1/2)*h on (0, pi); axis 1 is then
// periodic and must have an even node count so the pole reflection
// (th, ph) -> (-th, ph+pi) lands on grid nodes.
struct Grid {
  int dim = 1;
  std::array<int, 2> shape{2, 1};
  std::array<double, 2> origin{0.0, 0.0};
  std::array<double, 2> spacing{1.0, 1.0};
  std::array<bool, 2> periodic{false, false};
  bool polar = false;

  int nodes() const { return shape[0] * shape[1]; }
  int id(int i0, int i1 = 0) const { return i0 * shape[1] + i1; }
  double coord(int axis, int i) const { return origin[axis] + i * spacing[axis]; }

  void validate() const {
    if (dim != 1 && dim != 2) throw ValidationError("grid dim must be 1 or 2");
    for (int a = 0; a < dim; ++a)
      if (shape[a] < 2 || spacing[a] <= 0)
        throw ValidationError("grid axis needs >= 2 nodes and positive spacing");
    if (dim == 1 && shape[1] != 1) throw ValidationError("1-d grid must have shape[1] == 1");
    if (polar) {
      if (dim != 2 || periodic[0] || !periodic[1])
        throw ValidationError("polar grid must be 2-d with periodic axis 1 only");
      if (shape[1] % 2 != 0)
        throw ValidationError("polar grid needs an even periodic node count");
    }
  }
};

namespace detail {

// Resolves a logical index pair with out-of-range axis-0 values to a real node
// and the sign the sampled component picks up (polar reflection parity).
// Assumes at most one reflection, which holds for all stencils used here.
struct GhostRef {
  int i0, i1;
  double sign;
};

inline GhostRef resolve_ghost(const Grid& g, int j0, int j1, double parity) {
  double sign = 1.0;
  const int m0 = g.shape[0], m1 = g.shape[1];
  if (g.periodic[0]) {
    j0 = ((j0 % m0) + m0) % m0;
  } else if (g.polar) {
    if (j0 < 0) {
      j0 = -1 - j0;
      j1 += m1 / 2;
      sign *= parity;
    } else if (j0 >= m0) {
      j0 = 2 * m0 - 1 - j0;
      j1 += m1 / 2;
      sign *= parity;
    }
  }
  assert(j0 >= 0 && j0 < m0);
  if (g.dim == 2) {
    if (g.periodic[1]) j1 = ((j1 % m1) + m1) % m1;
    assert(j1 >= 0 && j1 < m1);
  } else {
    j1 = 0;
  }
  return {j0, j1, sign};
}

struct Stencil {
  int first;  // offset of the first coefficient relative to the node
  const double* c;
  int len;
  double scale;  // 1/(12h) or 1/(12h^2)
};

// 4th-order first-derivative stencils.
inline Stencil d1_stencil(int i, int m, bool onesided, double h) {
  static const double cen[] = {1, -8, 0, 8, -1};
  static const double e0[] = {-25, 48, -36, 16, -3};
  static const double e1[] = {-3, -10, 18, -6, 1};
  static const double r1[] = {-1, 6, -18, 10, 3};
  static const double r0[] = {3, -16, 36, -48, 25};
  const double s = 1.0 / (12.0 * h);
  if (!onesided || (i >= 2 && i <= m - 3)) return {-2, cen, 5, s};
  if (i == 0) return {0, e0, 5, s};
  if (i == 1) return {-1, e1, 5, s};
  if (i == m - 2) return {-3, r1, 5, s};
  return {-4, r0, 5, s};
}

// 4th-order second-derivative stencils.
inline Stencil d2_stencil(int i, int m, bool onesided, double h) {
  static const double cen[] = {-1, 16, -30, 16, -1};
  static const double e0[] = {45, -154, 214, -156, 61, -10};
  static const double e1[] = {10, -15, -4, 14, -6, 1};
  static const double r1[] = {1, -6, 14, -4, -15, 10};
  static const double r0[] = {-10, 61, -156, 214, -154, 45};
  const double s = 1.0 / (12.0 * h * h);
  if (!onesided || (i >= 2 && i <= m - 3)) return {-2, cen, 5, s};
  if (i == 0) return {0, e0, 6, s};
  if (i == 1) return {-1, e1, 6, s};
  if (i == m - 2) return {-4, r1, 6, s};
  return {-5, r0, 6, s};
}

}  // namespace detail

// 4th-order finite-difference derivative of a nodal field along an axis.
// `polar_parity` is the sign the field picks up under the pole reflection
// (+1 for scalars such as position components; -1 per colatitude tensor index).
inline std::vector<double> fd_derivative(const Grid& g, const std::vector<double>& f,
                                         int axis, int order, double polar_parity = 1.0) {
  g.validate();
  if (static_cast<int>(f.size()) != g.nodes())
    throw ValidationError("field size does not match grid");
  if (axis < 0 || axis >= g.dim) throw ValidationError("bad derivative axis");
  const int m = g.shape[axis];
  const bool ghosted = g.periodic[axis] || (g.polar && axis == 0);
  if (m < (ghosted ? 5 : 6))
    throw ValidationError("grid too small for 4th-order stencils");
  const double h = g.spacing[axis];
  std::vector<double> out(f.size());
  const int m0 = g.shape[0], m1 = g.shape[1];
  for (int i0 = 0; i0 < m0; ++i0) {
    for (int i1 = 0; i1 < m1; ++i1) {
      const int i = (axis == 0) ? i0 : i1;
      detail::Stencil st = (order == 1) ? detail::d1_stencil(i, m, !ghosted, h)
                                        : detail::d2_stencil(i, m, !ghosted, h);
      double acc = 0;
      for (int k = 0; k < st.len; ++k) {
        int j0 = i0 + ((axis == 0) ? st.first + k : 0);
        int j1 = i1 + ((axis == 1) ? st.first + k : 0);
        auto ref = detail::resolve_ghost(g, j0, j1, polar_parity);
        acc += st.c[k] * ref.sign * f[g.id(ref.i0, ref.i1)];
      }
      out[g.id(i0, i1)] = acc * st.scale;
    }
  }
  return out;
}

// Multilinear interpolation of a nodal field at parameter u, honoring periodic
// wrap-around and the polar pole reflection (parity as in fd_derivative).
inline double interp_linear(const Grid& g, const std::vector<double>& f,
                            const std::array<double, 2>& u, double polar_parity = 1.0) {
  int base[2] = {0, 0};
  double frac[2] = {0.0, 0.0};
  for (int a = 0; a < g.dim; ++a) {
    double x = (u[a] - g.origin[a]) / g.spacing[a];
    double fl = std::floor(x);
    base[a] = static_cast<int>(fl);
    frac[a] = x - fl;
    if (!g.periodic[a] && !(g.polar && a == 0)) {
      if (base[a] < 0) { base[a] = 0; frac[a] = 0.0; }
      if (base[a] > g.shape[a] - 2) { base[a] = g.shape[a] - 2; frac[a] = 1.0; }
    }
  }
  double acc = 0;
  const int corners = (g.dim == 1) ? 2 : 4;
  for (int c = 0; c < corners; ++c) {
    int o0 = c & 1, o1 = (c >> 1) & 1;
    double w = (o0 ? frac[0] : 1.0 - frac[0]);
    if (g.dim == 2) w *= (o1 ? frac[1] : 1.0 - frac[1]);
    auto ref = detail::resolve_ghost(g, base[0] + o0, g.dim == 2 ? base[1] + o1 : 0, polar_parity);
    acc += w * ref.sign * f[g.id(ref.i0, ref.i1)];
  }
  return acc;
}

}  // namespace morphforge
