#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "grid.hpp"

namespace morphforge {

// Covariant tensor field of order 1 or 2 sampled on a parameter grid.
// Order-2 fields are stored as full dim x dim row-major component blocks and
// must be symmetric; an optional analytic evaluator serves off-node queries.
struct CovariantTensorField {
  int order = 2;
  int dim = 1;
  Grid grid;
  std::vector<double> comps;  // node*ncomp
  std::function<std::array<double, 4>(const std::array<double, 2>&)> analytic;

  int ncomp() const { return order == 1 ? dim : dim * dim; }

  // Sign of component k under the polar reflection: one factor -1 per
  // colatitude index.
  double parity(int k) const {
    if (dim == 1) return 1.0;
    if (order == 1) return k == 0 ? -1.0 : 1.0;
    return ((k / dim) == 0 ? -1.0 : 1.0) * ((k % dim) == 0 ? -1.0 : 1.0);
  }

  std::array<double, 4> at(int node) const {
    std::array<double, 4> out{0, 0, 0, 0};
    for (int k = 0; k < ncomp(); ++k) out[k] = comps[node * ncomp() + k];
    return out;
  }

  std::array<double, 4> eval(const std::array<double, 2>& u) const {
    if (analytic) return analytic(u);
    std::array<double, 4> out{0, 0, 0, 0};
    const int nc = ncomp();
    std::vector<double> tmp(grid.nodes());
    for (int k = 0; k < nc; ++k) {
      for (int n = 0; n < grid.nodes(); ++n) tmp[n] = comps[n * nc + k];
      out[k] = interp_linear(grid, tmp, u, parity(k));
    }
    return out;
  }

  void validate(double sym_tol = 1e-12) const {
    grid.validate();
    if (order != 1 && order != 2) throw ValidationError("tensor order must be 1 or 2");
    if (dim != grid.dim) throw ValidationError("tensor dim does not match grid");
    if (static_cast<int>(comps.size()) != grid.nodes() * ncomp())
      throw ValidationError("tensor component array size mismatch");
    if (order == 2 && dim == 2) {
      double scale = 0;
      for (double c : comps) scale = std::max(scale, std::abs(c));
      for (int n = 0; n < grid.nodes(); ++n) {
        double a12 = comps[n * 4 + 1], a21 = comps[n * 4 + 2];
        if (std::abs(a12 - a21) > sym_tol * std::max(scale, 1e-300))
          throw ValidationError("order-2 tensor is not symmetric");
      }
    }
  }
};

namespace detail {

// Lower-triangular Gram-Schmidt frame E of the coordinate basis with respect
// to the metric g (columns are frame coefficient vectors, E^T g E = I).
// `reverse` orthonormalizes starting from the last coordinate instead.
inline std::array<double, 4> gs_frame(const std::array<double, 4>& g, int dim, bool reverse) {
  if (dim == 1) {
    if (g[0] <= 0) throw SingularMetric("metric not positive");
    return {1.0 / std::sqrt(g[0]), 0, 0, 0};
  }
  double g11 = g[0], g12 = g[1], g22 = g[3];
  if (reverse) {
    double c = g11 - g12 * g12 / g22;
    if (g22 <= 0 || c <= 0) throw SingularMetric("metric not positive definite");
    // e1 = c2/sqrt(g22), e2 = (c1 - (g12/g22) c2)/sqrt(c)
    return {0.0, 1.0 / std::sqrt(c), 1.0 / std::sqrt(g22), -(g12 / g22) / std::sqrt(c)};
  }
  double c = g22 - g12 * g12 / g11;
  if (g11 <= 0 || c <= 0) throw SingularMetric("metric not positive definite");
  return {1.0 / std::sqrt(g11), -(g12 / g11) / std::sqrt(c), 0.0, 1.0 / std::sqrt(c)};
}

}  // namespace detail

// Squared fiber norm of b at one node: sum of squared components in a
// g-orthonormal frame. Equals dim for b == g regardless of the chart.
inline double fiber_norm_sq_node(const std::array<double, 4>& b, const std::array<double, 4>& g,
                                 int dim, int order, bool reverse = false) {
  auto E = detail::gs_frame(g, dim, reverse);  // row-major
  if (order == 1) {
    double s = 0;
    for (int i = 0; i < dim; ++i) {
      double w = 0;
      for (int k = 0; k < dim; ++k) w += E[k * 2 + i] * b[k];
      s += w * w;
    }
    return s;
  }
  double s = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double m = 0;
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l)
          m += E[k * 2 + i] * b[k * dim + l] * E[l * 2 + j];
      s += m * m;
    }
  return s;
}

// Max-component norm of a tensor at one node: largest |b(e_i, ..., e_j)|
// over vectors of a g-orthonormal frame.
inline double fiber_max_norm_node(const std::array<double, 4>& b,
                                  const std::array<double, 4>& g, int dim, int order) {
  auto E = detail::gs_frame(g, dim, false);
  double best = 0;
  if (order == 1) {
    for (int i = 0; i < dim; ++i) {
      double w = 0;
      for (int k = 0; k < dim; ++k) w += E[k * 2 + i] * b[k];
      best = std::max(best, std::abs(w));
    }
    return best;
  }
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      double m = 0;
      for (int k = 0; k < dim; ++k)
        for (int l = 0; l < dim; ++l)
          m += E[k * 2 + i] * b[k * dim + l] * E[l * 2 + j];
      best = std::max(best, std::abs(m));
    }
  return best;
}

// Nodewise squared fiber norm field of b with respect to the metric g.
inline std::vector<double> fiber_norm_sq(const CovariantTensorField& b,
                                         const CovariantTensorField& g, bool reverse = false) {
  if (b.dim != g.dim || b.grid.nodes() != g.grid.nodes())
    throw ValidationError("fiber_norm_sq: mismatched fields");
  std::vector<double> out(b.grid.nodes());
  for (int n = 0; n < b.grid.nodes(); ++n)
    out[n] = fiber_norm_sq_node(b.at(n), g.at(n), b.dim, b.order, reverse);
  return out;
}

// Componentwise difference (shared grid).
inline CovariantTensorField tensor_sub(const CovariantTensorField& a,
                                       const CovariantTensorField& b) {
  if (a.order != b.order || a.dim != b.dim || a.comps.size() != b.comps.size())
    throw ValidationError("tensor_sub: mismatched fields");
  CovariantTensorField r = a;
  r.analytic = nullptr;
  for (std::size_t i = 0; i < r.comps.size(); ++i) r.comps[i] -= b.comps[i];
  return r;
}

}  // namespace morphforge
