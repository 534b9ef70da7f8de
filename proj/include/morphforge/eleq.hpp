#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "energy.hpp"
#include "errors.hpp"
#include "forms.hpp"
#include "grid.hpp"
#include "manifold.hpp"
#include "tensor.hpp"

namespace morphforge {

namespace detail {

// Reflection parity of a rank-2 component across the polar axis; the sign
// rule is the same for covariant and contravariant indices.
inline double parity2(int dim, int comp) {
  if (dim != 2) return 1.0;
  double p = 1.0;
  if (comp / dim == 0) p = -p;
  if (comp % dim == 0) p = -p;
  return p;
}

inline std::vector<double> comp_slice(const std::vector<double>& comps, int node_count,
                                      int ncomp, int c) {
  std::vector<double> f(node_count);
  for (int k = 0; k < node_count; ++k) f[k] = comps[static_cast<std::size_t>(k) * ncomp + c];
  return f;
}

// Inverse of a small SPD matrix stored row-major; throws on near-singular.
inline std::array<double, 4> invert_metric(const std::array<double, 4>& g, int dim,
                                           double scale) {
  std::array<double, 4> inv{0, 0, 0, 0};
  double guard = 1e-14 * std::max(scale * scale, 1e-300);
  if (dim == 1) {
    if (std::abs(g[0]) <= guard) throw SingularMetric("metric component vanished");
    inv[0] = 1.0 / g[0];
  } else {
    double det = g[0] * g[3] - g[1] * g[2];
    if (std::abs(det) <= guard) throw SingularMetric("metric determinant vanished");
    inv[0] = g[3] / det;
    inv[1] = -g[1] / det;
    inv[2] = -g[2] / det;
    inv[3] = g[0] / det;
  }
  return inv;
}

}  // namespace detail

struct ChristoffelField {
  int dim = 1;
  Grid grid;
  std::vector<double> comps;  // node * dim^3, index ((i*dim + j)*dim + k)

  int ncomp() const { return dim * dim * dim; }
  double at(int node, int i, int j, int k) const {
    return comps[static_cast<std::size_t>(node) * ncomp() + (i * dim + j) * dim + k];
  }
};

inline ChristoffelField christoffels(const CovariantTensorField& metric) {
  if (metric.order != 2) throw ValidationError("christoffels needs a rank-2 metric");
  metric.validate();
  const int dim = metric.dim;
  const int nc = metric.ncomp();
  const int n = metric.grid.nodes();

  double scale = 0;
  for (double v : metric.comps) scale = std::max(scale, std::abs(v));

  // dg[j][c][node] = d_j of metric component c
  std::vector<std::vector<std::vector<double>>> dg(dim);
  for (int j = 0; j < dim; ++j) {
    dg[j].resize(nc);
    for (int c = 0; c < nc; ++c) {
      auto f = detail::comp_slice(metric.comps, n, nc, c);
      double par = metric.grid.polar ? detail::parity2(dim, c) : 1.0;
      dg[j][c] = fd_derivative(metric.grid, f, j, 1, par);
    }
  }

  ChristoffelField out;
  out.dim = dim;
  out.grid = metric.grid;
  out.comps.assign(static_cast<std::size_t>(n) * out.ncomp(), 0.0);
  for (int node = 0; node < n; ++node) {
    auto g = metric.at(node);
    auto inv = detail::invert_metric(g, dim, scale);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        for (int k = j; k < dim; ++k) {
          double acc = 0;
          for (int l = 0; l < dim; ++l) {
            double term = dg[j][l * dim + k][node] + dg[k][l * dim + j][node] -
                          dg[l][j * dim + k][node];
            acc += inv[i * dim + l] * term;
          }
          acc *= 0.5;
          out.comps[static_cast<std::size_t>(node) * out.ncomp() + (i * dim + j) * dim + k] = acc;
          out.comps[static_cast<std::size_t>(node) * out.ncomp() + (i * dim + k) * dim + j] = acc;
        }
  }
  return out;
}

// Strain with both indices raised by alpha: B^{km} = (beta - alpha)_{ij}
// alpha^{ik} alpha^{jm}.
struct RaisedStrain {
  int dim = 1;
  Grid grid;
  std::vector<double> comps;  // node * dim^2

  int ncomp() const { return dim * dim; }
  double at(int node, int k, int m) const {
    return comps[static_cast<std::size_t>(node) * ncomp() + k * dim + m];
  }
};

inline RaisedStrain raised_strain(const CovariantTensorField& alpha,
                                  const CovariantTensorField& beta) {
  if (alpha.order != 2 || beta.order != 2)
    throw ValidationError("raised_strain needs rank-2 fields");
  if (alpha.dim != beta.dim || alpha.grid.nodes() != beta.grid.nodes())
    throw ValidationError("raised_strain needs a shared base grid");
  const int dim = alpha.dim;
  const int n = alpha.grid.nodes();
  double scale = 0;
  for (double v : alpha.comps) scale = std::max(scale, std::abs(v));

  RaisedStrain out;
  out.dim = dim;
  out.grid = alpha.grid;
  out.comps.assign(static_cast<std::size_t>(n) * dim * dim, 0.0);
  for (int node = 0; node < n; ++node) {
    auto a = alpha.at(node);
    auto b = beta.at(node);
    auto inv = detail::invert_metric(a, dim, scale);
    for (int k = 0; k < dim; ++k)
      for (int m = 0; m < dim; ++m) {
        double acc = 0;
        for (int i = 0; i < dim; ++i)
          for (int j = 0; j < dim; ++j)
            acc += (b[i * dim + j] - a[i * dim + j]) * inv[i * dim + k] * inv[j * dim + m];
        out.comps[static_cast<std::size_t>(node) * dim * dim + k * dim + m] = acc;
      }
  }
  return out;
}

// Component form of the stationarity residual: res^m = d_k B^{km}
// + Gamma^p_{kp} B^{km} + GammaBar^m_{kp} B^{kp}, connections taken from
// alpha and beta respectively. Norms are fiber norms in alpha.
struct ELResidual {
  int dim = 1;
  Grid grid;
  std::vector<double> comps;  // node * dim
  double max_norm = 0;
  double l2_norm = 0;

  double at(int node, int m) const {
    return comps[static_cast<std::size_t>(node) * dim + m];
  }
};

inline ELResidual el_residual(const CovariantTensorField& alpha,
                              const CovariantTensorField& beta) {
  RaisedStrain B = raised_strain(alpha, beta);
  ChristoffelField G = christoffels(alpha);
  ChristoffelField Gb = christoffels(beta);
  const int dim = alpha.dim;
  const int n = alpha.grid.nodes();

  // dB[k][c][node] = d_k of strain component c
  std::vector<std::vector<std::vector<double>>> dB(dim);
  for (int k = 0; k < dim; ++k) {
    dB[k].resize(dim * dim);
    for (int c = 0; c < dim * dim; ++c) {
      auto f = detail::comp_slice(B.comps, n, dim * dim, c);
      double par = alpha.grid.polar ? detail::parity2(dim, c) : 1.0;
      dB[k][c] = fd_derivative(alpha.grid, f, k, 1, par);
    }
  }

  ELResidual out;
  out.dim = dim;
  out.grid = alpha.grid;
  out.comps.assign(static_cast<std::size_t>(n) * dim, 0.0);
  for (int node = 0; node < n; ++node)
    for (int m = 0; m < dim; ++m) {
      double acc = 0;
      for (int k = 0; k < dim; ++k) {
        acc += dB[k][k * dim + m][node];
        double trace = 0;
        for (int p = 0; p < dim; ++p) trace += G.at(node, p, k, p);
        acc += trace * B.at(node, k, m);
        for (int p = 0; p < dim; ++p) acc += Gb.at(node, m, k, p) * B.at(node, k, p);
      }
      out.comps[static_cast<std::size_t>(node) * dim + m] = acc;
    }

  auto w = quadrature_weights(alpha.grid);
  double l2 = 0;
  for (int node = 0; node < n; ++node) {
    auto a = alpha.at(node);
    double det = dim == 1 ? a[0] : a[0] * a[3] - a[1] * a[2];
    double nsq = 0;
    for (int m = 0; m < dim; ++m)
      for (int k = 0; k < dim; ++k)
        nsq += out.at(node, m) * a[m * dim + k] * out.at(node, k);
    nsq = std::max(nsq, 0.0);
    out.max_norm = std::max(out.max_norm, std::sqrt(nsq));
    l2 += w[node] * nsq * std::sqrt(std::max(det, 0.0));
  }
  out.l2_norm = std::sqrt(l2);
  return out;
}

using ChartVectorField = std::function<std::array<double, 2>(const Param&)>;

struct FirstVariationReport {
  double analytic = 0;
  double finite_difference = 0;
  double rel_err = 0;
};

namespace detail {

// Chart-coordinate flow of Y to time s, returning the endpoint and the
// Jacobian of the flow map (transported alongside, derivative of Y by
// centered differences).
struct ChartFlowResult {
  Param u;
  std::array<double, 4> W;  // row-major d(endpoint)/d(start)
};

inline ChartFlowResult chart_flow(const ChartVectorField& Y, int dim, Param u0, double s,
                                  int steps = 8) {
  auto DY = [&](const Param& u) {
    std::array<double, 4> J{0, 0, 0, 0};
    const double h = 1e-5;
    for (int j = 0; j < dim; ++j) {
      Param up = u, um = u;
      up[j] += h;
      um[j] -= h;
      auto yp = Y(up), ym = Y(um);
      for (int i = 0; i < dim; ++i) J[i * 2 + j] = (yp[i] - ym[i]) / (2 * h);
    }
    return J;
  };
  struct State {
    Param u;
    std::array<double, 4> W;
  };
  auto rhs = [&](const State& st) {
    State d;
    auto y = Y(st.u);
    auto J = DY(st.u);
    for (int i = 0; i < dim; ++i) d.u[i] = y[i];
    for (int i = dim; i < 2; ++i) d.u[i] = 0;
    for (int i = 0; i < 4; ++i) d.W[i] = 0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        for (int l = 0; l < dim; ++l) d.W[i * 2 + j] += J[i * 2 + l] * st.W[l * 2 + j];
    return d;
  };
  auto add = [&](State st, const State& d, double f) {
    for (int i = 0; i < 2; ++i) st.u[i] += f * d.u[i];
    for (int i = 0; i < 4; ++i) st.W[i] += f * d.W[i];
    return st;
  };
  State st{u0, {1, 0, 0, 1}};
  double dt = s / steps;
  for (int it = 0; it < steps; ++it) {
    State k1 = rhs(st);
    State k2 = rhs(add(st, k1, dt / 2));
    State k3 = rhs(add(st, k2, dt / 2));
    State k4 = rhs(add(st, k3, dt));
    for (int i = 0; i < 2; ++i)
      st.u[i] += dt / 6 * (k1.u[i] + 2 * k2.u[i] + 2 * k3.u[i] + k4.u[i]);
    for (int i = 0; i < 4; ++i)
      st.W[i] += dt / 6 * (k1.W[i] + 2 * k2.W[i] + 2 * k3.W[i] + k4.W[i]);
  }
  return {st.u, st.W};
}

}  // namespace detail

// Directional derivative of the metric-distortion energy along the variation
// generated by Y (flowed on the source), compared against a centered finite
// difference of the energy itself.
inline FirstVariationReport first_variation(const ChartMap& h, const ChartVectorField& Y,
                                            const EmbeddedManifold& M,
                                            const EmbeddedManifold& N, double eps = 1e-4) {
  auto samples = map_samples_from_chart_map(M, N, h, false);
  auto alpha = first_fundamental_form(M);
  auto gN = first_fundamental_form(N);
  auto beta = pullback(gN, samples, N);
  ELResidual res = el_residual(alpha, beta);

  const int n = M.grid.nodes();
  std::vector<double> density(n);
  for (int node = 0; node < n; ++node) {
    Param u = M.param(node / M.grid.shape[1], node % M.grid.shape[1]);
    auto y = Y(u);
    // pair the raised residual with the pulled-back metric: this is the
    // lowering that makes the derivative of the energy under the source
    // flow of Y exact (with the reference metric it is off by one factor
    // of the pull-back, which only vanishes at critical points)
    auto b = beta.at(node);
    double acc = 0;
    for (int m = 0; m < M.dim; ++m)
      for (int k = 0; k < M.dim; ++k) acc += res.at(node, m) * b[m * M.dim + k] * y[k];
    density[node] = -4.0 * acc;
  }
  FirstVariationReport rep;
  rep.analytic = integrate(density, M);

  auto perturbed_energy = [&](double s) {
    ChartMap comp;
    comp.value = [&, s](const Param& u) {
      auto fl = detail::chart_flow(Y, M.dim, u, s);
      return h.value(fl.u);
    };
    comp.jacobian = [&, s](const Param& u) {
      auto fl = detail::chart_flow(Y, M.dim, u, s);
      auto Jh = h.jacobian(fl.u);
      std::array<double, 4> J{0, 0, 0, 0};
      for (int t = 0; t < 2; ++t)
        for (int j = 0; j < 2; ++j)
          for (int l = 0; l < 2; ++l) J[t * 2 + j] += Jh[t * 2 + l] * fl.W[l * 2 + j];
      return J;
    };
    auto S = map_samples_from_chart_map(M, N, comp, false);
    return phi(S, M, N);
  };
  rep.finite_difference = (perturbed_energy(eps) - perturbed_energy(-eps)) / (2 * eps);
  double denom = std::max(std::abs(rep.analytic), std::abs(rep.finite_difference));
  rep.rel_err = denom > 0 ? std::abs(rep.analytic - rep.finite_difference) / denom : 0.0;
  return rep;
}

// Integral of the divergence of a chart vector field over a closed manifold;
// vanishes in exact arithmetic.
inline double divergence_integral(const ChartVectorField& X, const EmbeddedManifold& M) {
  auto rootg = area_element(M);
  const int n = M.grid.nodes();
  std::vector<std::vector<double>> F(M.dim, std::vector<double>(n));
  for (int i0 = 0; i0 < M.grid.shape[0]; ++i0)
    for (int i1 = 0; i1 < M.grid.shape[1]; ++i1) {
      int node = M.grid.id(i0, i1);
      auto x = X(M.param(i0, i1));
      for (int k = 0; k < M.dim; ++k) F[k][node] = rootg[node] * x[k];
    }
  auto w = quadrature_weights(M.grid);
  double total = 0;
  for (int k = 0; k < M.dim; ++k) {
    double par = (M.grid.polar && k == 0) ? -1.0 : 1.0;
    auto dF = fd_derivative(M.grid, F[k], k, 1, par);
    for (int node = 0; node < n; ++node) total += w[node] * dF[node];
  }
  return total;
}

}  // namespace morphforge
