#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "manifold.hpp"
#include "quadrature.hpp"
#include "tensor.hpp"
#include "threads.hpp"

namespace morphforge {

// Position derivatives per node: tangents (one ambient column per coordinate
// direction) and, optionally, second derivatives over symmetric index pairs
// ordered (00), (01), (11).
struct ChartDerivs {
  int dim = 1;
  std::vector<double> tang;  // node*dim*3
  std::vector<double> sec;   // node*npairs*3

  Vec3 tangent(int node, int a) const {
    const int o = (node * dim + a) * 3;
    return Vec3(tang[o], tang[o + 1], tang[o + 2]);
  }
  int npairs() const { return dim * (dim + 1) / 2; }
  Vec3 second(int node, int a, int b) const {
    int pair = (dim == 1) ? 0 : (a + b);  // (0,0)->0 (0,1)->1 (1,1)->2
    const int o = (node * npairs() + pair) * 3;
    return Vec3(sec[o], sec[o + 1], sec[o + 2]);
  }
};

inline ChartDerivs chart_derivatives(const EmbeddedManifold& M, bool need_second) {
  M.validate();
  ChartDerivs D;
  D.dim = M.dim;
  const int n = M.grid.nodes();
  D.tang.resize(static_cast<std::size_t>(n) * M.dim * 3);
  if (need_second) D.sec.resize(static_cast<std::size_t>(n) * D.npairs() * 3);

  if (M.chart_d1 && (!need_second || M.chart_d2)) {
    for (int i0 = 0; i0 < M.grid.shape[0]; ++i0)
      for (int i1 = 0; i1 < M.grid.shape[1]; ++i1) {
        int node = M.grid.id(i0, i1);
        Param u = M.param(i0, i1);
        for (int a = 0; a < M.dim; ++a) {
          Vec3 t = M.chart_d1(u, a);
          for (int c = 0; c < 3; ++c) D.tang[(node * M.dim + a) * 3 + c] = t[c];
        }
        if (need_second) {
          int pair = 0;
          for (int a = 0; a < M.dim; ++a)
            for (int b = a; b < M.dim; ++b, ++pair) {
              Vec3 s = M.chart_d2(u, a, b);
              for (int c = 0; c < 3; ++c) D.sec[(node * D.npairs() + pair) * 3 + c] = s[c];
            }
        }
      }
    return D;
  }

  // Finite-difference path over the sampled positions (scalar components).
  std::vector<double> comp(n);
  for (int c = 0; c < M.ambient(); ++c) {
    for (int k = 0; k < n; ++k) comp[k] = M.positions[3 * k + c];
    for (int a = 0; a < M.dim; ++a) {
      auto d = fd_derivative(M.grid, comp, a, 1, 1.0);
      for (int k = 0; k < n; ++k) D.tang[(k * M.dim + a) * 3 + c] = d[k];
    }
    if (need_second) {
      int pair = 0;
      for (int a = 0; a < M.dim; ++a)
        for (int b = a; b < M.dim; ++b, ++pair) {
          std::vector<double> d;
          if (a == b) {
            d = fd_derivative(M.grid, comp, a, 2, 1.0);
          } else {
            d = fd_derivative(M.grid, fd_derivative(M.grid, comp, 1, 1, 1.0), 0, 1, 1.0);
          }
          for (int k = 0; k < n; ++k) D.sec[(k * D.npairs() + pair) * 3 + c] = d[k];
        }
    }
  }
  return D;
}

// First fundamental form g_ab = <d_a r, d_b r>. Positive-definiteness is
// required at every node. Analytic manifolds get an exact off-node evaluator.
inline CovariantTensorField first_fundamental_form(const EmbeddedManifold& M,
                                                   const ChartDerivs* derivs = nullptr) {
  ChartDerivs local;
  if (!derivs) {
    local = chart_derivatives(M, false);
    derivs = &local;
  }
  CovariantTensorField g;
  g.order = 2;
  g.dim = M.dim;
  g.grid = M.grid;
  const int n = M.grid.nodes();
  g.comps.resize(static_cast<std::size_t>(n) * g.ncomp());
  for (int k = 0; k < n; ++k) {
    double scale = 0;
    for (int a = 0; a < M.dim; ++a)
      for (int b = 0; b < M.dim; ++b) {
        double v = derivs->tangent(k, a).dot(derivs->tangent(k, b));
        g.comps[k * g.ncomp() + a * M.dim + b] = v;
        scale = std::max(scale, std::abs(v));
      }
    double det = (M.dim == 1) ? g.comps[k]
                              : g.comps[k * 4] * g.comps[k * 4 + 3] -
                                    g.comps[k * 4 + 1] * g.comps[k * 4 + 2];
    if (!(det > 1e-14 * std::max(scale * scale, 1e-300)))
      throw SingularMetric("first fundamental form degenerate at a node");
  }
  if (M.chart_d1) {
    const int dim = M.dim;
    auto d1 = M.chart_d1;
    g.analytic = [d1, dim](const Param& u) {
      std::array<double, 4> out{0, 0, 0, 0};
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) out[a * dim + b] = d1(u, a).dot(d1(u, b));
      return out;
    };
  }
  return g;
}

namespace detail {

inline Vec3 normal_from_tangents(const Vec3& t0, const Vec3& t1, int dim, double orientation) {
  if (dim == 1) {
    Vec3 n(-t0[1], t0[0], 0.0);
    double s = n.norm();
    if (s < 1e-12 * std::max(t0.norm(), 1e-300))
      throw DegenerateNormal("curve tangent vanishes");
    return orientation / s * n;
  }
  Vec3 n = t0.cross(t1);
  double s = n.norm();
  if (s < 1e-12 * std::max(t0.norm() * t1.norm(), 1e-300))
    throw DegenerateNormal("coordinate tangents are collinear");
  return orientation / s * n;
}

}  // namespace detail

// Unit normal per node: rotated tangent for curves, normalized cross product
// for surfaces, both multiplied by orientation_sign.
inline std::vector<double> normal_field(const EmbeddedManifold& M,
                                        const ChartDerivs* derivs = nullptr) {
  ChartDerivs local;
  if (!derivs) {
    local = chart_derivatives(M, false);
    derivs = &local;
  }
  const int n = M.grid.nodes();
  std::vector<double> out(static_cast<std::size_t>(n) * 3);
  for (int k = 0; k < n; ++k) {
    Vec3 t1 = (M.dim == 2) ? derivs->tangent(k, 1) : Vec3::Zero();
    Vec3 nk = detail::normal_from_tangents(derivs->tangent(k, 0), t1, M.dim, M.orientation_sign);
    for (int c = 0; c < 3; ++c) out[3 * k + c] = nk[c];
  }
  return out;
}

// Second fundamental form II_ab = <N, d_a d_b r>, with the orientation fixed
// so the unit circle and unit sphere yield II = +g.
inline CovariantTensorField second_fundamental_form(const EmbeddedManifold& M,
                                                    const ChartDerivs* derivs = nullptr) {
  ChartDerivs local;
  if (!derivs || derivs->sec.empty()) {
    local = chart_derivatives(M, true);
    derivs = &local;
  }
  CovariantTensorField b;
  b.order = 2;
  b.dim = M.dim;
  b.grid = M.grid;
  const int n = M.grid.nodes();
  b.comps.resize(static_cast<std::size_t>(n) * b.ncomp());
  for (int k = 0; k < n; ++k) {
    Vec3 t1 = (M.dim == 2) ? derivs->tangent(k, 1) : Vec3::Zero();
    Vec3 nk = detail::normal_from_tangents(derivs->tangent(k, 0), t1, M.dim, M.orientation_sign);
    for (int a = 0; a < M.dim; ++a)
      for (int bb = 0; bb < M.dim; ++bb)
        b.comps[k * b.ncomp() + a * M.dim + bb] = nk.dot(derivs->second(k, a, bb));
  }
  if (M.chart_d1 && M.chart_d2) {
    const int dim = M.dim;
    auto d1 = M.chart_d1;
    auto d2 = M.chart_d2;
    double orient = M.orientation_sign;
    b.analytic = [d1, d2, dim, orient](const Param& u) {
      Vec3 t0 = d1(u, 0), t1 = (dim == 2) ? d1(u, 1) : Vec3::Zero();
      Vec3 nk = detail::normal_from_tangents(t0, t1, dim, orient);
      std::array<double, 4> out{0, 0, 0, 0};
      for (int a = 0; a < dim; ++a)
        for (int bb = 0; bb < dim; ++bb) out[a * dim + bb] = nk.dot(d2(u, a, bb));
      return out;
    };
  }
  return b;
}

// Per-node quadrature weights for the parameter grid (area element excluded):
// periodic trapezoid on periodic axes, trapezoid on open axes, and the
// sine-space colatitude rule on the polar axis.
inline std::vector<double> quadrature_weights(const Grid& g) {
  std::vector<std::vector<double>> axis_w(2);
  for (int a = 0; a < g.dim; ++a) {
    const int m = g.shape[a];
    axis_w[a].assign(m, g.spacing[a]);
    if (g.polar && a == 0) {
      axis_w[a] = polar_weights(m);
    } else if (!g.periodic[a]) {
      axis_w[a].front() *= 0.5;
      axis_w[a].back() *= 0.5;
    }
  }
  std::vector<double> w(g.nodes(), 1.0);
  for (int i0 = 0; i0 < g.shape[0]; ++i0)
    for (int i1 = 0; i1 < g.shape[1]; ++i1) {
      double v = axis_w[0][i0];
      if (g.dim == 2) v *= axis_w[1][i1];
      w[g.id(i0, i1)] = v;
    }
  return w;
}

inline std::vector<double> area_element(const EmbeddedManifold& M,
                                        const ChartDerivs* derivs = nullptr) {
  auto g = first_fundamental_form(M, derivs);
  std::vector<double> s(M.grid.nodes());
  for (int k = 0; k < M.grid.nodes(); ++k) {
    auto gk = g.at(k);
    s[k] = (M.dim == 1) ? std::sqrt(gk[0]) : std::sqrt(gk[0] * gk[3] - gk[1] * gk[2]);
  }
  return s;
}

// Integral of a nodal scalar field against the Riemannian volume element.
inline double integrate(const std::vector<double>& values, const EmbeddedManifold& M,
                        const ChartDerivs* derivs = nullptr) {
  if (static_cast<int>(values.size()) != M.grid.nodes())
    throw ValidationError("integrate: field size mismatch");
  auto w = quadrature_weights(M.grid);
  auto s = area_element(M, derivs);
  double acc = 0;
  for (int k = 0; k < M.grid.nodes(); ++k) {
    if (!std::isfinite(values[k])) throw NonFiniteInput("integrate: non-finite field value");
    acc += w[k] * s[k] * values[k];
  }
  return acc;
}

// Sampled differential data of a map h: M -> N along the source grid: image
// points, image parameters in the target chart, first differentials (ambient
// columns per source coordinate direction), optional second differentials.
struct MapDifferentialSamples {
  Grid source_grid;
  int sdim = 1, tdim = 1;
  std::vector<double> image;        // node*3
  std::vector<double> image_param;  // node*2
  std::vector<double> d1;           // node*sdim*3
  std::vector<double> d2;           // node*npairs*3 when has_second
  bool has_second = false;

  int npairs() const { return sdim * (sdim + 1) / 2; }
  Vec3 image_at(int k) const { return Vec3(image[3 * k], image[3 * k + 1], image[3 * k + 2]); }
  Param param_at(int k) const { return {image_param[2 * k], image_param[2 * k + 1]}; }
  Vec3 d1_col(int k, int a) const {
    const int o = (k * sdim + a) * 3;
    return Vec3(d1[o], d1[o + 1], d1[o + 2]);
  }
  Vec3 d2_pair(int k, int a, int b) const {
    int pair = (sdim == 1) ? 0 : (a + b);
    const int o = (k * npairs() + pair) * 3;
    return Vec3(d2[o], d2[o + 1], d2[o + 2]);
  }
};

// A map given in chart coordinates: v = value(u), with Jacobian
// jac[t*2+s] = dv_t/du_s and optional second derivatives
// hess[t*3+pair] = d^2 v_t / du_pair, pairs ordered (00), (01), (11).
struct ChartMap {
  std::function<Param(const Param&)> value;
  std::function<std::array<double, 4>(const Param&)> jacobian;
  std::function<std::array<double, 6>(const Param&)> hessian;
};

inline MapDifferentialSamples map_samples_from_chart_map(const EmbeddedManifold& M,
                                                         const EmbeddedManifold& N,
                                                         const ChartMap& f,
                                                         bool need_second = false) {
  if (!N.chart || !N.chart_d1 || (need_second && !N.chart_d2))
    throw ValidationError("chart-map sampling needs an analytic target chart");
  MapDifferentialSamples S;
  S.source_grid = M.grid;
  S.sdim = M.dim;
  S.tdim = N.dim;
  const int n = M.grid.nodes();
  S.image.resize(3 * n);
  S.image_param.resize(2 * n);
  S.d1.resize(static_cast<std::size_t>(n) * S.sdim * 3);
  if (need_second) {
    S.d2.resize(static_cast<std::size_t>(n) * S.npairs() * 3);
    S.has_second = true;
  }
  for (int i0 = 0; i0 < M.grid.shape[0]; ++i0)
    for (int i1 = 0; i1 < M.grid.shape[1]; ++i1) {
      int k = M.grid.id(i0, i1);
      Param u = M.param(i0, i1);
      Param v = f.value(u);
      auto J = f.jacobian(u);
      Vec3 p = N.chart(v);
      S.image_param[2 * k] = v[0];
      S.image_param[2 * k + 1] = v[1];
      for (int c = 0; c < 3; ++c) S.image[3 * k + c] = p[c];
      std::array<Vec3, 2> Tv;
      for (int t = 0; t < N.dim; ++t) Tv[t] = N.chart_d1(v, t);
      for (int a = 0; a < M.dim; ++a) {
        Vec3 col = Vec3::Zero();
        for (int t = 0; t < N.dim; ++t) col += J[t * 2 + a] * Tv[t];
        for (int c = 0; c < 3; ++c) S.d1[(k * S.sdim + a) * 3 + c] = col[c];
      }
      if (need_second) {
        auto H = f.hessian(u);
        int pair = 0;
        for (int a = 0; a < M.dim; ++a)
          for (int b = a; b < M.dim; ++b, ++pair) {
            Vec3 acc = Vec3::Zero();
            for (int s = 0; s < N.dim; ++s)
              for (int t = 0; t < N.dim; ++t)
                acc += J[s * 2 + a] * J[t * 2 + b] * N.chart_d2(v, s, t);
            for (int t = 0; t < N.dim; ++t) acc += H[t * 3 + (a + b)] * Tv[t];
            for (int c = 0; c < 3; ++c) S.d2[(k * S.npairs() + pair) * 3 + c] = acc[c];
          }
      }
    }
  return S;
}

// Pull-back of a covariant tensor on N through sampled map differentials:
// (h*b)(X, Y) = b(Dh X, Dh Y). Differential columns are decomposed in the
// target coordinate frame at the image parameter; components of b off the
// target nodes come from the analytic evaluator or grid interpolation.
inline CovariantTensorField pullback(const CovariantTensorField& b,
                                     const MapDifferentialSamples& map,
                                     const EmbeddedManifold& N,
                                     double off_manifold_tol = 1e-6) {
  if (b.dim != N.dim) throw ValidationError("pullback: tensor/target dim mismatch");
  CovariantTensorField r;
  r.order = b.order;
  r.dim = map.sdim;
  r.grid = map.source_grid;
  const int n = map.source_grid.nodes();
  r.comps.resize(static_cast<std::size_t>(n) * r.ncomp());

  ChartDerivs nd;
  std::vector<double> npos_comp[3];
  double interp_slack = 0;
  if (!N.chart_d1) {
    nd = chart_derivatives(N, false);
    for (int c = 0; c < 3; ++c) {
      npos_comp[c].resize(N.grid.nodes());
      for (int k = 0; k < N.grid.nodes(); ++k) npos_comp[c][k] = N.positions[3 * k + c];
    }
    // linear interpolation of positions sags off the manifold by up to a
    // quarter of the largest second difference; widen the probe tolerance
    for (int i0 = 0; i0 < N.grid.shape[0]; ++i0)
      for (int i1 = 0; i1 < N.grid.shape[1]; ++i1)
        for (int axis = 0; axis < N.dim; ++axis) {
          int d0 = axis == 0 ? 1 : 0, d1 = axis == 0 ? 0 : 1;
          bool wraps = N.grid.periodic[axis] || (axis == 0 && N.grid.polar);
          if (!wraps && (i0 + d0 >= N.grid.shape[0] || i0 - d0 < 0 ||
                         i1 + d1 >= N.grid.shape[1] || i1 - d1 < 0))
            continue;
          auto rp = detail::resolve_ghost(N.grid, i0 + d0, i1 + d1, 1.0);
          auto rm = detail::resolve_ghost(N.grid, i0 - d0, i1 - d1, 1.0);
          int kp = N.grid.id(rp.i0, rp.i1), km = N.grid.id(rm.i0, rm.i1);
          int k0 = N.grid.id(i0, i1);
          double d2 = 0;
          for (int c = 0; c < 3; ++c) {
            double v2 = N.positions[3 * kp + c] - 2 * N.positions[3 * k0 + c] +
                        N.positions[3 * km + c];
            d2 += v2 * v2;
          }
          interp_slack = std::max(interp_slack, 0.25 * std::sqrt(d2));
        }
  }
  const double tol = off_manifold_tol * N.diameter() + interp_slack;

  std::vector<std::vector<double>> tang_comp;
  if (!N.chart_d1) {
    tang_comp.assign(static_cast<std::size_t>(N.dim) * 3, std::vector<double>(N.grid.nodes()));
    for (int a = 0; a < N.dim; ++a)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < N.grid.nodes(); ++k)
          tang_comp[a * 3 + c][k] = nd.tang[(k * N.dim + a) * 3 + c];
  }

  parallel_for(n, [&](std::size_t k) {
    Param v = map.param_at(k);
    Vec3 probe;
    std::array<Vec3, 2> T;
    if (N.chart_d1) {
      probe = N.chart(v);
      for (int a = 0; a < N.dim; ++a) T[a] = N.chart_d1(v, a);
    } else {
      for (int c = 0; c < 3; ++c) probe[c] = interp_linear(N.grid, npos_comp[c], v, 1.0);
      for (int a = 0; a < N.dim; ++a) {
        // tangent components flip like one colatitude index on axis 0
        double par = (N.grid.polar && a == 0) ? -1.0 : 1.0;
        for (int c = 0; c < 3; ++c) T[a][c] = interp_linear(N.grid, tang_comp[a * 3 + c], v, par);
      }
    }
    if ((map.image_at(k) - probe).norm() > tol)
      throw OffManifold("map image is not on the target manifold");

    auto B = b.eval(v);
    // coordinate components of each differential column in the target frame
    Eigen::Matrix2d G = Eigen::Matrix2d::Identity();
    for (int a = 0; a < N.dim; ++a)
      for (int c2 = 0; c2 < N.dim; ++c2) G(a, c2) = T[a].dot(T[c2]);
    std::array<Eigen::Vector2d, 2> coef;
    for (int a = 0; a < map.sdim; ++a) {
      Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
      for (int t = 0; t < N.dim; ++t) rhs[t] = T[t].dot(map.d1_col(k, a));
      if (N.dim == 1) {
        coef[a] = Eigen::Vector2d(rhs[0] / G(0, 0), 0.0);
      } else {
        coef[a] = G.ldlt().solve(rhs);
      }
    }
    if (b.order == 1) {
      for (int a = 0; a < map.sdim; ++a) {
        double acc = 0;
        for (int t = 0; t < N.dim; ++t) acc += B[t] * coef[a][t];
        r.comps[k * r.ncomp() + a] = acc;
      }
    } else {
      for (int a = 0; a < map.sdim; ++a)
        for (int bb = 0; bb < map.sdim; ++bb) {
          double acc = 0;
          for (int s = 0; s < N.dim; ++s)
            for (int t = 0; t < N.dim; ++t) acc += coef[a][s] * B[s * N.dim + t] * coef[bb][t];
          r.comps[k * r.ncomp() + a * map.sdim + bb] = acc;
        }
    }
  });
  return r;
}

}  // namespace morphforge
