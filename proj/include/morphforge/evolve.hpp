#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "forms.hpp"
#include "manifold.hpp"
#include "threads.hpp"
#include "velocity.hpp"

namespace morphforge {

// Record of an ambient flow on a fixed time grid. Per seed and time node it
// holds the position, the transported direction vectors W (first variation
// along chosen seed directions), and optionally the transported second
// variations S, one per symmetric pair of W directions.
struct MorphTrajectory {
  std::vector<double> times;               // nt nodes
  int nseeds = 0, nw = 0, ns = 0;
  std::vector<std::pair<int, int>> pairs;  // W-column pair per S slot
  std::vector<double> pos;                 // (seed*nt + it)*3
  std::vector<double> w;                   // ((seed*nt + it)*nw + a)*3
  std::vector<double> s;                   // ((seed*nt + it)*ns + p)*3

  int nt() const { return static_cast<int>(times.size()); }
  Vec3 position(int seed, int it) const {
    const int o = (seed * nt() + it) * 3;
    return Vec3(pos[o], pos[o + 1], pos[o + 2]);
  }
  Vec3 transport1(int seed, int it, int a) const {
    const int o = ((seed * nt() + it) * nw + a) * 3;
    return Vec3(w[o], w[o + 1], w[o + 2]);
  }
  Vec3 transport2(int seed, int it, int p) const {
    const int o = ((seed * nt() + it) * ns + p) * 3;
    return Vec3(s[o], s[o + 1], s[o + 2]);
  }
};

namespace detail {

struct FlowState {
  Vec3 q;
  std::vector<Vec3> w, s;

  void axpy(double h, const FlowState& d) {
    q += h * d.q;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += h * d.w[i];
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += h * d.s[i];
  }
};

inline FlowState flow_rhs(const VelocityField& v, const FlowState& y, double t,
                          const std::vector<std::pair<int, int>>& pairs) {
  FlowState d;
  d.q = v.eval(y.q, t);
  if (!y.w.empty()) {
    Eigen::Matrix3d J = v.eval_jacobian(y.q, t);
    d.w.resize(y.w.size());
    for (std::size_t i = 0; i < y.w.size(); ++i) d.w[i] = J * y.w[i];
    d.s.resize(y.s.size());
    for (std::size_t p = 0; p < y.s.size(); ++p)
      d.s[p] = v.eval_second(y.q, t, y.w[pairs[p].first], y.w[pairs[p].second]) + J * y.s[p];
  }
  return d;
}

inline void rk4_step(const VelocityField& v, FlowState& y, double t, double h,
                     const std::vector<std::pair<int, int>>& pairs) {
  FlowState k1 = flow_rhs(v, y, t, pairs);
  FlowState y2 = y;
  y2.axpy(h / 2, k1);
  FlowState k2 = flow_rhs(v, y2, t + h / 2, pairs);
  FlowState y3 = y;
  y3.axpy(h / 2, k2);
  FlowState k3 = flow_rhs(v, y3, t + h / 2, pairs);
  FlowState y4 = y;
  y4.axpy(h, k3);
  FlowState k4 = flow_rhs(v, y4, t + h, pairs);
  y.axpy(h / 6, k1);
  y.axpy(h / 3, k2);
  y.axpy(h / 3, k3);
  y.axpy(h / 6, k4);
}

}  // namespace detail

struct EvolveOptions {
  double t0 = 0.0, t1 = 1.0;
  int steps = 32;             // recorded intervals
  double rk_tol = 1e-9;       // max change between substep refinements
  int max_refinements = 12;
  bool check_domain = true;
};

// Integrates dq/dt = v(q,t) together with dW/dt = Dv W and
// dS/dt = D2v[W,W] + Dv S by classical RK4. Substeps per recorded interval
// are doubled until the whole record changes by less than rk_tol.
inline MorphTrajectory evolve(const VelocityField& v, const std::vector<Vec3>& seeds,
                              const std::vector<std::vector<Vec3>>& w0,
                              const std::vector<std::vector<Vec3>>& s0,
                              const std::vector<std::pair<int, int>>& pairs,
                              const EvolveOptions& opt = {}) {
  if (opt.steps < 1) throw ValidationError("evolve: need at least one time step");
  const int nseeds = static_cast<int>(seeds.size());
  if (!w0.empty() && w0.size() != seeds.size())
    throw ValidationError("evolve: one direction set per seed required");
  if (!s0.empty() && s0.size() != seeds.size())
    throw ValidationError("evolve: one second-variation set per seed required");
  const int nw = w0.empty() ? 0 : static_cast<int>(w0[0].size());
  const int ns = s0.empty() ? 0 : static_cast<int>(s0[0].size());
  if (ns != static_cast<int>(pairs.size()))
    throw ValidationError("evolve: pair table does not match second-variation count");
  for (const auto& p : pairs)
    if (p.first < 0 || p.first >= nw || p.second < 0 || p.second >= nw)
      throw ValidationError("evolve: pair index out of range");

  MorphTrajectory rec;
  rec.nseeds = nseeds;
  rec.nw = nw;
  rec.ns = ns;
  rec.pairs = pairs;
  rec.times.resize(opt.steps + 1);
  const double dt = (opt.t1 - opt.t0) / opt.steps;
  for (int i = 0; i <= opt.steps; ++i) rec.times[i] = opt.t0 + i * dt;
  const int nt = opt.steps + 1;
  rec.pos.assign(static_cast<std::size_t>(nseeds) * nt * 3, 0.0);
  rec.w.assign(static_cast<std::size_t>(nseeds) * nt * nw * 3, 0.0);
  rec.s.assign(static_cast<std::size_t>(nseeds) * nt * ns * 3, 0.0);

  if (opt.check_domain)
    for (const auto& p : seeds)
      if (!v.inside(p)) throw LeftDomain("evolve: seed outside the field domain");

  auto integrate_level = [&](int sub, MorphTrajectory& out) {
    parallel_for(nseeds, [&](std::size_t k) {
      detail::FlowState y;
      y.q = seeds[k];
      if (nw) y.w = w0[k];
      if (ns) y.s = s0[k];
      for (int c = 0; c < 3; ++c) out.pos[(k * nt) * 3 + c] = y.q[c];
      for (int a = 0; a < nw; ++a)
        for (int c = 0; c < 3; ++c) out.w[((k * nt) * nw + a) * 3 + c] = y.w[a][c];
      for (int p = 0; p < ns; ++p)
        for (int c = 0; c < 3; ++c) out.s[((k * nt) * ns + p) * 3 + c] = y.s[p][c];
      for (int i = 0; i < opt.steps; ++i) {
        const double h = dt / sub;
        for (int j = 0; j < sub; ++j)
          detail::rk4_step(v, y, rec.times[i] + j * h, h, pairs);
        if (opt.check_domain && !v.inside(y.q))
          throw LeftDomain("evolve: trajectory left the field domain");
        const int it = i + 1;
        for (int c = 0; c < 3; ++c) out.pos[(k * nt + it) * 3 + c] = y.q[c];
        for (int a = 0; a < nw; ++a)
          for (int c = 0; c < 3; ++c) out.w[((k * nt + it) * nw + a) * 3 + c] = y.w[a][c];
        for (int p = 0; p < ns; ++p)
          for (int c = 0; c < 3; ++c) out.s[((k * nt + it) * ns + p) * 3 + c] = y.s[p][c];
      }
    });
  };

  MorphTrajectory prev = rec;
  integrate_level(1, prev);
  for (int r = 1; r <= opt.max_refinements; ++r) {
    integrate_level(1 << r, rec);
    double diff = 0;
    for (std::size_t i = 0; i < rec.pos.size(); ++i)
      diff = std::max(diff, std::abs(rec.pos[i] - prev.pos[i]));
    for (std::size_t i = 0; i < rec.w.size(); ++i)
      diff = std::max(diff, std::abs(rec.w[i] - prev.w[i]));
    for (std::size_t i = 0; i < rec.s.size(); ++i)
      diff = std::max(diff, std::abs(rec.s[i] - prev.s[i]));
    if (diff < opt.rk_tol) return rec;
    std::swap(prev.pos, rec.pos);
    std::swap(prev.w, rec.w);
    std::swap(prev.s, rec.s);
  }
  throw NoConvergence("evolve: step halving did not reach rk_tol");
}

// Seeds the augmented system from a manifold: positions, coordinate tangents
// as W columns, and (for order 2) coordinate second derivatives as S slots.
struct ManifoldSeeds {
  std::vector<Vec3> points;
  std::vector<std::vector<Vec3>> w0, s0;
  std::vector<std::pair<int, int>> pairs;
};

inline ManifoldSeeds manifold_seeds(const EmbeddedManifold& M, int order) {
  ManifoldSeeds out;
  ChartDerivs D = chart_derivatives(M, order >= 2);
  const int n = M.grid.nodes();
  out.points.resize(n);
  out.w0.resize(n);
  if (order >= 2) {
    out.s0.resize(n);
    for (int a = 0; a < M.dim; ++a)
      for (int b = a; b < M.dim; ++b) out.pairs.emplace_back(a, b);
  }
  for (int k = 0; k < n; ++k) {
    out.points[k] = M.position(k);
    out.w0[k].resize(M.dim);
    for (int a = 0; a < M.dim; ++a) out.w0[k][a] = D.tangent(k, a);
    if (order >= 2) {
      out.s0[k].resize(out.pairs.size());
      for (std::size_t p = 0; p < out.pairs.size(); ++p)
        out.s0[k][p] = D.second(k, out.pairs[p].first, out.pairs[p].second);
    }
  }
  return out;
}

// Map-differential samples of the time-t slice of a trajectory seeded from M.
// The evolved surface keeps the source parametrization, so image parameters
// coincide with the source ones.
inline MapDifferentialSamples trajectory_slice(const MorphTrajectory& rec,
                                               const EmbeddedManifold& M, int it) {
  MapDifferentialSamples S;
  S.source_grid = M.grid;
  S.sdim = M.dim;
  const int n = rec.nseeds;
  S.image.resize(3 * n);
  S.image_param.resize(2 * n);
  for (int i0 = 0; i0 < M.grid.shape[0]; ++i0)
    for (int i1 = 0; i1 < M.grid.shape[1]; ++i1) {
      Param u = M.param(i0, i1);
      S.image_param[2 * M.grid.id(i0, i1)] = u[0];
      S.image_param[2 * M.grid.id(i0, i1) + 1] = u[1];
    }
  S.d1.resize(static_cast<std::size_t>(n) * S.sdim * 3);
  if (rec.ns) {
    S.d2.resize(static_cast<std::size_t>(n) * S.npairs() * 3);
    S.has_second = true;
  }
  for (int k = 0; k < n; ++k) {
    Vec3 q = rec.position(k, it);
    for (int c = 0; c < 3; ++c) S.image[3 * k + c] = q[c];
    for (int a = 0; a < M.dim; ++a) {
      Vec3 col = rec.transport1(k, it, a);
      for (int c = 0; c < 3; ++c) S.d1[(k * S.sdim + a) * 3 + c] = col[c];
    }
    for (int p = 0; p < rec.ns; ++p) {
      Vec3 col = rec.transport2(k, it, p);
      for (int c = 0; c < 3; ++c) S.d2[(k * S.npairs() + p) * 3 + c] = col[c];
    }
  }
  return S;
}

// Smallest singular value of the 3 x d matrix of transported tangents; the
// trajectory's tangent action must stay injective.
inline double min_tangent_singular_value(const MorphTrajectory& rec) {
  double smin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < rec.nseeds; ++k)
    for (int it = 0; it < rec.nt(); ++it) {
      Eigen::Matrix<double, 3, 2> A = Eigen::Matrix<double, 3, 2>::Zero();
      for (int a = 0; a < rec.nw; ++a) A.col(a) = rec.transport1(k, it, a);
      if (rec.nw == 1) {
        smin = std::min(smin, A.col(0).norm());
      } else {
        Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(A);
        smin = std::min(smin, svd.singularValues().minCoeff());
      }
    }
  return smin;
}

// Velocity field w(x,t) = rho(x) vbar(x,t) with vbar(F(p,t),t) = dF/dt(p,t);
// the inverse of F(., t) is found by damped Newton with FD Jacobians.
inline VelocityField field_from_morph(
    const std::function<Vec3(const Vec3&, double)>& F,
    const std::function<Vec3(const Vec3&, double)>& Ft, const BumpFunction& bump,
    int ambient_dim = 3) {
  auto invert = [F, ambient_dim](const Vec3& x, double t) {
    Vec3 p = x;  // seed: morphs of interest stay near the identity in scale
    double res = (F(p, t) - x).norm();
    const double scale = std::max(1.0, x.norm());
    for (int iter = 0; iter < 80; ++iter) {
      if (res < 1e-12 * scale) return p;
      const double h = 1e-6 * scale;
      Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
      for (int j = 0; j < ambient_dim; ++j) {
        Vec3 dp = Vec3::Zero();
        dp[j] = h;
        J.col(j) = (F(p + dp, t) - F(p - dp, t)) / (2 * h);
      }
      Vec3 r = F(p, t) - x;
      Vec3 step = J.partialPivLu().solve(r);
      double damp = 1.0;
      for (; damp > 1e-8; damp /= 2) {
        Vec3 cand = p - damp * step;
        double cres = (F(cand, t) - x).norm();
        if (cres < res) {
          p = cand;
          res = cres;
          break;
        }
      }
      // a stall at the FD-Jacobian noise floor is convergence, not failure
      if (damp <= 1e-8) {
        if (res < 1e-9 * scale) return p;
        throw InverseFailure("field_from_morph: Newton damping exhausted");
      }
    }
    if (res < 1e-9 * scale) return p;
    throw InverseFailure("field_from_morph: Newton did not converge");
  };
  VelocityField inner;
  inner.v = [invert, Ft](const Vec3& x, double t) { return Ft(invert(x, t), t); };
  inner.fd_step = 1e-5;
  return apply_bump(inner, bump);
}

// Axis-aligned cube discretization of the field domain for grid norms.
struct BoxGrid {
  Vec3 center = Vec3::Zero();
  double halfwidth = 1.0;
  int n = 33;       // nodes per axis
  int dim = 3;      // 2 for planar fields
  int time_nodes = 9;
};

struct SobolevReport {
  double value = 0;
  double richardson_error = 0;
};

namespace detail {

// Sum over multi-indices |alpha| <= k of int (D^alpha v_i)^2 over the box at
// one time slice, iterated centered differences with zero extension.
inline double sobolev_slice(const VelocityField& v, double t, const BoxGrid& box, int k,
                            int stride) {
  const int n = (box.n - 1) / stride + 1;
  const double h = 2 * box.halfwidth / (box.n - 1) * stride;
  const int nz = box.dim == 3 ? n : 1;
  const std::size_t total = static_cast<std::size_t>(n) * n * nz;
  auto idx = [&](int i, int j, int l) { return (static_cast<std::size_t>(i) * n + j) * nz + l; };

  std::vector<std::array<double, 3>> base(total);
  parallel_for(total, [&](std::size_t f) {
    int l = static_cast<int>(f % nz);
    int j = static_cast<int>((f / nz) % n);
    int i = static_cast<int>(f / nz / n);
    Vec3 x = box.center;
    x[0] += -box.halfwidth + i * h;
    x[1] += -box.halfwidth + j * h;
    if (box.dim == 3) x[2] += -box.halfwidth + l * h;
    Vec3 val = v.eval(x, t);
    base[f] = {val[0], val[1], val[2]};
  });

  // centered difference along one axis, zero extension outside the box
  auto diff_axis = [&](const std::vector<double>& f, int axis) {
    std::vector<double> out(total, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < nz; ++l) {
          int ip = i, jp = j, lp = l, im = i, jm = j, lm = l;
          (axis == 0 ? ip : axis == 1 ? jp : lp) += 1;
          (axis == 0 ? im : axis == 1 ? jm : lm) -= 1;
          double fp = 0, fm = 0;
          if (ip < n && jp < n && lp < nz) fp = f[idx(ip, jp, lp)];
          if (im >= 0 && jm >= 0 && lm >= 0) fm = f[idx(im, jm, lm)];
          out[idx(i, j, l)] = (fp - fm) / (2 * h);
        }
    return out;
  };

  // trapezoid cell weight; with compact support interior the ends carry ~0
  auto integ_sq = [&](const std::vector<double>& f) {
    double acc = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < nz; ++l) {
          double wgt = 1.0;
          wgt *= (i == 0 || i == n - 1) ? 0.5 : 1.0;
          wgt *= (j == 0 || j == n - 1) ? 0.5 : 1.0;
          if (box.dim == 3) wgt *= (l == 0 || l == nz - 1) ? 0.5 : 1.0;
          double u = f[idx(i, j, l)];
          acc += wgt * u * u;
        }
    return acc * std::pow(h, box.dim);
  };

  const int ncomp = box.dim;
  double slice = 0;
  for (int c = 0; c < ncomp; ++c) {
    std::vector<double> comp(total);
    for (std::size_t f = 0; f < total; ++f) comp[f] = base[f][c];
    // breadth-first over multi-index orders: keep all D^alpha with |alpha|=m
    std::vector<std::pair<std::array<int, 3>, std::vector<double>>> level;
    level.push_back({{0, 0, 0}, comp});
    slice += integ_sq(comp);
    for (int m = 1; m <= k; ++m) {
      std::vector<std::pair<std::array<int, 3>, std::vector<double>>> next;
      for (auto& [alpha, field] : level)
        for (int axis = 0; axis < box.dim; ++axis) {
          // extend only in nondecreasing axis order to visit each alpha once
          bool tail_zero = true;
          for (int b = axis + 1; b < 3; ++b) tail_zero = tail_zero && alpha[b] == 0;
          if (!tail_zero) continue;
          auto beta = alpha;
          beta[axis] += 1;
          next.push_back({beta, diff_axis(field, axis)});
        }
      for (auto& [beta, field] : next) slice += integ_sq(field);
      level = std::move(next);
    }
  }
  return slice;
}

}  // namespace detail

// Squared space-time Sobolev norm: int_0^1 sum_i sum_{|alpha|<=k}
// int (D^alpha v_i)^2 dx dt on the box grid, trapezoid in x and t. The
// Richardson pair (h vs 2h) estimates the FD truncation error; it is
// reported, not enforced, because high orders (k >= 4) of steep cutoffs are
// legitimately hard to resolve and the value at a fixed grid is still a
// well-defined, reproducible constant. Callers decide how much error to
// accept.
inline SobolevReport sobolev_norm_sq(const VelocityField& v, int k, const BoxGrid& box) {
  if (k < 0) throw ValidationError("sobolev_norm_sq: negative order");
  if (box.n < 5 || box.n % 2 == 0)
    throw ValidationError("sobolev_norm_sq: nodes per axis must be odd and >= 5");
  if (box.time_nodes < 2) throw ValidationError("sobolev_norm_sq: need >= 2 time nodes");

  auto time_integral = [&](int stride) {
    double acc = 0;
    const int nt = box.time_nodes;
    const double dt = 1.0 / (nt - 1);
    for (int it = 0; it < nt; ++it) {
      double wt = (it == 0 || it == nt - 1) ? 0.5 : 1.0;
      acc += wt * dt * detail::sobolev_slice(v, it * dt, box, k, stride);
    }
    return acc;
  };

  SobolevReport rep;
  rep.value = time_integral(1);
  double coarse = time_integral(2);
  rep.richardson_error = std::abs(rep.value - coarse) / 3.0;
  return rep;
}

struct AdmissibilityReport {
  double match_residual = 0;
  double norm = 0;
  double norm_richardson = 0;
  bool maps_to_target = false;
  bool norm_within_bound = false;
  double tol_match = 0;
};

// Distance from a point to the manifold: chart projection when an inverse
// chart exists, nearest sample node otherwise.
inline double distance_to_manifold(const Vec3& x, const EmbeddedManifold& N) {
  if (N.chart_inv && N.chart) return (x - N.chart(N.chart_inv(x))).norm();
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < N.grid.nodes(); ++k) best = std::min(best, (x - N.position(k)).norm());
  return best;
}

// Checks the two admissibility clauses for v against the pair (M, N): the
// time-one flow must carry M into N (within tol) and the space-time Sobolev
// norm must not exceed P.
inline AdmissibilityReport admissibility_check(const VelocityField& v,
                                               const EmbeddedManifold& M,
                                               const EmbeddedManifold& N, double P, int k,
                                               const BoxGrid& box, const EvolveOptions& eopt = {},
                                               double tol_match_factor = 1e-6) {
  AdmissibilityReport rep;
  ManifoldSeeds seeds = manifold_seeds(M, 1);
  MorphTrajectory rec = evolve(v, seeds.points, seeds.w0, seeds.s0, seeds.pairs, eopt);
  double worst = 0;
  for (int kk = 0; kk < rec.nseeds; ++kk)
    worst = std::max(worst, distance_to_manifold(rec.position(kk, rec.nt() - 1), N));
  rep.match_residual = worst;
  rep.tol_match = tol_match_factor * N.diameter();
  rep.maps_to_target = worst <= rep.tol_match;
  SobolevReport sob = sobolev_norm_sq(v, k, box);
  rep.norm = std::sqrt(sob.value);
  rep.norm_richardson = sob.richardson_error;
  rep.norm_within_bound = rep.norm <= P;
  return rep;
}

}  // namespace morphforge
