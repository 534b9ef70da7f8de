#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "evolve.hpp"
#include "forms.hpp"
#include "manifold.hpp"
#include "tensor.hpp"

namespace morphforge {

struct EnergyWeights {
  double B1 = 1.0, B2 = 1.0;
  void validate() const {
    if (B1 < 0 || B2 < 0) throw ValidationError("energy weights must be nonnegative");
  }
};

struct EnergyReport {
  double value = 0;
  double metric_term = 0;       // unweighted integral of the metric strain
  double second_form_term = 0;  // unweighted integral of the curvature strain
};

// Metric distortion of a sampled map h: M -> N:
// Phi(h) = int_M |h*g_N - g_M|^2 w_M.
inline double phi(const MapDifferentialSamples& map, const EmbeddedManifold& M,
                  const EmbeddedManifold& N) {
  auto gM = first_fundamental_form(M);
  auto gN = first_fundamental_form(N);
  auto strain = tensor_sub(pullback(gN, map, N), gM);
  return integrate(fiber_norm_sq(strain, gM), M);
}

// Full distortion with both fundamental forms, unweighted:
// Lambda(h) = Phi(h) + int_M |h*II_N - II_M|^2 w_M.
inline EnergyReport lambda_energy(const MapDifferentialSamples& map, const EmbeddedManifold& M,
                                  const EmbeddedManifold& N) {
  if (!map.has_second)
    throw ValidationError("lambda_energy needs second differentials of the map");
  auto gM = first_fundamental_form(M);
  auto gN = first_fundamental_form(N);
  auto iiM = second_fundamental_form(M);
  auto iiN = second_fundamental_form(N);
  EnergyReport rep;
  rep.metric_term = integrate(fiber_norm_sq(tensor_sub(pullback(gN, map, N), gM), gM), M);
  rep.second_form_term = integrate(fiber_norm_sq(tensor_sub(pullback(iiN, map, N), iiM), gM), M);
  rep.value = rep.metric_term + rep.second_form_term;
  return rep;
}

namespace detail {

// Assigns target-chart parameters to the sampled image points.
inline void assign_target_params(MapDifferentialSamples& S, const EmbeddedManifold& N) {
  if (!N.chart_inv)
    throw ValidationError("energy evaluation against this target needs an invertible chart");
  for (int k = 0; k < S.source_grid.nodes(); ++k) {
    Param v = N.chart_inv(S.image_at(k));
    S.image_param[2 * k] = v[0];
    S.image_param[2 * k + 1] = v[1];
  }
}

// Seed set for the augmented flow: either the manifold's own nodes or the
// nodes pushed through a chart diffeomorphism.
struct FlowSeeds {
  std::vector<Vec3> points;
  std::vector<std::vector<Vec3>> w0, s0;
  std::vector<std::pair<int, int>> pairs;
};

inline FlowSeeds seeds_from_samples(const MapDifferentialSamples& pre, int dim) {
  FlowSeeds out;
  for (int a = 0; a < dim; ++a)
    for (int b = a; b < dim; ++b) out.pairs.emplace_back(a, b);
  const int n = pre.source_grid.nodes();
  out.points.resize(n);
  out.w0.resize(n);
  out.s0.resize(n);
  for (int k = 0; k < n; ++k) {
    out.points[k] = pre.image_at(k);
    out.w0[k].resize(dim);
    for (int a = 0; a < dim; ++a) out.w0[k][a] = pre.d1_col(k, a);
    out.s0[k].resize(out.pairs.size());
    for (std::size_t p = 0; p < out.pairs.size(); ++p)
      out.s0[k][p] = pre.d2_pair(k, out.pairs[p].first, out.pairs[p].second);
  }
  return out;
}

}  // namespace detail

// Bending energy of the time-one map of the flow of v, optionally
// precomposed with a chart diffeomorphism of M:
// E = B1 int |(psi o phi)*g_N - g_M|^2 + B2 int |(psi o phi)*II_N - II_M|^2.
inline EnergyReport bending_energy_E(const VelocityField& v, const EmbeddedManifold& M,
                                     const EmbeddedManifold& N, const EnergyWeights& w,
                                     const ChartMap* precompose = nullptr,
                                     const EvolveOptions& eopt = {}) {
  w.validate();
  detail::FlowSeeds seeds;
  if (precompose) {
    auto pre = map_samples_from_chart_map(M, M, *precompose, true);
    seeds = detail::seeds_from_samples(pre, M.dim);
  } else {
    ManifoldSeeds ms = manifold_seeds(M, 2);
    seeds.points = std::move(ms.points);
    seeds.w0 = std::move(ms.w0);
    seeds.s0 = std::move(ms.s0);
    seeds.pairs = std::move(ms.pairs);
  }
  MorphTrajectory rec = evolve(v, seeds.points, seeds.w0, seeds.s0, seeds.pairs, eopt);
  MapDifferentialSamples S = trajectory_slice(rec, M, rec.nt() - 1);
  detail::assign_target_params(S, N);

  auto gM = first_fundamental_form(M);
  auto gN = first_fundamental_form(N);
  auto iiM = second_fundamental_form(M);
  auto iiN = second_fundamental_form(N);
  EnergyReport rep;
  rep.metric_term = integrate(fiber_norm_sq(tensor_sub(pullback(gN, S, N), gM), gM), M);
  rep.second_form_term = integrate(fiber_norm_sq(tensor_sub(pullback(iiN, S, N), iiM), gM), M);
  rep.value = w.B1 * rep.metric_term + w.B2 * rep.second_form_term;
  return rep;
}

// Coarse node-collision guard for an intermediate state: distinct sample
// nodes must not (nearly) coincide. Subsampled for large grids.
inline void check_intermediate_embedded(const EmbeddedManifold& Mt) {
  const int n = Mt.grid.nodes();
  int stride = 1;
  while (n / stride > 1024) stride *= 2;
  double diam = Mt.diameter();
  if (!(diam > 0)) throw DegenerateIntermediate("intermediate state collapsed to a point");
  const double tol = 1e-9 * diam;
  for (int i = 0; i < n; i += stride)
    for (int j = i + stride; j < n; j += stride)
      if ((Mt.position(i) - Mt.position(j)).norm() < tol)
        throw DegenerateIntermediate("intermediate state has colliding sample nodes");
}

struct MorphingOptions {
  EvolveOptions evolve_opts;   // steps doubles as the initial interval count
  int fixed_intervals = 0;     // > 0: evaluate at exactly this trapezoid resolution
  double time_rel_tol = 1e-6;  // refinement stop for the t-quadrature
  int max_time_refinements = 8;
  bool collision_check = true;
};

struct MorphingReport {
  double value = 0;
  double metric_term = 0;
  double second_form_term = 0;
  int time_intervals = 0;
  std::vector<std::pair<int, double>> refinement_history;  // (intervals, value)
};

namespace detail {

// Trapezoid in t with interval doubling; strain(t, K) returns the two space
// integrals at time t, where t is a node of the K-interval grid.
inline MorphingReport refine_time_quadrature(
    const std::function<std::pair<double, double>(double, int)>& strain, const EnergyWeights& w,
    const MorphingOptions& opt) {
  w.validate();
  MorphingReport rep;
  int K = opt.fixed_intervals > 0 ? opt.fixed_intervals : std::max(2, opt.evolve_opts.steps);
  std::vector<std::pair<double, double>> vals(K + 1);
  for (int i = 0; i <= K; ++i) vals[i] = strain(static_cast<double>(i) / K, K);

  auto trapezoid = [](const std::vector<std::pair<double, double>>& vv) {
    double m = 0, b = 0;
    const int n = static_cast<int>(vv.size()) - 1;
    for (int i = 0; i <= n; ++i) {
      double wt = (i == 0 || i == n) ? 0.5 : 1.0;
      m += wt * vv[i].first;
      b += wt * vv[i].second;
    }
    return std::pair<double, double>(m / n, b / n);
  };
  auto total = [&](const std::pair<double, double>& mb) {
    return w.B1 * mb.first + w.B2 * mb.second;
  };

  auto mb = trapezoid(vals);
  rep.refinement_history.emplace_back(K, total(mb));
  if (opt.fixed_intervals <= 0) {
    for (int r = 0; r < opt.max_time_refinements; ++r) {
      std::vector<std::pair<double, double>> fine(2 * K + 1);
      for (int i = 0; i <= K; ++i) fine[2 * i] = vals[i];
      for (int i = 0; i < K; ++i) fine[2 * i + 1] = strain((2 * i + 1) / (2.0 * K), 2 * K);
      K *= 2;
      vals = std::move(fine);
      auto mb2 = trapezoid(vals);
      rep.refinement_history.emplace_back(K, total(mb2));
      double change = std::abs(total(mb2) - total(mb));
      mb = mb2;
      if (change <= opt.time_rel_tol * std::max(std::abs(total(mb)), 1e-30)) break;
      if (r + 1 == opt.max_time_refinements)
        throw NoConvergence("morphing energy time quadrature did not settle");
    }
  }
  rep.metric_term = mb.first;
  rep.second_form_term = mb.second;
  rep.value = total(mb);
  rep.time_intervals = K;
  return rep;
}

}  // namespace detail

// Time-sliced morphing energy driven by a slice supplier: slices(t, K)
// returns the differentials of F(., t) o r on M's grid with image parameters
// in the chart of the pushed-forward intermediate state (K is the current
// time-grid interval count, for suppliers that cache trajectories).
// Intermediate fundamental forms come from the pushed grid positions.
inline MorphingReport morphing_energy_slices(
    const std::function<MapDifferentialSamples(double, int)>& slices, const EmbeddedManifold& M,
    const EnergyWeights& w, const MorphingOptions& opt = {}) {
  auto gM = first_fundamental_form(M);
  auto iiM = second_fundamental_form(M);
  auto strain = [&](double t, int K) {
    MapDifferentialSamples S = slices(t, K);
    EmbeddedManifold Mt = make_tabulated(M.grid, S.image, M.orientation_sign);
    if (opt.collision_check) check_intermediate_embedded(Mt);
    auto gT = first_fundamental_form(Mt);
    auto iiT = second_fundamental_form(Mt);
    double m = integrate(fiber_norm_sq(tensor_sub(pullback(gT, S, Mt), gM), gM), M);
    double b = integrate(fiber_norm_sq(tensor_sub(pullback(iiT, S, Mt), iiM), gM), M);
    return std::pair<double, double>(m, b);
  };
  return detail::refine_time_quadrature(strain, w, opt);
}

// Morphing energy of the flow of v. The optional isotopy reparametrizes the
// source before the flow at each time: F_G(p, t) = F(G(p, t), t); the
// intermediate states are still the plain flow images of M.
inline MorphingReport morphing_energy(
    const VelocityField& v, const EmbeddedManifold& M, const EnergyWeights& w,
    const MorphingOptions& opt = {},
    const std::function<ChartMap(double)>* isotopy = nullptr) {
  ManifoldSeeds ms = manifold_seeds(M, 2);

  // one trajectory record shared across slice requests; re-evolved when the
  // requested time grid refines (each new grid contains the previous nodes)
  struct Cache {
    MorphTrajectory rec;
    int intervals = 0;
  };
  auto cache = std::make_shared<Cache>();
  auto aligned_slice = [&, cache](double t, int K) {
    if (cache->intervals <= 0 || cache->intervals % K != 0) {
      int target = std::max(K, cache->intervals <= 0 ? K : 2 * cache->intervals);
      while (target % K != 0) target *= 2;
      EvolveOptions eo = opt.evolve_opts;
      eo.t0 = 0;
      eo.t1 = 1;
      eo.steps = target;
      cache->rec = evolve(v, ms.points, ms.w0, ms.s0, ms.pairs, eo);
      cache->intervals = target;
    }
    int it = static_cast<int>(std::round(t * cache->intervals));
    return trajectory_slice(cache->rec, M, it);
  };

  if (!isotopy) return morphing_energy_slices(aligned_slice, M, w, opt);

  auto gM = first_fundamental_form(M);
  auto iiM = second_fundamental_form(M);
  auto strain = [&](double t, int K) {
    // plain push of M's nodes charts the intermediate state
    MapDifferentialSamples plain = aligned_slice(t, K);
    EmbeddedManifold Mt = make_tabulated(M.grid, plain.image, M.orientation_sign);
    if (opt.collision_check) check_intermediate_embedded(Mt);
    auto gT = first_fundamental_form(Mt);
    auto iiT = second_fundamental_form(Mt);

    // reparametrized map: evolve the G_t-shifted seeds up to time t
    ChartMap Gt = (*isotopy)(t);
    auto pre = map_samples_from_chart_map(M, M, Gt, true);
    MapDifferentialSamples S;
    if (t <= 0) {
      S = pre;
    } else {
      detail::FlowSeeds fs = detail::seeds_from_samples(pre, M.dim);
      EvolveOptions eo = opt.evolve_opts;
      eo.t0 = 0;
      eo.t1 = t;
      MorphTrajectory rec = evolve(v, fs.points, fs.w0, fs.s0, fs.pairs, eo);
      S = trajectory_slice(rec, M, rec.nt() - 1);
    }
    // intermediate-chart parameter of the image of node u is G_t(u)
    for (int k = 0; k < M.grid.nodes(); ++k) {
      S.image_param[2 * k] = pre.image_param[2 * k];
      S.image_param[2 * k + 1] = pre.image_param[2 * k + 1];
    }
    double m = integrate(fiber_norm_sq(tensor_sub(pullback(gT, S, Mt), gM), gM), M);
    double b = integrate(fiber_norm_sq(tensor_sub(pullback(iiT, S, Mt), iiM), gM), M);
    return std::pair<double, double>(m, b);
  };
  return detail::refine_time_quadrature(strain, w, opt);
}

// Ambient analytic morph with spatial derivatives, for energies of morphs
// given in closed form rather than through a velocity field.
struct AmbientMorph {
  std::function<Vec3(const Vec3&, double)> F;
  std::function<Eigen::Matrix3d(const Vec3&, double)> DF;
  // second spatial derivative contracted with two directions
  std::function<Vec3(const Vec3&, double, const Vec3&, const Vec3&)> D2F;
};

inline MapDifferentialSamples morph_slice(const AmbientMorph& morph, const EmbeddedManifold& M,
                                          double t) {
  ChartDerivs D = chart_derivatives(M, true);
  MapDifferentialSamples S;
  S.source_grid = M.grid;
  S.sdim = M.dim;
  const int n = M.grid.nodes();
  S.image.resize(3 * n);
  S.image_param.resize(2 * n);
  S.d1.resize(static_cast<std::size_t>(n) * S.sdim * 3);
  S.d2.resize(static_cast<std::size_t>(n) * S.npairs() * 3);
  S.has_second = true;
  for (int i0 = 0; i0 < M.grid.shape[0]; ++i0)
    for (int i1 = 0; i1 < M.grid.shape[1]; ++i1) {
      int k = M.grid.id(i0, i1);
      Param u = M.param(i0, i1);
      S.image_param[2 * k] = u[0];
      S.image_param[2 * k + 1] = u[1];
      Vec3 p = M.position(k);
      Vec3 q = morph.F(p, t);
      for (int c = 0; c < 3; ++c) S.image[3 * k + c] = q[c];
      Eigen::Matrix3d J = morph.DF(p, t);
      for (int a = 0; a < M.dim; ++a) {
        Vec3 col = J * D.tangent(k, a);
        for (int c = 0; c < 3; ++c) S.d1[(k * S.sdim + a) * 3 + c] = col[c];
      }
      int pair = 0;
      for (int a = 0; a < M.dim; ++a)
        for (int b = a; b < M.dim; ++b, ++pair) {
          Vec3 col = morph.D2F(p, t, D.tangent(k, a), D.tangent(k, b)) + J * D.second(k, a, b);
          for (int c = 0; c < 3; ++c) S.d2[(k * S.npairs() + pair) * 3 + c] = col[c];
        }
    }
  return S;
}

inline MorphingReport morphing_energy_analytic(const AmbientMorph& morph,
                                               const EmbeddedManifold& M, const EnergyWeights& w,
                                               const MorphingOptions& opt = {}) {
  auto slices = [&](double t, int) { return morph_slice(morph, M, t); };
  return morphing_energy_slices(slices, M, w, opt);
}

}  // namespace morphforge
