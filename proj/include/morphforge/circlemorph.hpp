#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "quadrature.hpp"

namespace morphforge {

// Distortion density of the radial circle map as a function of the radius.
inline double u_profile(double s) {
  return (s * s - 1) * (s * s - 1) + (s - 1) * (s - 1);
}
inline double u_profile_d1(double s) { return 4 * s * (s * s - 1) + 2 * (s - 1); }

// u_profile(1 + e) expanded in the offset e: 5e^2 + 4e^3 + e^4. Equal by
// algebra, but free of the (s^2 - 1) cancellation that floods the boundary
// layer with rounding noise when e is tiny.
inline double u_profile_at_offset(double e) { return e * e * (5.0 + e * (4.0 + e)); }

namespace detail {

// Integrals over s in [1, R] whose integrands have a 1/sqrt(mu + c(s-1)^2)
// boundary layer at s = 1. The substitution s = 1 + exp(sigma) clusters
// nodes into the layer; the truncated tail is exponentially small. The
// density receives both s and the offset e = s - 1 exactly, so it can keep
// full relative accuracy deep inside the layer.
template <class F>
double layer_integral(F density, double R, double rel_tol = 1e-10) {
  const double sig_hi = std::log(R - 1);
  const double sig_lo = sig_hi - 46.0;  // exp(-46) ~ 1e-20 relative tail
  auto g = [&](double sig) {
    double e = std::exp(sig);
    return density(1.0 + e, e) * e;
  };
  return integrate_adaptive(g, sig_lo, sig_hi, rel_tol);
}

inline double upper_integral(double mu, double R) {  // int sqrt(mu+u)/s ds
  return layer_integral(
      [mu](double s, double e) { return std::sqrt(mu + u_profile_at_offset(e)) / s; }, R);
}

inline double lower_integral(double mu, double R) {  // int ds/(s sqrt(mu+u))
  return layer_integral(
      [mu](double s, double e) { return 1.0 / (s * std::sqrt(mu + u_profile_at_offset(e))); }, R);
}

}  // namespace detail

// Product of the two multiplier integrals; strictly decreasing in mu with
// limit (ln R)^2 as mu -> infinity.
inline double f_mu(double mu, double R) {
  if (!(mu > 0) || !(R > 1)) throw ValidationError("f_mu needs mu > 0 and R > 1");
  return detail::upper_integral(mu, R) * detail::lower_integral(mu, R);
}

struct CircleProblem {
  double R = 2.0;
  double A = 1.0;
  void validate() const {
    if (!(R > 1)) throw ValidationError("circle problem needs R > 1");
    if (!(A > 0)) throw ValidationError("circle problem needs A > 0");
  }
};

struct Multipliers {
  double mu = 0;
  double lambda = 0;
  double roundtrip_residual = 0;  // |f(mu) - A| / A
};

// Solves f(mu) = A for the multiplier pair. Geometric bisection on the
// monotone f, bracket grown upward decade by decade.
inline Multipliers solve_multipliers(const CircleProblem& p) {
  p.validate();
  const double logR = std::log(p.R);
  if (p.A <= logR * logR)
    throw Infeasible("constraint level A must exceed (ln R)^2 for solvability");

  double lo = 1e-6, hi = 1.0;
  while (f_mu(lo, p.R) <= p.A) {
    lo /= 10.0;
    if (lo < 1e-30) throw BracketFailure("no bracket: A is too large for the mu range");
  }
  while (f_mu(hi, p.R) > p.A) {
    hi *= 10.0;
    if (hi > 1e12) throw BracketFailure("no bracket below mu = 1e12");
  }

  Multipliers out;
  double mid = std::sqrt(lo * hi), fm = 0;
  for (int iter = 0; iter < 200; ++iter) {
    mid = std::sqrt(lo * hi);
    fm = f_mu(mid, p.R);
    if (std::abs(fm - p.A) < 1e-9 * p.A) break;
    (fm > p.A ? lo : hi) = mid;
    if (hi / lo < 1 + 1e-15) break;  // interval exhausted at machine width
  }
  out.mu = mid;
  out.roundtrip_residual = std::abs(fm - p.A) / p.A;
  if (out.roundtrip_residual >= 1e-9)
    throw NoConvergence("multiplier bisection stalled before the roundtrip tolerance");
  double low = detail::lower_integral(out.mu, p.R);
  out.lambda = 1.0 / (low * low);
  return out;
}

namespace detail {

// Cumulative table of T(x) = int_1^x ds/(s sqrt(mu+u)) on layer-clustered
// nodes, with exact-per-panel Gauss-Legendre increments.
struct RadiusTable {
  double mu = 0, R = 2;
  std::vector<double> x, T;  // increasing, T[0] ~ 0 at x[0] ~ 1
  double T_R = 0;

  static double density(double mu, double s) {
    return 1.0 / (s * std::sqrt(mu + u_profile(s)));
  }

  RadiusTable(double mu_, double R_, int n = 2049) : mu(mu_), R(R_) {
    const double sig_hi = std::log(R - 1);
    const double sig_lo = sig_hi - 46.0;
    x.resize(n);
    T.resize(n);
    const auto& rule = gl15();
    double acc = 0;
    x[0] = 1.0 + std::exp(sig_lo);
    T[0] = 0.0;  // tail below x[0] is ~1e-20 relative
    for (int i = 1; i < n; ++i) {
      double s0 = sig_lo + (sig_hi - sig_lo) * (i - 1) / (n - 1);
      double s1 = sig_lo + (sig_hi - sig_lo) * i / (n - 1);
      double half = (s1 - s0) / 2, mid = (s0 + s1) / 2, inc = 0;
      for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
        double sig = mid + half * rule.nodes[q];
        double e = std::exp(sig);
        inc += rule.weights[q] * e / ((1.0 + e) * std::sqrt(mu + u_profile_at_offset(e)));
      }
      acc += inc * half;
      x[i] = 1.0 + std::exp(s1);
      T[i] = acc;
    }
    T_R = acc;
  }

  // T(x) for arbitrary x via nearest table node plus a local GL15 segment
  double eval(double xq) const {
    xq = std::min(std::max(xq, x.front()), x.back());
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    int i = std::max<int>(0, static_cast<int>(it - x.begin()) - 1);
    const auto& rule = gl15();
    double half = (xq - x[i]) / 2, mid = (x[i] + xq) / 2, inc = 0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q)
      inc += rule.weights[q] * density(mu, mid + half * rule.nodes[q]);
    return T[i] + inc * half;
  }

  // inverse: x with T(x) = target, Newton polished from the table bracket
  double invert(double target) const {
    if (target <= 0) return 1.0;
    if (target >= T_R) return R;
    auto it = std::upper_bound(T.begin(), T.end(), target);
    int i = std::max<int>(0, static_cast<int>(it - T.begin()) - 1);
    int j = std::min<int>(static_cast<int>(T.size()) - 1, i + 1);
    double xq = x[i] + (x[j] - x[i]) * (target - T[i]) /
                            std::max(T[j] - T[i], 1e-300);
    for (int iter = 0; iter < 60; ++iter) {
      double res = eval(xq) - target;
      if (std::abs(res) < 1e-14 * T_R) break;
      double step = res / density(mu, xq);
      xq -= step;
      xq = std::min(std::max(xq, 1.0), R);
      if (std::abs(step) < 1e-16 * R) break;
    }
    return xq;
  }
};

}  // namespace detail

struct RadiusSolution {
  std::vector<double> t, psi;
  double cross_check_max = 0;  // max |IVP route - inversion route|
  double cross_tol = 1e-5;
};

// Radius function of the constrained circle morph: psi(t) with
// T(psi(t)) = t T(R), cross-checked against RK4 on the equivalent IVP
// psi' = psi sqrt(mu + u(psi)) / sqrt(lambda).
inline RadiusSolution solve_radius(double mu, double lambda, double R,
                                   const std::vector<double>& ts, double cross_tol = 1e-5) {
  if (!(mu > 0) || !(lambda > 0) || !(R > 1))
    throw ValidationError("solve_radius needs positive multipliers and R > 1");
  for (double t : ts)
    if (t < 0 || t > 1) throw ValidationError("solve_radius: samples must lie in [0,1]");

  detail::RadiusTable table(mu, R);
  RadiusSolution out;
  out.t = ts;
  out.cross_tol = cross_tol;
  out.psi.resize(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out.psi[i] = table.invert(ts[i] * table.T_R);

  // IVP cross-check on a fine uniform grid, linear interpolation to ts
  const int K = 4096;
  std::vector<double> ivp(K + 1);
  ivp[0] = 1.0;
  const double sqrt_lambda = std::sqrt(lambda);
  auto rhs = [&](double y) {
    y = std::min(std::max(y, 1.0), R + 1.0);
    return y * std::sqrt(mu + u_profile(y)) / sqrt_lambda;
  };
  const double h = 1.0 / K;
  double y = 1.0;
  for (int i = 0; i < K; ++i) {
    double k1 = rhs(y);
    double k2 = rhs(y + h / 2 * k1);
    double k3 = rhs(y + h / 2 * k2);
    double k4 = rhs(y + h * k3);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    ivp[i + 1] = y;
  }
  double worst = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double pos = ts[i] * K;
    int j = std::min(K - 1, static_cast<int>(pos));
    double frac = pos - j;
    double via_ivp = ivp[j] * (1 - frac) + ivp[j + 1] * frac;
    worst = std::max(worst, std::abs(via_ivp - out.psi[i]));
  }
  out.cross_check_max = worst;
  if (worst > cross_tol)
    throw NoConvergence("solve_radius: IVP and integral-equation routes disagree");
  return out;
}

// J(psi) = int_0^1 u(psi) dt by Simpson on a uniform grid (odd count).
inline double functional_J(const std::vector<double>& psi, double t0 = 0, double t1 = 1) {
  std::vector<double> vals(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) vals[i] = u_profile(psi[i]);
  return simpson(vals, (t1 - t0) / (static_cast<int>(psi.size()) - 1));
}

namespace detail {

// 4th-order derivative of uniformly sampled data (open interval stencils).
inline std::vector<double> sampled_derivative(const std::vector<double>& f, double h) {
  Grid g;
  g.dim = 1;
  g.shape = {static_cast<int>(f.size()), 1};
  g.origin = {0.0, 0.0};
  g.spacing = {h, 1.0};
  g.periodic = {false, false};
  g.polar = false;
  return fd_derivative(g, f, 0, 1);
}

}  // namespace detail

// G(psi) = int_0^1 (psi'/psi)^2 dt - A, derivative by 4th-order differences.
inline double functional_G(const std::vector<double>& psi, double A) {
  const int n = static_cast<int>(psi.size());
  const double h = 1.0 / (n - 1);
  auto d = detail::sampled_derivative(psi, h);
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = (d[i] / psi[i]) * (d[i] / psi[i]);
  return simpson(vals, h) - A;
}

struct CircleMorphSolution {
  double R = 2, A = 1;
  double mu = 0, lambda = 0;
  std::vector<double> t, psi;  // requested output samples
  double J_value = 0, G_value = 0;
  double hamiltonian_residual = 0;
  double multiplier_roundtrip = 0;
  double cross_check_max = 0;
  // pinned tolerances, reported alongside the values
  double constraint_tol = 1e-4;
  double hamiltonian_tol_scale = 1e-6;  // residual bound is this times (1+mu)
  double cross_tol = 1e-5;
};

struct CircleDiagnostics {
  double J = 0, G = 0, hamiltonian_residual = 0;
  bool constraint_ok = false, hamiltonian_ok = false;
};

// Diagnostics on a dense internal grid: J, G, and the Hamiltonian-constancy
// residual max_t |lambda psi'^2/psi^2 - u(psi) - mu| with psi' from sampled
// differences (independent of the defining ODE).
inline CircleDiagnostics verify_solution(double mu, double lambda, double R, double A,
                                         int dense_nodes = 4097) {
  if (dense_nodes < 9 || dense_nodes % 2 == 0)
    throw ValidationError("verify_solution needs an odd dense grid size >= 9");
  detail::RadiusTable table(mu, R);
  std::vector<double> psi(dense_nodes);
  for (int i = 0; i < dense_nodes; ++i)
    psi[i] = table.invert(table.T_R * i / (dense_nodes - 1));
  const double h = 1.0 / (dense_nodes - 1);

  CircleDiagnostics diag;
  diag.J = functional_J(psi);
  diag.G = functional_G(psi, A);
  auto d = detail::sampled_derivative(psi, h);
  double worst = 0;
  for (int i = 0; i < dense_nodes; ++i) {
    double ratio = d[i] / psi[i];
    worst = std::max(worst, std::abs(lambda * ratio * ratio - u_profile(psi[i]) - mu));
  }
  diag.hamiltonian_residual = worst;
  diag.constraint_ok = std::abs(diag.G) < 1e-4;
  diag.hamiltonian_ok = worst < 1e-6 * (1 + mu);
  return diag;
}

// Full pipeline: multipliers, radius samples, diagnostics.
inline CircleMorphSolution solve_circle_morph(const CircleProblem& p, int t_samples = 65) {
  if (t_samples < 2) throw ValidationError("need at least 2 output samples");
  CircleMorphSolution sol;
  sol.R = p.R;
  sol.A = p.A;
  Multipliers m = solve_multipliers(p);
  sol.mu = m.mu;
  sol.lambda = m.lambda;
  sol.multiplier_roundtrip = m.roundtrip_residual;
  std::vector<double> ts(t_samples);
  for (int i = 0; i < t_samples; ++i) ts[i] = static_cast<double>(i) / (t_samples - 1);
  RadiusSolution rs = solve_radius(sol.mu, sol.lambda, p.R, ts);
  sol.t = std::move(rs.t);
  sol.psi = std::move(rs.psi);
  sol.cross_check_max = rs.cross_check_max;
  CircleDiagnostics diag = verify_solution(sol.mu, sol.lambda, p.R, p.A);
  sol.J_value = diag.J;
  sol.G_value = diag.G;
  sol.hamiltonian_residual = diag.hamiltonian_residual;
  for (std::size_t i = 1; i < sol.psi.size(); ++i)
    if (sol.psi[i] < sol.psi[i - 1] - 1e-12)
      throw NoConvergence("radius samples are not monotone");
  return sol;
}

struct ProbeCase {
  double epsilon_requested = 0;
  double epsilon_used = 0;
  bool feasible = false;  // a feasible scaling of epsilon was found
  double J_value = 0;
  bool passed = true;  // J did not drop below the solution value
};

struct ProbeReport {
  double J_base = 0;
  std::vector<ProbeCase> cases;
  bool all_passed = true;
};

// Local-minimality smoke test: perturb psi by eps*delta (delta vanishing at
// the endpoints), shrink eps until the constraint G <= 0 holds, and check
// the objective does not drop below the solution's value.
inline ProbeReport optimality_probe(const std::vector<double>& psi, double A,
                                    const std::vector<std::vector<double>>& deltas,
                                    const std::vector<double>& epsilons) {
  const int n = static_cast<int>(psi.size());
  ProbeReport rep;
  rep.J_base = functional_J(psi);
  for (const auto& delta : deltas) {
    if (static_cast<int>(delta.size()) != n)
      throw ValidationError("optimality_probe: perturbation size mismatch");
    if (std::abs(delta.front()) > 1e-12 || std::abs(delta.back()) > 1e-12)
      throw ValidationError("optimality_probe: perturbations must vanish at the endpoints");
    for (double eps : epsilons) {
      ProbeCase c;
      c.epsilon_requested = eps;
      double e = eps;
      bool ok = false;
      std::vector<double> cand(n);
      for (int halving = 0; halving < 40; ++halving) {
        for (int i = 0; i < n; ++i) cand[i] = psi[i] + e * delta[i];
        bool positive = true;
        for (int i = 0; i < n; ++i) positive = positive && cand[i] > 0;
        if (positive && functional_G(cand, A) <= 0) {
          ok = true;
          break;
        }
        e /= 2;
      }
      c.feasible = ok;
      if (ok) {
        c.epsilon_used = e;
        c.J_value = functional_J(cand);
        c.passed = c.J_value >= rep.J_base - 1e-8;
      }
      rep.all_passed = rep.all_passed && c.passed;
      rep.cases.push_back(c);
    }
  }
  return rep;
}

}  // namespace morphforge
