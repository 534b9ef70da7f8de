#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace morphforge {

struct QuadRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre nodes/weights by Newton iteration on P_n. Machine precision
// for any practical n.
inline QuadRule gauss_legendre(int n) {
  QuadRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  return r;
}

namespace detail {

inline const QuadRule& gl15() {
  static const QuadRule r = gauss_legendre(15);
  return r;
}

template <class F>
double gl_panel(F&& f, double a, double b, const QuadRule& r) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a), s = 0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i)
    s += r.weights[i] * f(mid + half * r.nodes[i]);
  return s * half;
}

template <class F>
double adaptive_rec(F&& f, double a, double b, double whole, double tol,
                    const QuadRule& r, int depth) {
  double m = 0.5 * (a + b);
  double left = gl_panel(f, a, m, r), right = gl_panel(f, m, b, r);
  double delta = left + right - whole;
  // Rounding floor: once delta sits at the rounding scale of the panel sums
  // themselves, bisection can only chase noise, so accept. Without this a
  // noisy integrand makes the tree grow exponentially before the depth cap.
  double floor = 8 * std::numeric_limits<double>::epsilon() *
                 (std::abs(left) + std::abs(right));
  if (std::abs(delta) <= std::max(tol, floor) || depth > 60) {
    if (depth > 60 && std::abs(delta) > 1e3 * tol)
      throw QuadratureFailure("adaptive quadrature failed to converge");
    return left + right;
  }
  return adaptive_rec(f, a, m, left, 0.5 * tol, r, depth + 1) +
         adaptive_rec(f, m, b, right, 0.5 * tol, r, depth + 1);
}

}  // namespace detail

// Adaptive Gauss-Legendre with relative tolerance. The absolute budget is set
// from a first whole-interval pass and tightened geometrically under bisection.
template <class F>
double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-10) {
  if (a == b) return 0.0;
  const QuadRule& r = detail::gl15();
  double whole = detail::gl_panel(f, a, b, r);
  double tol = rel_tol * std::max(std::abs(whole), 1e-300);
  return detail::adaptive_rec(f, a, b, whole, tol, r, 0);
}

// Composite trapezoid over tabulated values with uniform spacing h.
inline double trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * h;
}

// Composite Simpson; requires an odd number of samples.
inline double simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  if (n < 3 || n % 2 == 0)
    throw ValidationError("simpson needs an odd sample count >= 3");
  double s = f[0] + f[n - 1];
  for (std::size_t i = 1; i + 1 < n; ++i) s += f[i] * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Colatitude weights for cell-centered nodes th_j = (j+1/2)*pi/m on [0, pi].
// Interpolatory rule exact on span{sin(k*th)} up to k = m: the natural space
// for integrands of the form (smooth on the sphere) * sqrt(det g), which are
// odd about both poles. Positive weights, ~h in the interior; integrates
// sin(th) exactly, unlike the plain midpoint rule (error h^2/12 there).
inline std::vector<double> polar_weights(int m) {
  std::vector<double> w(m, 0.0);
  const double h = std::numbers::pi / m;
  for (int j = 0; j < m; ++j) {
    double th = (j + 0.5) * h;
    double s = 0;
    for (int k = 1; k < m; k += 2) s += std::sin(k * th) / k;
    s *= 4.0 / m;
    if (m % 2 == 1) s += 2.0 / (double(m) * m) * std::sin(m * th);
    w[j] = s;
  }
  return w;
}

}  // namespace morphforge
