#pragma once

#include <cmath>
#include <complex>
#include <utility>

#include "errors.hpp"
#include "forms.hpp"
#include "manifold.hpp"
#include "quadrature.hpp"

namespace morphforge {

using Complex = std::complex<double>;

struct MobiusMap {
  Complex a{1, 0}, b{0, 0}, c{0, 0}, d{1, 0};

  Complex det() const { return a * d - b * c; }
  double scale() const {
    double m = std::max(std::max(std::abs(a), std::abs(b)), std::max(std::abs(c), std::abs(d)));
    return m * m;
  }
  void validate() const {
    if (std::abs(det()) <= 1e-12 * std::max(scale(), 1e-300))
      throw DegenerateMap("Mobius map has (near-)zero determinant");
  }
  Complex apply(const Complex& z) const { return (a * z + b) / (c * z + d); }
};

// Class invariant (q, r) of a Mobius map under left composition with target
// isometries: determinant normalized to one, q = |conj(b) a + conj(d) c|,
// r = |b|^2 + |d|^2.
struct CanonicalMobius {
  double q = 0;
  double r = 1;
};

inline CanonicalMobius reduce(const MobiusMap& m) {
  m.validate();
  Complex s = std::sqrt(m.det());
  Complex a = m.a / s, b = m.b / s, c = m.c / s, d = m.d / s;
  CanonicalMobius out;
  out.q = std::abs(std::conj(b) * a + std::conj(d) * c);
  out.r = std::norm(b) + std::norm(d);
  return out;
}

inline MobiusMap canonical_map(const CanonicalMobius& cm) {
  if (!(cm.r > 0)) throw ValidationError("canonical class needs r > 0");
  MobiusMap m;
  m.a = Complex(1, 0);
  m.b = Complex(0, 0);
  m.c = Complex(cm.q, 0);
  m.d = Complex(cm.r, 0);
  return m;
}

// Deformation energy of the canonical class against a target sphere of
// radius R, in closed form.
inline double psi_bar_closed(double q, double r, double R) {
  if (!(r > 0)) throw ValidationError("psi_bar_closed needs r > 0");
  const double pi = 3.14159265358979323846;
  double w = 1 + q * q;
  return pi - 2 * pi * R * R +
         (pi * std::pow(R, 4) / (3 * r * r)) * (w + (r - 1) * r) * (w + r + r * r);
}

// Closed forms of the periodic integrals int (xi + eta cos phi)^{-2} dphi
// and int (xi + eta cos phi)^{-4} dphi.
inline std::pair<double, double> inner_integrals(double xi, double eta) {
  if (!(xi > std::abs(eta))) throw DomainError("inner integrals need xi > |eta|");
  const double pi = 3.14159265358979323846;
  double disc = xi * xi - eta * eta;
  double I2 = 2 * pi * xi / std::pow(disc, 1.5);
  double I4 = pi * xi * (2 * xi * xi + 3 * eta * eta) / std::pow(disc, 3.5);
  return {I2, I4};
}

// Same energy by direct quadrature of the plane integral in polar
// coordinates, radial direction mapped by rho = tan(sigma).
inline double psi_bar_quadrature(double q, double r, double R, int sigma_panels = 64,
                                 int phi_nodes = 256) {
  if (!(r > 0)) throw ValidationError("psi_bar_quadrature needs r > 0");
  if (sigma_panels < 4 || phi_nodes < 8)
    throw ValidationError("psi_bar_quadrature: resolution too low");
  const double pi = 3.14159265358979323846;
  const auto& rule = detail::gl15();
  const double dphi = 2 * pi / phi_nodes;

  // integrand of Psi-bar: (nu - lam)^2 / (4 lam) * rho, with
  // lam = 4/(1+rho^2)^2 and nu = 4 R^2 r^2 / (rho^2 + |q rho e^{i phi} + r|^2)^2
  auto radial = [&](double sigma) {
    double rho = std::tan(sigma);
    double sec2 = 1 + rho * rho;  // d rho / d sigma
    double lam = 4.0 / (sec2 * sec2);
    double acc = 0;
    for (int j = 0; j < phi_nodes; ++j) {
      double phi = j * dphi;
      double D = rho * rho * (1 + q * q) + r * r + 2 * q * rho * r * std::cos(phi);
      double nu = 4.0 * R * R * r * r / (D * D);
      double diff = nu - lam;
      acc += diff * diff / (4 * lam);
    }
    return acc * dphi * rho * sec2;
  };

  double total = 0;
  for (int p = 0; p < sigma_panels; ++p) {
    double s0 = (pi / 2) * p / sigma_panels;
    double s1 = (pi / 2) * (p + 1) / sigma_panels;
    double half = (s1 - s0) / 2, mid = (s0 + s1) / 2, inc = 0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
      inc += rule.weights[k] * radial(mid + half * rule.nodes[k]);
    total += inc * half;
  }
  if (!std::isfinite(total)) throw QuadratureFailure("psi_bar_quadrature diverged");
  return total;
}

struct HessianReport {
  double grad_q = 0, grad_r = 0;
  double F_qq = 0, F_qr = 0, F_rr = 0;
  double det = 0;
  bool positive_definite = false;
};

// Gradient and Hessian of the closed-form energy in the (q, r) chart, with
// the Sylvester positive-definiteness flag.
inline HessianReport hessian_F(double q, double r, double R) {
  if (!(r > 0)) throw ValidationError("hessian_F needs r > 0");
  const double pi = 3.14159265358979323846;
  const double R4 = std::pow(R, 4);
  const double w = 1 + q * q;
  HessianReport rep;
  rep.grad_q = 4 * pi * R4 * q * (w + r * r) / (3 * r * r);
  rep.grad_r = 2 * pi * R4 * (std::pow(r, 4) - w * w) / (3 * r * r * r);
  rep.F_qq = 4 * pi * R4 * (1 + 3 * q * q + r * r) / (3 * r * r);
  rep.F_qr = -8 * pi * R4 * q * w / (3 * r * r * r);
  rep.F_rr = 2 * pi * R4 * (3 + 6 * q * q + 3 * std::pow(q, 4) + std::pow(r, 4)) /
             (3 * std::pow(r, 4));
  rep.det = rep.F_qq * rep.F_rr - rep.F_qr * rep.F_qr;
  rep.positive_definite = rep.F_qq > 0 && rep.det > 0;
  return rep;
}

// Conformal factor of the pull-back of the radius-R round metric through a
// Mobius map, in the stereographic chart.
inline double pullback_metric_mobius(const MobiusMap& m, double R, const Complex& z) {
  m.validate();
  double num = 4 * R * R * std::norm(m.b * m.c - m.a * m.d);
  double den = std::norm(m.a * z + m.b) + std::norm(m.c * z + m.d);
  if (den < 1e-280) throw PoleHit("pullback factor evaluated at a degenerate point");
  return num / (den * den);
}

namespace detail {

// Stereographic point and chart tangents on the unit sphere for a complex
// parameter given by a pair of homogeneous values (A, C), w = A/C. Uses the
// chart around whichever pole keeps |coordinate| <= 1, so nothing overflows
// when w runs off to infinity.
struct SpherePoint {
  Vec3 P;          // unit-sphere position
  Vec3 dP_dre, dP_dim;  // derivatives w.r.t. Re(w), Im(w) after branch choice
  bool swapped = false;  // true: derivatives are w.r.t. w~ = 1/w
};

inline SpherePoint stereographic_point(const Complex& A, const Complex& C) {
  SpherePoint out;
  double nA = std::abs(A), nC = std::abs(C);
  if (nA == 0 && nC == 0) throw DegenerateMap("homogeneous coordinates both vanish");
  if (nA <= nC) {
    Complex w = A / C;
    double x = w.real(), y = w.imag(), rho2 = std::norm(w), den = 1 + rho2;
    out.P = Vec3(2 * x / den, 2 * y / den, (rho2 - 1) / den);
    out.dP_dre = Vec3(2 * (1 + y * y - x * x), -4 * x * y, 4 * x) / (den * den);
    out.dP_dim = Vec3(-4 * x * y, 2 * (1 + x * x - y * y), 4 * y) / (den * den);
    out.swapped = false;
  } else {
    Complex wt = C / A;  // 1/w
    double x = wt.real(), y = wt.imag(), rho2 = std::norm(wt), den = 1 + rho2;
    out.P = Vec3(2 * x / den, -2 * y / den, (1 - rho2) / den);
    out.dP_dre = Vec3(2 * (1 + y * y - x * x), 4 * x * y, -4 * x) / (den * den);
    out.dP_dim = Vec3(-4 * x * y, -2 * (1 + x * x - y * y), -4 * y) / (den * den);
    out.swapped = true;
  }
  return out;
}

}  // namespace detail

// Differential samples of the Mobius map as a sphere-to-sphere map through
// stereographic charts: unit source sphere M (polar grid), target radius R.
// Ambient positions and tangents are computed branch-safely, so Mobius poles
// on the grid are harmless; image chart parameters hitting a coordinate pole
// of the target chart raise PoleHit.
inline MapDifferentialSamples mobius_sphere_samples(const MobiusMap& m,
                                                    const EmbeddedManifold& M, double R) {
  m.validate();
  if (M.dim != 2) throw ValidationError("mobius_sphere_samples needs a surface source");
  MapDifferentialSamples S;
  S.source_grid = M.grid;
  S.sdim = 2;
  S.tdim = 2;
  const int n = M.grid.nodes();
  S.image.resize(3 * n);
  S.image_param.resize(2 * n);
  S.d1.resize(static_cast<std::size_t>(n) * 2 * 3);
  const Complex det = m.det();
  for (int i0 = 0; i0 < M.grid.shape[0]; ++i0)
    for (int i1 = 0; i1 < M.grid.shape[1]; ++i1) {
      int k = M.grid.id(i0, i1);
      Param u = M.param(i0, i1);
      double th = u[0], ph = u[1];
      // source chart parameter z = cot(theta/2) e^{i phi}
      double cotv = std::cos(th / 2) / std::sin(th / 2);
      Complex eip(std::cos(ph), std::sin(ph));
      Complex z = cotv * eip;
      Complex dz_dth = -0.5 * (1 + std::norm(z)) * eip;
      Complex dz_dph = Complex(0, 1) * z;

      Complex A = m.a * z + m.b, C = m.c * z + m.d;
      auto pt = detail::stereographic_point(A, C);
      // dw/dz = det / C^2; d(1/w)/dz = -det / A^2
      Complex dw_dz = pt.swapped ? -det / (A * A) : det / (C * C);
      Complex dw_dth = dw_dz * dz_dth, dw_dph = dw_dz * dz_dph;
      Vec3 Tth = R * (pt.dP_dre * dw_dth.real() + pt.dP_dim * dw_dth.imag());
      Vec3 Tph = R * (pt.dP_dre * dw_dph.real() + pt.dP_dim * dw_dph.imag());
      Vec3 pos = R * pt.P;
      for (int c2 = 0; c2 < 3; ++c2) {
        S.image[3 * k + c2] = pos[c2];
        S.d1[(k * 2 + 0) * 3 + c2] = Tth[c2];
        S.d1[(k * 2 + 1) * 3 + c2] = Tph[c2];
      }
      double cz = pos[2] / R;
      if (1 - std::abs(cz) < 1e-12)
        throw PoleHit("image node hits a coordinate pole of the target chart");
      S.image_param[2 * k] = std::acos(std::min(1.0, std::max(-1.0, cz)));
      double phi_t = std::atan2(pos[1], pos[0]);
      if (phi_t < 0) phi_t += 2 * 3.14159265358979323846;
      S.image_param[2 * k + 1] = phi_t;
    }
  return S;
}

// Plane-normalized embedded evaluation of the deformation energy: the
// two-sphere metric distortion integral divided by its fiber/conformal
// normalization factor 8, directly comparable to psi_bar_closed.
inline double psi_bar_embedded(const MobiusMap& m, double R, int ntheta = 256, int nphi = 512) {
  EmbeddedManifold M = make_sphere(1.0, ntheta, nphi);
  MapDifferentialSamples S = mobius_sphere_samples(m, M, R);
  auto gM = first_fundamental_form(M);
  const int n = M.grid.nodes();
  std::vector<double> density(n);
  for (int k = 0; k < n; ++k) {
    // pulled-back metric from ambient tangents; no target chart involved
    std::array<double, 4> hg;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) hg[a * 2 + b] = S.d1_col(k, a).dot(S.d1_col(k, b));
    auto g = gM.at(k);
    std::array<double, 4> strain{hg[0] - g[0], hg[1] - g[1], hg[2] - g[2], hg[3] - g[3]};
    density[k] = fiber_norm_sq_node(strain, g, 2, 2);
  }
  return integrate(density, M) / 8.0;
}

}  // namespace morphforge
