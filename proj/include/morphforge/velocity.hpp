#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "bump.hpp"
#include "errors.hpp"
#include "expr.hpp"
#include "manifold.hpp"

namespace morphforge {

// Time-dependent ambient vector field with spatial derivatives up to second
// order. Analytic derivative callables are used when present; otherwise
// central differences at fd_step supply them (O(h^2) consistent).
// The field lives on a ball domain; radius <= 0 means unrestricted.
struct VelocityField {
  std::function<Vec3(const Vec3&, double)> v;
  std::function<Eigen::Matrix3d(const Vec3&, double)> jacobian;
  // second[c](i,j) = d_i d_j v_c
  std::function<std::array<Eigen::Matrix3d, 3>(const Vec3&, double)> second;

  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  double fd_step = 0.0;

  bool analytic_first() const { return static_cast<bool>(jacobian); }
  bool analytic_second() const { return static_cast<bool>(second); }

  double step(const Vec3& x) const {
    if (fd_step > 0) return fd_step;
    if (radius > 0) return 1e-4 * (2.0 * radius);
    return 1e-4 * std::max(1.0, x.norm());
  }

  bool inside(const Vec3& x) const { return radius <= 0 || (x - center).norm() <= radius; }

  Vec3 eval(const Vec3& x, double t) const { return v(x, t); }

  Eigen::Matrix3d eval_jacobian(const Vec3& x, double t) const {
    if (jacobian) return jacobian(x, t);
    const double h = step(x);
    Eigen::Matrix3d J;
    for (int j = 0; j < 3; ++j) {
      Vec3 dx = Vec3::Zero();
      dx[j] = h;
      J.col(j) = (v(x + dx, t) - v(x - dx, t)) / (2 * h);
    }
    return J;
  }

  // Contraction of the second spatial derivative with two directions:
  // result_c = a^T H_c b.
  Vec3 eval_second(const Vec3& x, double t, const Vec3& a, const Vec3& b) const {
    if (second) {
      auto H = second(x, t);
      Vec3 out;
      for (int c = 0; c < 3; ++c) out[c] = a.dot(H[c] * b);
      return out;
    }
    const double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return Vec3::Zero();
    const double h = step(x);
    Vec3 ua = a / na, ub = b / nb;
    Vec3 d = (v(x + h * ua + h * ub, t) - v(x + h * ua - h * ub, t) -
              v(x - h * ua + h * ub, t) + v(x - h * ua - h * ub, t)) /
             (4 * h * h);
    return na * nb * d;
  }
};

// v(x,t) = (R-1)/(1+(R-1)t) x; its time-one flow is p -> Rp.
inline VelocityField make_radial_ramp_field(double R, double domain_radius = 0.0) {
  VelocityField f;
  f.v = [R](const Vec3& x, double t) { return ((R - 1) / (1 + (R - 1) * t)) * x; };
  f.jacobian = [R](const Vec3&, double t) {
    return Eigen::Matrix3d(((R - 1) / (1 + (R - 1) * t)) * Eigen::Matrix3d::Identity());
  };
  f.second = [](const Vec3&, double) {
    return std::array<Eigen::Matrix3d, 3>{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(),
                                          Eigen::Matrix3d::Zero()};
  };
  f.radius = domain_radius;
  return f;
}

// v(x,t) = a(t) x; flows to p -> exp(int a) p along rays.
inline VelocityField make_scaled_radial_field(std::function<double(double)> a,
                                              double domain_radius = 0.0) {
  VelocityField f;
  f.v = [a](const Vec3& x, double t) { return a(t) * x; };
  f.jacobian = [a](const Vec3&, double t) {
    return Eigen::Matrix3d(a(t) * Eigen::Matrix3d::Identity());
  };
  f.second = [](const Vec3&, double) {
    return std::array<Eigen::Matrix3d, 3>{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(),
                                          Eigen::Matrix3d::Zero()};
  };
  f.radius = domain_radius;
  return f;
}

inline VelocityField make_constant_field(const Vec3& c, double domain_radius = 0.0) {
  VelocityField f;
  f.v = [c](const Vec3&, double) { return c; };
  f.jacobian = [](const Vec3&, double) { return Eigen::Matrix3d(Eigen::Matrix3d::Zero()); };
  f.second = [](const Vec3&, double) {
    return std::array<Eigen::Matrix3d, 3>{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(),
                                          Eigen::Matrix3d::Zero()};
  };
  f.radius = domain_radius;
  return f;
}

inline VelocityField make_linear_field(const Eigen::Matrix3d& A, const Vec3& b,
                                       double domain_radius = 0.0) {
  VelocityField f;
  f.v = [A, b](const Vec3& x, double) { return Vec3(A * x + b); };
  f.jacobian = [A](const Vec3&, double) { return A; };
  f.second = [](const Vec3&, double) {
    return std::array<Eigen::Matrix3d, 3>{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(),
                                          Eigen::Matrix3d::Zero()};
  };
  f.radius = domain_radius;
  return f;
}

// Component expressions in x, y, z, t; derivatives by finite differences.
inline VelocityField make_expression_field(const std::array<std::string, 3>& components,
                                           double domain_radius = 0.0, double fd_step = 0.0) {
  std::array<std::function<double(double, double, double, double)>, 3> fns;
  for (int c = 0; c < 3; ++c)
    fns[c] = components[c].empty() ? expr::compile("0") : expr::compile(components[c]);
  VelocityField f;
  f.v = [fns](const Vec3& x, double t) {
    return Vec3(fns[0](x[0], x[1], x[2], t), fns[1](x[0], x[1], x[2], t),
                fns[2](x[0], x[1], x[2], t));
  };
  f.radius = domain_radius;
  f.fd_step = fd_step;
  return f;
}

// w(x,t) = rho(x) v(x,t), derivatives by the product rule when the inner
// field has analytic ones. The domain becomes the support ball of rho.
inline VelocityField apply_bump(const VelocityField& inner, const BumpFunction& bump) {
  VelocityField f;
  auto iv = inner.v;
  f.v = [iv, bump](const Vec3& x, double t) { return Vec3(bump.value(x) * iv(x, t)); };
  if (inner.analytic_first()) {
    auto ij = inner.jacobian;
    f.jacobian = [iv, ij, bump](const Vec3& x, double t) {
      double rho = bump.value(x);
      Vec3 grad = bump.gradient(x);
      return Eigen::Matrix3d(rho * ij(x, t) + iv(x, t) * grad.transpose());
    };
  }
  if (inner.analytic_first() && inner.analytic_second()) {
    auto ij = inner.jacobian;
    auto is = inner.second;
    f.second = [iv, ij, is, bump](const Vec3& x, double t) {
      double rho = bump.value(x);
      Vec3 grad = bump.gradient(x);
      Eigen::Matrix3d hess = bump.hessian(x);
      Eigen::Matrix3d J = ij(x, t);
      Vec3 val = iv(x, t);
      auto H = is(x, t);
      std::array<Eigen::Matrix3d, 3> out;
      for (int c = 0; c < 3; ++c) {
        out[c] = rho * H[c] + val[c] * hess + J.row(c).transpose() * grad.transpose() +
                 grad * J.row(c);
      }
      return out;
    };
  }
  f.center = Vec3::Zero();
  f.radius = bump.r2;
  f.fd_step = inner.fd_step;
  return f;
}

}  // namespace morphforge
