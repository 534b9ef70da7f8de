#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "errors.hpp"

namespace morphforge {

// Smooth step: S(s) = e(s)/(e(s)+e(1-s)) with e(s) = exp(-1/s) for s > 0 and
// e(s) = 0 otherwise. S == 0 for s <= 0, S == 1 for s >= 1, S(1/2) = 1/2.
inline double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double g = std::exp(-1.0 / s), h = std::exp(-1.0 / (1.0 - s));
  return g / (g + h);
}

// First two derivatives via S' = S(1-S)(s^-2 + (1-s)^-2).
inline double smooth_step_d1(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  double S = smooth_step(s);
  double u = 1.0 / (s * s), w = 1.0 / ((1.0 - s) * (1.0 - s));
  return S * (1.0 - S) * (u + w);
}

inline double smooth_step_d2(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  double S = smooth_step(s);
  double u = 1.0 / (s * s), w = 1.0 / ((1.0 - s) * (1.0 - s));
  double up = -2.0 / (s * s * s), wp = 2.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s));
  double Sp = S * (1.0 - S) * (u + w);
  return Sp * (1.0 - 2.0 * S) * (u + w) + S * (1.0 - S) * (up + wp);
}

// Radial bump: identically 1 on |x| <= r1, identically 0 on |x| >= r2,
// smooth in between. Gradient and Hessian are exact (radial chain rule).
struct BumpFunction {
  double r1, r2;

  BumpFunction(double plateau, double support) : r1(plateau), r2(support) {
    if (!(0 < r1 && r1 < r2))
      throw ValidationError("bump needs 0 < r1 < r2");
  }

  double sigma(double rho) const { return (r2 - rho) / (r2 - r1); }

  double value(const Eigen::Vector3d& x) const {
    return smooth_step(sigma(x.norm()));
  }

  Eigen::Vector3d gradient(const Eigen::Vector3d& x) const {
    double rho = x.norm();
    if (rho <= r1 || rho >= r2) return Eigen::Vector3d::Zero();
    return -smooth_step_d1(sigma(rho)) / (r2 - r1) / rho * x;
  }

  Eigen::Matrix3d hessian(const Eigen::Vector3d& x) const {
    double rho = x.norm();
    if (rho <= r1 || rho >= r2) return Eigen::Matrix3d::Zero();
    Eigen::Vector3d xh = x / rho;
    double c = 1.0 / (r2 - r1);
    double Sp = smooth_step_d1(sigma(rho)), Spp = smooth_step_d2(sigma(rho));
    Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - xh * xh.transpose();
    return Spp * c * c * (xh * xh.transpose()) - Sp * c / rho * P;
  }
};

}  // namespace morphforge
