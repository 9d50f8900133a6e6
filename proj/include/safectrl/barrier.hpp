#pragma once

#include <Eigen/Core>

namespace safectrl {

// 1 if the tracking error is above the desired value, 0 otherwise.
inline int side_selector(double z1i) { return z1i > 0.0 ? 1 : 0; }

// Constant state bounds k_c plus the moving error-space walls they induce
// around the desired trajectory. The control law itself evaluates every
// barrier fraction at k_c (the state constraint |x_i| < k_ci); k_a/k_b/k_d
// describe how much error room remains on each side and are logged and
// validated (both must stay strictly positive, which is the bounded-trajectory
// assumption checked at scenario load).
struct BarrierBounds {
  Eigen::VectorXd k_c;

  int size() const { return static_cast<int>(k_c.size()); }
  Eigen::VectorXd k_a(const Eigen::VectorXd& x_d) const { return k_c + x_d; }
  Eigen::VectorXd k_b(const Eigen::VectorXd& x_d) const { return k_c - x_d; }
  double k_d(int i, double z1i, double x_di) const {
    return side_selector(z1i) == 1 ? k_c[i] - x_di : k_c[i] + x_di;
  }

  // Throws BarrierViolation naming the axis if some wall margin is <= 0.
  void check_desired_inside(const Eigen::VectorXd& x_d) const;
  // Throws BarrierViolation naming the axis if some |x_i| >= k_ci.
  void check_state_inside(const Eigen::VectorXd& x) const;
};

// k^2 / (k^2 - x1^2), guarded: raises BarrierViolation instead of returning
// Inf/NaN when x1 is outside or within 1e-9*k^2 of the wall.
double barrier_fraction(double x1, double k);

// Integral-mean barrier weight Phi = (1/z) * integral over [x_d, x_d+z] of
// k^2/(k^2-u^2) du, evaluated in closed form via log1p so the z -> 0 limit
// k^2/(k^2-x_d^2) is approached smoothly. |z| < 1e-9 returns the limit branch.
double phi(double z1, double x_d, double k);

double phi_limit(double x_d, double k);

// Phi together with its partial derivatives (needed by the analytic
// differentiation of the virtual control).
struct PhiDerivs {
  double value;
  double d_z;
  double d_xd;
};
PhiDerivs phi_derivs(double z1, double x_d, double k);

// One axis of the barrier Lyapunov integrand: integral over [0, z1] of
// sigma * k^2 / (k^2 - (sigma + x_d)^2) dsigma, by adaptive Gauss-Legendre
// quadrature to the given absolute tolerance.
double v1_component(double z1, double x_d, double k, double abs_tol = 1e-10);

}  // namespace safectrl
