#include "safectrl/controller.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "safectrl/errors.hpp"

namespace safectrl {

void ControllerGains::validate(int n) const {
  if (k_z.size() != n) throw ConfigError("k_z", "expected " + std::to_string(n) + " entries");
  if ((k_z.array() <= 0.0).any()) throw ConfigError("k_z", "entries must be > 0");
  if (K_b_track.rows() != n || K_b_track.cols() != n)
    throw ConfigError("K_b_track", "expected an " + std::to_string(n) + "x" +
                                       std::to_string(n) + " matrix");
  if (!(c1 > 0.0)) throw ConfigError("c1", "must be > 0");
  const Eigen::MatrixXd shifted =
      K_b_track - Eigen::MatrixXd::Identity(n, n) / (2.0 * c1 * c1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (shifted + shifted.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw ConfigError("K_b_track", "K_b_track - I/(2 c1^2) must be positive definite");
}

namespace {

// Re-raise axis-less barrier errors with the axis attached.
template <typename Fn>
auto with_axis(int axis, Fn&& fn) {
  try {
    return fn();
  } catch (const BarrierViolation& bv) {
    throw BarrierViolation(axis, bv.value, bv.bound);
  }
}

}  // namespace

Eigen::VectorXd virtual_control(const Eigen::VectorXd& z1,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& x_d,
                                const Eigen::VectorXd& xd_dot,
                                const BarrierBounds& bounds,
                                const ControllerGains& gains) {
  const int n = bounds.size();
  Eigen::VectorXd alpha(n);
  for (int i = 0; i < n; ++i) {
    const double k = bounds.k_c[i];
    const double ph = with_axis(i, [&] { return phi(z1[i], x_d[i], k); });
    alpha[i] = -gains.k_z[i] * z1[i] +
               (k * k - x[i] * x[i]) * xd_dot[i] * ph / (k * k);
  }
  return alpha;
}

Eigen::VectorXd alpha_dot_analytic(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& x_dot,
                                   const Eigen::VectorXd& x_d,
                                   const Eigen::VectorXd& xd_dot,
                                   const Eigen::VectorXd& xd_ddot,
                                   const BarrierBounds& bounds,
                                   const ControllerGains& gains) {
  const int n = bounds.size();
  Eigen::VectorXd ad(n);
  for (int i = 0; i < n; ++i) {
    const double k = bounds.k_c[i];
    const double k2 = k * k;
    const double z = x[i] - x_d[i];
    const double zdot = x_dot[i] - xd_dot[i];
    const PhiDerivs ph = with_axis(i, [&] { return phi_derivs(z, x_d[i], k); });
    const double phidot = ph.d_z * zdot + ph.d_xd * xd_dot[i];
    const double G = (k2 - x[i] * x[i]) * ph.value / k2;
    const double Gdot = (-2.0 * x[i] * x_dot[i] * ph.value +
                         (k2 - x[i] * x[i]) * phidot) /
                        k2;
    ad[i] = -gains.k_z[i] * zdot + xd_ddot[i] * G + xd_dot[i] * Gdot;
  }
  return ad;
}

AlphaDotTracker::Result AlphaDotTracker::update(const Eigen::VectorXd& alpha,
                                                double dt) {
  Result r;
  if (!prev_.has_value()) {
    r.value = Eigen::VectorXd::Zero(alpha.size());
    r.warmed_up = false;
  } else {
    r.value = (alpha - *prev_) / dt;
    r.warmed_up = true;
  }
  prev_ = alpha;
  return r;
}

Eigen::VectorXd nominal_force(const TaskDynamics& td,
                              const TrackingState& tracking,
                              const Eigen::VectorXd& D_hat,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& x_d,
                              const BarrierBounds& bounds,
                              const ControllerGains& gains) {
  (void)x_d;
  const int n = bounds.size();
  Eigen::VectorXd eta(n);
  for (int i = 0; i < n; ++i) {
    const double frac =
        with_axis(i, [&] { return barrier_fraction(x[i], bounds.k_c[i]); });
    eta[i] = gains.eta == EtaVariant::Cancelling
                 ? tracking.z1[i] * frac
                 : -gains.k_z[i] * tracking.z1[i] * frac;
  }
  return td.Cx * tracking.alpha + td.gx + td.Mx * tracking.alpha_dot + D_hat -
         gains.K_b_track * tracking.z2 - eta;
}

LyapunovValues lyapunov_values(const TrackingState& tracking,
                               const TaskDynamics& td,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& x_d,
                               const BarrierBounds& bounds,
                               const Eigen::MatrixXd& W_hat,
                               const Eigen::MatrixXd& W_star) {
  (void)x;
  LyapunovValues v{};
  const int n = bounds.size();
  v.V1 = 0.0;
  for (int i = 0; i < n; ++i)
    v.V1 += with_axis(i, [&] {
      return v1_component(tracking.z1[i], x_d[i], bounds.k_c[i]);
    });
  const double quad = 0.5 * tracking.z2.dot(td.Mx * tracking.z2);
  v.V2 = v.V1 + quad;
  double werr = 0.0;
  if (W_star.size() > 0 && W_hat.size() == W_star.size())
    werr = 0.5 * (W_star - W_hat).squaredNorm();
  v.V3 = v.V2 + werr;
  v.V4 = quad + werr;
  return v;
}

}  // namespace safectrl
