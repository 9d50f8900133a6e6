#pragma once

#include <Eigen/Core>
#include <optional>

#include "safectrl/barrier.hpp"
#include "safectrl/dynamics.hpp"
#include "safectrl/rbf.hpp"

namespace safectrl {

// Which eta the force law subtracts. `Cancelling` uses +z1*k^2/(k^2-x1^2),
// which cancels the z1-z2 cross term of the barrier derivative and is the
// variant that passes the numerical decay certificate; `Literal` uses
// -k_z*z1*k^2/(k^2-x1^2) as printed.
enum class EtaVariant { Cancelling, Literal };

struct ControllerGains {
  Eigen::VectorXd k_z;
  Eigen::MatrixXd K_b_track;
  double c1 = 1.0;
  EtaVariant eta = EtaVariant::Cancelling;

  // k_z > 0, K_b_track - I/(2 c1^2) positive definite; throws ConfigError.
  void validate(int n) const;
};

struct TrackingState {
  Eigen::VectorXd z1;
  Eigen::VectorXd z2;
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_dot;
  Eigen::VectorXi p;  // side selector per axis
};

// alpha_i = -k_zi z1_i + (k_ci^2 - x1_i^2) xd_dot_i Phi_i / k_ci^2.
Eigen::VectorXd virtual_control(const Eigen::VectorXd& z1,
                                const Eigen::VectorXd& x,
                                const Eigen::VectorXd& x_d,
                                const Eigen::VectorXd& xd_dot,
                                const BarrierBounds& bounds,
                                const ControllerGains& gains);

// Analytic chain-rule d/dt of the virtual control; needs the desired
// trajectory's first two derivatives and the measured velocity.
Eigen::VectorXd alpha_dot_analytic(const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& x_dot,
                                   const Eigen::VectorXd& x_d,
                                   const Eigen::VectorXd& xd_dot,
                                   const Eigen::VectorXd& xd_ddot,
                                   const BarrierBounds& bounds,
                                   const ControllerGains& gains);

// Backward-difference fallback. The first call after reset() reports a
// warm-up: it returns a zero vector with warmed_up == false.
class AlphaDotTracker {
 public:
  struct Result {
    Eigen::VectorXd value;
    bool warmed_up;
  };
  Result update(const Eigen::VectorXd& alpha, double dt);
  void reset() { prev_.reset(); }

 private:
  std::optional<Eigen::VectorXd> prev_;
};

// F = Cx*alpha + gx + Mx*alpha_dot + D_hat - K_b_track*z2 - eta.
Eigen::VectorXd nominal_force(const TaskDynamics& td,
                              const TrackingState& tracking,
                              const Eigen::VectorXd& D_hat,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& x_d,
                              const BarrierBounds& bounds,
                              const ControllerGains& gains);

struct LyapunovValues {
  double V1;
  double V2;
  double V3;
  double V4;
};

// V1 by quadrature of the barrier integrand, V2 = V1 + z2' Mx z2 / 2,
// V3 = V2 + ||W* - W_hat||_F^2 / 2, V4 = z2' Mx z2 / 2 + ||W* - W_hat||_F^2/2.
// W_star may be empty (size 0), in which case the weight-error terms are 0.
LyapunovValues lyapunov_values(const TrackingState& tracking,
                               const TaskDynamics& td,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& x_d,
                               const BarrierBounds& bounds,
                               const Eigen::MatrixXd& W_hat,
                               const Eigen::MatrixXd& W_star);

}  // namespace safectrl
