#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "safectrl/model.hpp"

namespace safectrl {

// Joint-space rigid-body terms. C is assembled from Christoffel symbols of
// the first kind so that Mdot - 2C is skew-symmetric by construction; dM_dq
// holds the analytic partials the Christoffel symbols are built from.
struct JointDynamics {
  Eigen::MatrixXd M;
  Eigen::MatrixXd C;
  Eigen::VectorXd g;
  std::vector<Eigen::MatrixXd> dM_dq;

  Eigen::MatrixXd M_dot(const Eigen::VectorXd& qd) const;
};

JointDynamics joint_space_dynamics(const ManipulatorModel& model,
                                   const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& qd);

// Task-space dynamics of the end-effector. Mx, Cx, gx are formed with the
// inertia-weighted generalized inverse Jbar = M^-1 J^T (J M^-1 J^T)^-1, which
// keeps Mx symmetric positive definite and 2Cx - Mx_dot skew-symmetric for
// redundant arms as well; Jbar coincides with the Moore-Penrose inverse when
// J is square. J_pinv carries the Moore-Penrose inverse.
struct TaskDynamics {
  Eigen::MatrixXd Mx;
  Eigen::MatrixXd Cx;
  Eigen::VectorXd gx;
  Eigen::MatrixXd J;
  Eigen::MatrixXd J_pinv;
  Eigen::MatrixXd Jdot;
  Eigen::MatrixXd Jbar;
};

TaskDynamics task_space_dynamics(const ManipulatorModel& model,
                                 const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qd);

// Analytic d/dt of Mx along (q, qd); used by the skew-symmetry checks.
Eigen::MatrixXd task_mass_matrix_dot(const ManipulatorModel& model,
                                     const Eigen::VectorXd& q,
                                     const Eigen::VectorXd& qd);

// Simulated stand-in for the unmodeled joint terms: viscous plus Coulomb
// friction and a low-frequency sinusoidal task-space disturbance.
struct UncertaintyGroundTruth {
  Eigen::VectorXd viscous;   // N*m*s/rad, per joint
  Eigen::VectorXd coulomb;   // N*m, per joint
  double amplitude = 0.0;    // N
  double frequency = 0.0;    // Hz
  Eigen::Vector3d phases{0.0, 2.0943951023931953, 4.1887902047863905};

  // Base coefficients jittered multiplicatively (+-30%) by the seed' stream;
  // seed 0 reproduces the base values exactly.
  static UncertaintyGroundTruth make(int dof, double viscous_coeff,
                                     double coulomb_coeff, double amplitude,
                                     double frequency, std::uint64_t seed);

  // Sinusoidal task-space disturbance at time t (sized task_dim).
  Eigen::VectorXd disturbance(double t, int task_dim) const;

  // sign(qd) regularized to tanh(qd / 5e-3) so the stiction discontinuity
  // stays integrable; saturates to exactly +-1 above ~0.1 rad/s.
  static Eigen::VectorXd coulomb_sign(const Eigen::VectorXd& qd) {
    return qd.unaryExpr([](double v) { return std::tanh(v / 5e-3); });
  }

  // Joint-space uncertainty entering the equations of motion:
  // viscous*qd + coulomb*sign(qd) + J^T * disturbance(t).
  Eigen::VectorXd joint_uncertainty(const ManipulatorModel& model,
                                    const Eigen::VectorXd& q,
                                    const Eigen::VectorXd& qd, double t) const;
};

// Task-space image of the uncertainty, D_x = Jbar^T (viscous*qd +
// coulomb*sign(qd)) + disturbance(t). This is what the estimator learns.
Eigen::VectorXd true_uncertainty(const ManipulatorModel& model,
                                 const UncertaintyGroundTruth& gt,
                                 const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qd, double t);

}  // namespace safectrl
