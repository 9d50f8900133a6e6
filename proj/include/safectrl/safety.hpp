#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "safectrl/dynamics.hpp"
#include "safectrl/mlp.hpp"
#include "safectrl/qp.hpp"

namespace safectrl {

// Spherical obstacle moving on an analytic path. `Sinusoid3` follows
// c_i + a_i * sin(w_i t + ph_i) per axis; `Static` stays at `offset`.
struct Obstacle {
  enum class Type { Static, Sinusoid3 };
  Type type = Type::Static;
  Eigen::Vector3d amp = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d phase = Eigen::Vector3d::Zero();
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  double radius = 0.05;

  Eigen::Vector3d position(double t) const;
  Eigen::Vector3d velocity(double t) const;
  Eigen::Vector3d acceleration(double t) const;
};

enum class GammaMode { Literal, Radial };
enum class FilterType { Ecbf, Aecbf, Off };

struct SafetyConfig {
  double d_m = 0.07;        // safety margin added to the obstacle radius
  double k2 = 10.0;         // barrier velocity gain
  double r_ratio = 0.2;     // k1 / k2
  double clf_mu2 = 0.5;
  double clf_c6 = 10.0;
  double c4 = 1.0;
  Eigen::VectorXd input_bounds;      // per-axis |u_i| limit, N
  std::vector<int> constrained_frames;  // 1-based frame indices
  GammaMode penalty_gamma_mode = GammaMode::Literal;
  FilterType filter = FilterType::Ecbf;
  double trigger_margin = 0.08;      // filter engages at d_safe + margin
  double hysteresis = 0.005;         // extra clearance before disengaging
  // Distance padding (m) added to d_safe (and removed from the output
  // bounds) inside the constraint rows; absorbs discretization and
  // model-estimate bias before the true safety distance is reached.
  double constraint_margin = 0.04;
  double penalty_weight = 1.0;

  double k1() const { return r_ratio * k2; }
  double d_safe(double radius) const { return radius + d_m; }

  void validate(int dof, int task_dim) const;  // throws ConfigError
};

// h = ||x_j - p_oi||^2 - d_safe^2.
double barrier_h(const Eigen::VectorXd& x_j, const Eigen::VectorXd& p_oi,
                 double d_safe);

struct LieDerivatives {
  double h;
  double Lf_h;
  double Lf2_h;
};

// Lie derivatives of h along the relative motion, with the obstacle evaluated
// at time t. xdd_j is the full (drift + input) frame acceleration.
LieDerivatives barrier_lie_derivatives(const Eigen::Vector3d& x_j,
                                       const Eigen::Vector3d& xd_j,
                                       const Eigen::Vector3d& xdd_j,
                                       const Obstacle& obstacle, double t,
                                       double d_safe);

// Per-frame kinematic and dynamic data the constraint rows are built from:
// the frame's acceleration under the estimated dynamics is B*u + drift.
struct FrameState {
  int frame_index = 0;
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Eigen::Vector3d xd = Eigen::Vector3d::Zero();
  Eigen::MatrixXd B;        // 3 x task_dim
  Eigen::Vector3d drift = Eigen::Vector3d::Zero();
};

// Evaluates the constrained frames at (q, qd) with the estimated dynamics
// (the task-space uncertainty estimate D_hat substituted for the true one).
std::vector<FrameState> build_frame_states(const ManipulatorModel& model,
                                           const JointDynamics& jd,
                                           const Eigen::VectorXd& q,
                                           const Eigen::VectorXd& qd,
                                           const Eigen::VectorXd& D_hat,
                                           const std::vector<int>& frames);

struct ConstraintRows {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  std::vector<std::string> labels;

  void append(const Eigen::RowVectorXd& row, double bound, std::string label);
};

// One row per (frame, obstacle):
// -2 zeta' B_j u <= 2 zeta'(drift_j - pddot) + 2||v_rel||^2 + k1 h + k2 Lf_h.
ConstraintRows ecbf_constraint_rows(const std::vector<FrameState>& frames,
                                    const std::vector<Obstacle>& obstacles,
                                    double t, const SafetyConfig& config);

// Output-box rows with the same pole placement, one per axis, built from
// h_i = k_ci^2 - x_i^2 on the end-effector frame. These keep the filtered
// command consistent with the barrier bounds the tracking controller
// enforces.
ConstraintRows output_bound_rows(const FrameState& ee,
                                 const Eigen::VectorXd& k_c,
                                 const SafetyConfig& config);

// Linear-in-u stability row z2' u <= c6 - mu2 V4 + z2'(Cx a + gx + D_hat +
// Mx a_dot) + adaptation bookkeeping.
ConstraintRows clf_constraint_row(const Eigen::VectorXd& z2,
                                  const Eigen::VectorXd& alpha,
                                  const Eigen::VectorXd& alpha_dot,
                                  const TaskDynamics& td,
                                  const Eigen::VectorXd& D_hat,
                                  const Eigen::MatrixXd& W_hat,
                                  const Eigen::MatrixXd& W_star,
                                  const Eigen::VectorXd& rbf_basis_vec,
                                  double rho, double rbf_gain,
                                  const SafetyConfig& config);

struct FilterDecision {
  bool active = false;
  Eigen::VectorXd u_act;
  std::vector<int> active_constraints;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool clf_dropped = false;
  bool converged = true;
  double min_distance = 0.0;
};

// Inputs shared by both filters.
struct FilterContext {
  const std::vector<FrameState>& frames;
  const std::vector<Obstacle>& obstacles;
  double t;
  // CLF row ingredients
  Eigen::VectorXd z2, alpha, alpha_dot, D_hat;
  const TaskDynamics& td;
  Eigen::MatrixXd W_hat, W_star;
  Eigen::VectorXd rbf_basis_vec;
  double rho = 0.0;
  double rbf_gain = 1.0;
  Eigen::VectorXd k_c;  // output bounds; empty disables the box rows
};

// Minimum-deviation QP filter. `engaged_prev` feeds the trigger hysteresis.
FilterDecision ecbf_filter(const Eigen::VectorXd& F, const FilterContext& ctx,
                           const SafetyConfig& config, bool engaged_prev);

// Quadratic-penalty variant: adds sum_i || Phi_mlp(x_j | u, q, qd) - p_oi -
// d_safe*Gamma ||^2 to the objective and solves it by Gauss-Newton around the
// surrogate, subject to the same rows. Falls back to the best feasible
// iterate if the step norm has not dropped below 1e-6 within 10 iterations.
FilterDecision aecbf_filter(const Eigen::VectorXd& F, const FilterContext& ctx,
                            const MlpSurrogate& surrogate,
                            const ManipulatorModel& model,
                            const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                            const SafetyConfig& config, bool engaged_prev);

// tau = J' u.
Eigen::VectorXd torque_map(const Eigen::MatrixXd& J, const Eigen::VectorXd& u);

}  // namespace safectrl
