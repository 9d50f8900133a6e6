#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <vector>

#include "safectrl/model.hpp"

namespace safectrl {

// Base-frame poses of DH frames 0..m (frame 0 is the base, frame m carries the
// end-effector origin).
struct KinematicsCache {
  std::vector<Eigen::Isometry3d> frames;

  Eigen::Vector3d origin(int i) const { return frames[i].translation(); }
  Eigen::Vector3d axis_z(int i) const { return frames[i].linear().col(2); }
};

KinematicsCache compute_frames(const ManipulatorModel& model,
                               const Eigen::VectorXd& q);

// Positions of frame origins 0..m in the base frame (m+1 entries; the last one
// is the end-effector).
std::vector<Eigen::Vector3d> forward_kinematics(const ManipulatorModel& model,
                                                const Eigen::VectorXd& q);

// Analytic positional jacobian of frame `frame_index` (1-based, in [1, dof]).
// Rows are the first task_dim Cartesian axes.
Eigen::MatrixXd jacobian(const ManipulatorModel& model, const Eigen::VectorXd& q,
                         int frame_index);

// d/dt of the positional jacobian along qd.
Eigen::MatrixXd jacobian_dot(const ManipulatorModel& model,
                             const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                             int frame_index);

// Moore-Penrose pseudo-inverse via SVD. Requires full row rank (smallest
// singular value above `sigma_tol`), otherwise throws SingularJacobian.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& J, double sigma_tol = 1e-8);

// Damped least-squares position IK used for scenario authoring and tests.
// Returns a configuration with forward kinematics of the end-effector within
// `tol` of `target`, starting from q0; throws std::runtime_error on failure.
Eigen::VectorXd inverse_kinematics_position(const ManipulatorModel& model,
                                            const Eigen::VectorXd& q0,
                                            const Eigen::VectorXd& target,
                                            double tol = 1e-10,
                                            int max_iters = 500);

}  // namespace safectrl
