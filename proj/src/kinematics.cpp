#include "safectrl/kinematics.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "safectrl/errors.hpp"

namespace safectrl {

KinematicsCache compute_frames(const ManipulatorModel& model,
                               const Eigen::VectorXd& q) {
  if (q.size() != model.dof)
    throw ContractViolation("q has wrong length for this model");
  KinematicsCache cache;
  cache.frames.resize(model.dof + 1);
  cache.frames[0] = Eigen::Isometry3d::Identity();
  for (int i = 0; i < model.dof; ++i) {
    const DhRow& row = model.dh[i];
    const double th = q[i] + row.theta_offset;
    const double ct = std::cos(th), st = std::sin(th);
    const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    Eigen::Matrix4d T;
    T << ct, -st * ca,  st * sa, row.a * ct,
         st,  ct * ca, -ct * sa, row.a * st,
          0,       sa,       ca,      row.d,
          0,        0,        0,          1;
    cache.frames[i + 1] = cache.frames[i] * Eigen::Isometry3d(T);
  }
  return cache;
}

std::vector<Eigen::Vector3d> forward_kinematics(const ManipulatorModel& model,
                                                const Eigen::VectorXd& q) {
  const KinematicsCache cache = compute_frames(model, q);
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(model.dof + 1);
  for (int i = 0; i <= model.dof; ++i) positions.push_back(cache.origin(i));
  return positions;
}

namespace {

Eigen::MatrixXd jacobian3(const ManipulatorModel& model,
                          const KinematicsCache& cache, int frame_index) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, model.dof);
  const Eigen::Vector3d p = cache.origin(frame_index);
  for (int c = 1; c <= frame_index; ++c) {
    const Eigen::Vector3d z = cache.axis_z(c - 1);
    J.col(c - 1) = z.cross(p - cache.origin(c - 1));
  }
  return J;
}

void check_frame_index(const ManipulatorModel& model, int frame_index) {
  if (frame_index < 1 || frame_index > model.dof)
    throw ContractViolation("frame_index must be in [1, dof]");
}

}  // namespace

Eigen::MatrixXd jacobian(const ManipulatorModel& model, const Eigen::VectorXd& q,
                         int frame_index) {
  check_frame_index(model, frame_index);
  const KinematicsCache cache = compute_frames(model, q);
  return jacobian3(model, cache, frame_index).topRows(model.task_dim);
}

Eigen::MatrixXd jacobian_dot(const ManipulatorModel& model,
                             const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                             int frame_index) {
  check_frame_index(model, frame_index);
  if (qd.size() != model.dof) throw ContractViolation("qd has wrong length");
  const KinematicsCache cache = compute_frames(model, q);

  // Angular velocity of frame j and linear velocity of its origin.
  std::vector<Eigen::Vector3d> omega(model.dof + 1, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> pdot(model.dof + 1, Eigen::Vector3d::Zero());
  for (int j = 1; j <= model.dof; ++j) {
    const Eigen::Vector3d z = cache.axis_z(j - 1);
    omega[j] = omega[j - 1] + qd[j - 1] * z;
    const Eigen::MatrixXd Jv = jacobian3(model, cache, j);
    pdot[j] = Jv * qd;
  }

  Eigen::MatrixXd Jdot = Eigen::MatrixXd::Zero(3, model.dof);
  const Eigen::Vector3d p = cache.origin(frame_index);
  const Eigen::Vector3d pd = pdot[frame_index];
  for (int c = 1; c <= frame_index; ++c) {
    const Eigen::Vector3d z = cache.axis_z(c - 1);
    const Eigen::Vector3d zdot = omega[c - 1].cross(z);
    Jdot.col(c - 1) =
        zdot.cross(p - cache.origin(c - 1)) + z.cross(pd - pdot[c - 1]);
  }
  return Jdot.topRows(model.task_dim);
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& J, double sigma_tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double sigma_min = sv.size() > 0 ? sv[sv.size() - 1] : 0.0;
  if (sigma_min <= sigma_tol) throw SingularJacobian(sigma_min);
  Eigen::VectorXd inv = sv.cwiseInverse();
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Eigen::VectorXd inverse_kinematics_position(const ManipulatorModel& model,
                                            const Eigen::VectorXd& q0,
                                            const Eigen::VectorXd& target,
                                            double tol, int max_iters) {
  if (target.size() != model.task_dim)
    throw ContractViolation("IK target has wrong dimension");
  Eigen::VectorXd q = q0;
  const double damping = 1e-6;
  for (int it = 0; it < max_iters; ++it) {
    const auto pos = forward_kinematics(model, q);
    const Eigen::VectorXd x = pos[model.dof].head(model.task_dim);
    const Eigen::VectorXd err = target - x;
    if (err.norm() < tol) return q;
    const Eigen::MatrixXd J = jacobian(model, q, model.dof);
    const Eigen::MatrixXd JJt =
        J * J.transpose() + damping * Eigen::MatrixXd::Identity(model.task_dim,
                                                                model.task_dim);
    Eigen::VectorXd step = J.transpose() * JJt.ldlt().solve(err);
    if (step.norm() > 0.5) step *= 0.5 / step.norm();
    q += step;
  }
  throw std::runtime_error("inverse kinematics did not converge");
}

}  // namespace safectrl
