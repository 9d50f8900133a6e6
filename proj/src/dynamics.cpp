#include "safectrl/dynamics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"
#include "safectrl/rng.hpp"

namespace safectrl {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s <<    0, -v.z(),  v.y(),
       v.z(),     0, -v.x(),
      -v.y(),  v.x(),     0;
  return s;
}

struct LinkData {
  std::vector<Eigen::Vector3d> z;      // joint axes, frames 0..m-1
  std::vector<Eigen::Vector3d> p;      // frame origins 0..m
  std::vector<Eigen::Vector3d> pc;     // link COM positions, 1..m (0-based m entries)
  std::vector<Eigen::Matrix3d> W;      // R I R' per link
  std::vector<Eigen::MatrixXd> Jv;     // COM positional jacobians, 3 x m
  std::vector<Eigen::MatrixXd> Jw;     // angular jacobians, 3 x m
};

LinkData build_link_data(const ManipulatorModel& model, const Eigen::VectorXd& q) {
  const KinematicsCache cache = compute_frames(model, q);
  const int m = model.dof;
  LinkData d;
  d.z.resize(m);
  d.p.resize(m + 1);
  d.pc.resize(m);
  d.W.resize(m);
  d.Jv.assign(m, Eigen::MatrixXd::Zero(3, m));
  d.Jw.assign(m, Eigen::MatrixXd::Zero(3, m));
  for (int i = 0; i < m; ++i) d.z[i] = cache.axis_z(i);
  for (int i = 0; i <= m; ++i) d.p[i] = cache.origin(i);
  for (int i = 1; i <= m; ++i) {
    const Eigen::Matrix3d R = cache.frames[i].linear();
    d.pc[i - 1] = cache.frames[i] * model.links[i - 1].com;
    d.W[i - 1] = R * model.links[i - 1].inertia * R.transpose();
    for (int c = 1; c <= i; ++c) {
      d.Jv[i - 1].col(c - 1) = d.z[c - 1].cross(d.pc[i - 1] - d.p[c - 1]);
      d.Jw[i - 1].col(c - 1) = d.z[c - 1];
    }
  }
  return d;
}

}  // namespace

Eigen::MatrixXd JointDynamics::M_dot(const Eigen::VectorXd& qd) const {
  const int m = static_cast<int>(dM_dq.size());
  Eigen::MatrixXd Md = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) Md += dM_dq[k] * qd[k];
  return Md;
}

JointDynamics joint_space_dynamics(const ManipulatorModel& model,
                                   const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& qd) {
  if (q.size() != model.dof || qd.size() != model.dof)
    throw ContractViolation("joint state dimension mismatch");
  const int m = model.dof;
  const LinkData d = build_link_data(model, q);

  JointDynamics out;
  out.M = Eigen::MatrixXd::Zero(m, m);
  out.g = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    const double mass = model.links[i].mass;
    out.M += mass * d.Jv[i].transpose() * d.Jv[i] +
             d.Jw[i].transpose() * d.W[i] * d.Jw[i];
    out.g -= mass * d.Jv[i].transpose() * model.gravity;
  }
  out.M = 0.5 * (out.M + out.M.transpose().eval());

  // Analytic partials dM/dq_k from the chain-rule derivatives of the frame
  // axes, origins, COM positions and rotated inertia tensors.
  out.dM_dq.assign(m, Eigen::MatrixXd::Zero(m, m));
  for (int k = 1; k <= m; ++k) {
    const Eigen::Vector3d& zk = d.z[k - 1];
    const Eigen::Matrix3d Sk = skew(zk);
    Eigen::MatrixXd dMk = Eigen::MatrixXd::Zero(m, m);
    for (int i = k; i <= m; ++i) {
      const double mass = model.links[i - 1].mass;
      const Eigen::Vector3d dpc = zk.cross(d.pc[i - 1] - d.p[k - 1]);
      const Eigen::Matrix3d dW = Sk * d.W[i - 1] - d.W[i - 1] * Sk;
      Eigen::MatrixXd dJv = Eigen::MatrixXd::Zero(3, m);
      Eigen::MatrixXd dJw = Eigen::MatrixXd::Zero(3, m);
      for (int c = 1; c <= i; ++c) {
        Eigen::Vector3d dz = Eigen::Vector3d::Zero();
        Eigen::Vector3d dp = Eigen::Vector3d::Zero();
        if (k <= c - 1) {
          dz = zk.cross(d.z[c - 1]);
          dp = zk.cross(d.p[c - 1] - d.p[k - 1]);
        }
        dJv.col(c - 1) =
            dz.cross(d.pc[i - 1] - d.p[c - 1]) + d.z[c - 1].cross(dpc - dp);
        dJw.col(c - 1) = dz;
      }
      dMk += mass * (dJv.transpose() * d.Jv[i - 1] +
                     d.Jv[i - 1].transpose() * dJv);
      dMk += dJw.transpose() * d.W[i - 1] * d.Jw[i - 1];
      dMk += d.Jw[i - 1].transpose() * dW * d.Jw[i - 1];
      dMk += d.Jw[i - 1].transpose() * d.W[i - 1] * dJw;
    }
    out.dM_dq[k - 1] = 0.5 * (dMk + dMk.transpose().eval());
  }

  // Christoffel symbols of the first kind; this makes Mdot - 2C
  // skew-symmetric identically.
  out.C = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double cij = 0.0;
      for (int k = 0; k < m; ++k)
        cij += 0.5 *
               (out.dM_dq[k](i, j) + out.dM_dq[j](i, k) - out.dM_dq[i](j, k)) *
               qd[k];
      out.C(i, j) = cij;
    }
  return out;
}

TaskDynamics task_space_dynamics(const ManipulatorModel& model,
                                 const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qd) {
  const JointDynamics jd = joint_space_dynamics(model, q, qd);
  const int n = model.task_dim;

  TaskDynamics td;
  td.J = jacobian(model, q, model.dof);
  td.J_pinv = pseudo_inverse(td.J);  // throws SingularJacobian when degenerate
  td.Jdot = jacobian_dot(model, q, qd, model.dof);

  const Eigen::LDLT<Eigen::MatrixXd> Mldlt(jd.M);
  const Eigen::MatrixXd MinvJt = Mldlt.solve(td.J.transpose());
  const Eigen::MatrixXd A = td.J * MinvJt;  // J M^-1 J'
  Eigen::MatrixXd lambda = A.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  lambda = 0.5 * (lambda + lambda.transpose().eval());

  td.Jbar = MinvJt * lambda;
  td.Mx = lambda;
  td.gx = td.Jbar.transpose() * jd.g;
  td.Cx = td.Jbar.transpose() * jd.C * td.Jbar - lambda * td.Jdot * td.Jbar;
  return td;
}

Eigen::MatrixXd task_mass_matrix_dot(const ManipulatorModel& model,
                                     const Eigen::VectorXd& q,
                                     const Eigen::VectorXd& qd) {
  const JointDynamics jd = joint_space_dynamics(model, q, qd);
  const Eigen::MatrixXd J = jacobian(model, q, model.dof);
  const Eigen::MatrixXd Jd = jacobian_dot(model, q, qd, model.dof);
  const int n = model.task_dim;

  const Eigen::LDLT<Eigen::MatrixXd> Mldlt(jd.M);
  const Eigen::MatrixXd MinvJt = Mldlt.solve(J.transpose());
  const Eigen::MatrixXd A = J * MinvJt;
  Eigen::MatrixXd lambda = A.ldlt().solve(Eigen::MatrixXd::Identity(n, n));
  lambda = 0.5 * (lambda + lambda.transpose().eval());

  const Eigen::MatrixXd Mdot = jd.M_dot(qd);
  const Eigen::MatrixXd Adot = Jd * MinvJt + MinvJt.transpose() * Jd.transpose() -
                               MinvJt.transpose() * Mdot * MinvJt;
  Eigen::MatrixXd ld = -lambda * Adot * lambda;
  return 0.5 * (ld + ld.transpose().eval());
}

UncertaintyGroundTruth UncertaintyGroundTruth::make(int dof, double viscous_coeff,
                                                    double coulomb_coeff,
                                                    double amplitude,
                                                    double frequency,
                                                    std::uint64_t seed) {
  UncertaintyGroundTruth gt;
  gt.viscous = Eigen::VectorXd::Constant(dof, viscous_coeff);
  gt.coulomb = Eigen::VectorXd::Constant(dof, coulomb_coeff);
  gt.amplitude = amplitude;
  gt.frequency = frequency;
  if (seed != 0) {
    Rng rng = Rng(seed).fork(0x66726963ULL);  // friction stream
    for (int i = 0; i < dof; ++i) gt.viscous[i] *= rng.uniform(0.7, 1.3);
    for (int i = 0; i < dof; ++i) gt.coulomb[i] *= rng.uniform(0.7, 1.3);
    gt.amplitude *= rng.uniform(0.7, 1.3);
    for (int i = 0; i < 3; ++i) gt.phases[i] += rng.uniform(0.0, 6.283185307179586);
  }
  return gt;
}

Eigen::VectorXd UncertaintyGroundTruth::disturbance(double t, int task_dim) const {
  Eigen::VectorXd d(task_dim);
  const double w = 2.0 * 3.141592653589793 * frequency;
  for (int i = 0; i < task_dim; ++i)
    d[i] = amplitude * std::sin(w * t + phases[i]);
  return d;
}

Eigen::VectorXd UncertaintyGroundTruth::joint_uncertainty(
    const ManipulatorModel& model, const Eigen::VectorXd& q,
    const Eigen::VectorXd& qd, double t) const {
  Eigen::VectorXd friction =
      viscous.cwiseProduct(qd) + coulomb.cwiseProduct(coulomb_sign(qd));
  const Eigen::MatrixXd J = jacobian(model, q, model.dof);
  return friction + J.transpose() * disturbance(t, model.task_dim);
}

Eigen::VectorXd true_uncertainty(const ManipulatorModel& model,
                                 const UncertaintyGroundTruth& gt,
                                 const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qd, double t) {
  const TaskDynamics td = task_space_dynamics(model, q, qd);
  const Eigen::VectorXd friction =
      gt.viscous.cwiseProduct(qd) +
      gt.coulomb.cwiseProduct(UncertaintyGroundTruth::coulomb_sign(qd));
  return td.Jbar.transpose() * friction + gt.disturbance(t, model.task_dim);
}

}  // namespace safectrl
