#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace safectrl {

// Classic Denavit-Hartenberg row; all joints are revolute about z of the
// preceding frame. Lengths in m, angles in rad.
struct DhRow {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct LinkInertia {
  double mass = 0.0;           // kg
  Eigen::Vector3d com;         // m, in the link frame
  Eigen::Matrix3d inertia;     // kg*m^2, about the COM, in the link frame
};

struct ManipulatorModel {
  int dof = 0;
  int task_dim = 3;  // 3 for spatial arms, 2 for the planar test model
  std::vector<DhRow> dh;
  std::vector<LinkInertia> links;
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};
  std::vector<std::array<double, 2>> joint_limits;

  // Throws ConfigError on any invariant breach (masses, SPD inertias, sizes).
  void validate() const;

  static ManipulatorModel load(const std::string& path);
};

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
};

// Checks finiteness and joint limits; throws ContractViolation.
void check_joint_state(const ManipulatorModel& model, const Eigen::VectorXd& q,
                       const Eigen::VectorXd& qd);

}  // namespace safectrl
