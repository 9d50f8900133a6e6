#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "safectrl/barrier.hpp"
#include "safectrl/controller.hpp"
#include "safectrl/dynamics.hpp"
#include "safectrl/model.hpp"
#include "safectrl/safety.hpp"

namespace safectrl {

// Per-axis sinusoid x_i(t) = amp_i sin(omega_i t + phase_i) + offset_i with
// analytic first and second derivatives.
struct Trajectory3 {
  Eigen::VectorXd amp;
  Eigen::VectorXd omega;
  Eigen::VectorXd phase;
  Eigen::VectorXd offset;

  void eval(double t, Eigen::VectorXd* x, Eigen::VectorXd* xd,
            Eigen::VectorXd* xdd) const;
};

struct RbfConfig {
  bool enabled = true;
  int nodes = 11;
  double rho = 0.4;
  double gain = 100.0;
  double w_bound = 50.0;
  double q_range = 3.0;   // center box half-width for joint positions
  double qd_range = 3.0;  // and velocities
};

struct Scenario {
  std::string name;
  std::string manipulator_path;
  ManipulatorModel model;
  Trajectory3 desired;
  std::vector<Obstacle> obstacles;
  std::string controller_variant;  // tviblf-ecbf | nn-tviblf-ecbf | nn-tviblf-aecbf
  double duration = 0.0;
  double dt_control = 0.01;
  int substeps = 10;
  std::uint64_t seed = 1;
  Eigen::VectorXd initial_q;
  BarrierBounds bounds;
  ControllerGains gains;
  SafetyConfig safety;
  double unc_viscous = 0.5;
  double unc_coulomb = 0.2;
  double unc_amplitude = 1.0;
  double unc_frequency = 0.5;
  RbfConfig rbf;
  std::string mlp_model_path;
  // Redundancy handling: the task-space command is mapped as tau = J' u and
  // augmented with gravity compensation plus a posture PD servo acting inside
  // the dynamically-consistent null space (I - J' Jbar'). These terms leave
  // the task dynamics untouched but keep the internal motion bounded and the
  // posture on the non-singular branch of the initial configuration.
  bool null_gravity_comp = true;
  double null_stiffness = 100.0;
  double null_damping = 20.0;
  double metrics_settle_time = 1.0;  // see SimTrace::settle_time
  std::string resolved_json;  // full config snapshot for the run manifest

  int task_dim() const { return model.task_dim; }
};

// Loads and resolves a scenario file. Overrides are dotted-key/value pairs
// (values parsed as JSON), validated against the configuration schema before
// anything runs. Relative file references resolve against the scenario file's
// directory.
Scenario load_scenario(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>&
                           overrides = {});

// Re-checks every module precondition: model invariants, gain definiteness,
// bounded desired trajectory, initial state strictly inside the barriers.
// Throws ConfigError naming the offending key or axis.
void validate_scenario(const Scenario& scenario);

// Desired end-effector trajectory with derivatives.
void desired_trajectory(const Scenario& scenario, double t, Eigen::VectorXd* x_d,
                        Eigen::VectorXd* xd_dot, Eigen::VectorXd* xd_ddot);

// Center, velocity and acceleration of obstacle i (1-based) at time t.
void obstacle_position(const Scenario& scenario, int i, double t,
                       Eigen::Vector3d* p, Eigen::Vector3d* pd,
                       Eigen::Vector3d* pdd);

}  // namespace safectrl
