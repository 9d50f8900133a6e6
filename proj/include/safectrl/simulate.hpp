#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "safectrl/corpus.hpp"
#include "safectrl/metrics.hpp"
#include "safectrl/scenario.hpp"

namespace safectrl {

// One row per control sample; columns are fixed by the schema below.
struct SimTrace {
  std::vector<std::string> columns;
  std::vector<Eigen::VectorXd> rows;
  int dof = 0;
  int task_dim = 0;
  int n_obstacles = 0;
  double dt_control = 0.0;
  // Tracking-error statistics (max errors, AMSE) skip samples before this
  // time so the initial-offset transient does not mask controller
  // differences; path, rotation and safety statistics use every sample.
  double settle_time = 0.0;

  int col(const std::string& name) const;  // throws ContractViolation if absent
  double at(int row, const std::string& name) const {
    return rows[row][col(name)];
  }
  int size() const { return static_cast<int>(rows.size()); }
};

std::vector<std::string> trace_columns(int dof, int task_dim, int n_obstacles);

struct SimResult {
  SimTrace trace;
  Metrics metrics;
  bool completed = false;
  std::string failure;
  std::vector<double> step_seconds;  // wall-clock per control sample
  Eigen::MatrixXd W_star;            // offline-fitted ideal weights
  double wstar_residual = 0.0;
};

// Runs the full closed loop: error computation, virtual control, adaptation,
// nominal force, trigger test, QP filtering, torque map, and RK4 physics
// substeps with the ground-truth uncertainty. Deterministic given the
// scenario seed. Failures (barrier violation, singular jacobian, infeasible
// QP) terminate the run and leave the partial trace in the result.
SimResult run_scenario(const Scenario& scenario);

// One fourth-order Runge-Kutta step of the ground-truth joint dynamics with
// the applied torque held constant.
void integrate_joint_dynamics(const ManipulatorModel& model,
                              const UncertaintyGroundTruth& gt,
                              const Eigen::VectorXd& tau, Eigen::VectorXd* q,
                              Eigen::VectorXd* qd, double t, double h);

// Harvests (u_act, q, qd) -> frame-position records by running the scenario
// with the baseline controller (no estimator, filter off) under `phases`
// evenly shifted trajectory phases, sampling every control step and then
// decimating to about `target_size` records.
TrainingCorpus generate_corpus(const Scenario& scenario, int phases,
                               int target_size);

}  // namespace safectrl
