#pragma once

#include <Eigen/Core>
#include <string>

namespace safectrl {

struct SimTrace;

// Aggregates matching the benchmark tables. Tracking-phase statistics use the
// samples where the safety filter is inactive, avoidance-phase statistics use
// the samples where it is active.
struct Metrics {
  Eigen::VectorXd max_err_tracking;   // per-axis |e|, filter inactive
  Eigen::VectorXd max_err_avoidance;  // per-axis |e|, filter active
  double max_eucl_tracking = 0.0;     // |delta d|
  double max_eucl_avoidance = 0.0;
  double amse_tracking = 0.0;         // mean ||x - x_d||^2 / n over tracking samples, m^2
  double path_length = 0.0;           // sum of end-effector displacements, m
  double rotation_deg = 0.0;          // sum over joints and samples of |dq|, deg
  double min_obstacle_distance = 0.0; // over samples and obstacles, m
  Eigen::VectorXd max_force;          // per-axis max |u_act|, N
  int samples_tracking = 0;
  int samples_avoidance = 0;
};

Metrics compute_metrics(const SimTrace& trace);

// Flat key=value text file.
void write_metrics(const Metrics& metrics, const std::string& path);

}  // namespace safectrl
