#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace safectrl {

// Records of (u_act, q, qd) -> joint-frame positions harvested from
// simulation traces. CSV schema:
// t,u_1..u_n,q_1..q_m,qd_1..qd_m,x_1..x_{n*m}.
struct TrainingCorpus {
  int dof = 0;
  int task_dim = 0;
  Eigen::VectorXd t;
  Eigen::MatrixXd U;   // N x n
  Eigen::MatrixXd Q;   // N x m
  Eigen::MatrixXd Qd;  // N x m
  Eigen::MatrixXd X;   // N x (n*m)

  int size() const { return static_cast<int>(t.size()); }

  void save_csv(const std::string& path) const;
  static TrainingCorpus load_csv(const std::string& path, int dof, int task_dim);

  // Deterministic disjoint split; held_fraction in (0, 0.5].
  struct Split;
  Split split(double held_fraction, std::uint64_t seed) const;
};

struct TrainingCorpus::Split {
  TrainingCorpus train;
  TrainingCorpus heldout;
};

}  // namespace safectrl
