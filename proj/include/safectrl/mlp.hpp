#pragma once

#include <Eigen/Core>
#include <string>

#include "safectrl/model.hpp"

namespace safectrl {

// Single-hidden-layer perceptron, tanh hidden activation, linear output.
struct Mlp {
  Eigen::MatrixXd W1;  // hidden x in
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;  // out x hidden
  Eigen::VectorXd b2;

  int input_dim() const { return static_cast<int>(W1.cols()); }
  int hidden_dim() const { return static_cast<int>(W1.rows()); }
  int output_dim() const { return static_cast<int>(W2.rows()); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // Exact d(output)/d(input).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
};

struct Normalization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    return (v - mean).cwiseQuotient(std);
  }
  Eigen::VectorXd invert(const Eigen::VectorXd& v) const {
    return mean + v.cwiseProduct(std);
  }
};

// Cartesian-position surrogate: predicts the positions of all joint frames
// from per-joint force channels plus the joint state. The force channels map
// the end-effector wrench into each frame's task acceleration contribution,
// f_j = J_j M^-1 J_ee' u, so the input stays linear in u.
struct MlpSurrogate {
  Mlp net;
  Normalization in_norm;
  Normalization out_norm;
  int dof = 0;
  int task_dim = 0;

  int feature_dim() const { return task_dim * dof + 2 * dof; }
  int output_dim() const { return task_dim * dof; }

  void save(const std::string& path) const;
  static MlpSurrogate load(const std::string& path);
};

// Raw feature vector [f_1 .. f_m, q, qd] for the surrogate.
Eigen::VectorXd surrogate_features(const ManipulatorModel& model,
                                   const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& qd);

// Normalized forward pass returning physical-unit positions (n*m vector,
// frames 1..m stacked).
Eigen::VectorXd surrogate_forward(const MlpSurrogate& s,
                                  const ManipulatorModel& model,
                                  const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& q,
                                  const Eigen::VectorXd& qd);

// d(prediction)/d(u): analytic chain through the normalization and the
// force-channel map.
Eigen::MatrixXd surrogate_jacobian_wrt_input(const MlpSurrogate& s,
                                             const ManipulatorModel& model,
                                             const Eigen::VectorXd& u,
                                             const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qd);

}  // namespace safectrl
