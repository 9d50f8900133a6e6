#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace safectrl {

// Gaussian radial basis network, linear in the weights. The input is
// chi = [u, q, qd] (task force plus joint state). Weight adaptation is
// leaky gradient descent with a per-entry clamp that keeps every weight
// inside [-w_bound, w_bound].
struct RbfEstimator {
  Eigen::MatrixXd W_hat;    // l x n
  Eigen::MatrixXd centers;  // l x input_dim
  double width = 1.0;       // shared Gaussian width
  double rho = 0.4;         // adaptation leak
  double gain = 1.0;        // learning rate on the gradient term
  double w_bound = 50.0;    // per-entry clamp

  int nodes() const { return static_cast<int>(centers.rows()); }
  int input_dim() const { return static_cast<int>(centers.cols()); }
  int output_dim() const { return static_cast<int>(W_hat.cols()); }

  Eigen::VectorXd basis(const Eigen::VectorXd& chi) const;
  Eigen::VectorXd estimate(const Eigen::VectorXd& chi) const;

  // W <- clamp(W + dt * (-gain * s(chi) z2' - rho W)). The gradient term
  // descends z2' (W' s - D): the update direction opposite to s z2' is the
  // one that shrinks the velocity error, which the closed-loop decay
  // certificate confirms.
  void adapt(const Eigen::VectorXd& chi, const Eigen::VectorXd& z2, double dt);

  // Latin-hypercube centers over per-dimension ranges; the shared width is
  // the average nearest-center distance. Initial weights uniform in
  // [-0.1, 0.1], drawn from the seeded stream.
  static RbfEstimator make(int nodes, int output_dim,
                           const std::vector<std::pair<double, double>>& ranges,
                           double rho, double w_bound, std::uint64_t seed);
};

// Least-squares fit of the weights to samples of the true uncertainty over a
// state grid. Used to realize the ideal-weight diagnostics; returns the
// fitted weights and stores the worst-case fit residual norm in *max_residual.
Eigen::MatrixXd fit_ideal_weights(const RbfEstimator& estimator,
                                  const Eigen::MatrixXd& inputs,
                                  const Eigen::MatrixXd& targets,
                                  double* max_residual = nullptr);

}  // namespace safectrl
