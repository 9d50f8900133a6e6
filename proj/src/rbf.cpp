#include "safectrl/rbf.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "safectrl/errors.hpp"
#include "safectrl/rng.hpp"

namespace safectrl {

Eigen::VectorXd RbfEstimator::basis(const Eigen::VectorXd& chi) const {
  if (chi.size() != input_dim())
    throw ContractViolation("rbf input dimension mismatch");
  const int l = nodes();
  Eigen::VectorXd s(l);
  const double inv_w2 = 1.0 / (width * width);
  for (int j = 0; j < l; ++j) {
    const double d2 = (chi.transpose() - centers.row(j)).squaredNorm();
    s[j] = std::exp(-d2 * inv_w2);
  }
  return s;
}

Eigen::VectorXd RbfEstimator::estimate(const Eigen::VectorXd& chi) const {
  return W_hat.transpose() * basis(chi);
}

void RbfEstimator::adapt(const Eigen::VectorXd& chi, const Eigen::VectorXd& z2,
                         double dt) {
  if (!(dt > 0.0)) throw ContractViolation("adapt requires dt > 0");
  const Eigen::VectorXd s = basis(chi);
  W_hat += dt * (-gain * s * z2.transpose() - rho * W_hat);
  W_hat = W_hat.cwiseMax(-w_bound).cwiseMin(w_bound);
}

RbfEstimator RbfEstimator::make(
    int nodes, int output_dim,
    const std::vector<std::pair<double, double>>& ranges, double rho,
    double w_bound, std::uint64_t seed) {
  if (nodes < 1) throw ContractViolation("need at least one rbf node");
  const int dim = static_cast<int>(ranges.size());
  RbfEstimator est;
  est.rho = rho;
  est.w_bound = w_bound;
  est.centers.resize(nodes, dim);

  // Latin hypercube: one stratum midpoint per node and dimension, with the
  // strata permuted independently per dimension.
  Rng rng = Rng(seed).fork(0x726266ULL);  // rbf stream
  for (int d = 0; d < dim; ++d) {
    const auto perm = rng.permutation(nodes);
    const double lo = ranges[d].first, hi = ranges[d].second;
    for (int j = 0; j < nodes; ++j)
      est.centers(j, d) = lo + (perm[j] + 0.5) / nodes * (hi - lo);
  }

  // Shared width: average nearest-center distance.
  if (nodes > 1) {
    double total = 0.0;
    for (int j = 0; j < nodes; ++j) {
      double nearest = std::numeric_limits<double>::infinity();
      for (int k = 0; k < nodes; ++k) {
        if (k == j) continue;
        nearest = std::min(nearest, (est.centers.row(j) - est.centers.row(k)).norm());
      }
      total += nearest;
    }
    est.width = total / nodes;
  } else {
    double span = 0.0;
    for (const auto& r : ranges) span += (r.second - r.first) * (r.second - r.first);
    est.width = std::max(1e-6, std::sqrt(span) / 2.0);
  }

  est.W_hat.resize(nodes, output_dim);
  for (int j = 0; j < nodes; ++j)
    for (int c = 0; c < output_dim; ++c) est.W_hat(j, c) = rng.uniform(-0.1, 0.1);
  return est;
}

Eigen::MatrixXd fit_ideal_weights(const RbfEstimator& estimator,
                                  const Eigen::MatrixXd& inputs,
                                  const Eigen::MatrixXd& targets,
                                  double* max_residual) {
  const int N = static_cast<int>(inputs.rows());
  const int l = estimator.nodes();
  Eigen::MatrixXd S(N, l);
  for (int i = 0; i < N; ++i)
    S.row(i) = estimator.basis(inputs.row(i).transpose()).transpose();
  // Ridge-regularized normal equations keep the fit well posed when basis
  // columns are nearly collinear on the sampled grid.
  const Eigen::MatrixXd G =
      S.transpose() * S + 1e-10 * Eigen::MatrixXd::Identity(l, l);
  const Eigen::MatrixXd W = G.ldlt().solve(S.transpose() * targets);
  if (max_residual != nullptr) {
    double worst = 0.0;
    for (int i = 0; i < N; ++i)
      worst = std::max(worst, (S.row(i) * W - targets.row(i)).norm());
    *max_residual = worst;
  }
  return W;
}

}  // namespace safectrl
