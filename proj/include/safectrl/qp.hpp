#pragma once

#include <Eigen/Core>
#include <vector>

namespace safectrl {

// min 1/2 u' H u + f' u   subject to  A u <= b.
struct QpProblem {
  Eigen::MatrixXd H;  // symmetric positive definite
  Eigen::VectorXd f;
  Eigen::MatrixXd A;  // may have zero rows
  Eigen::VectorXd b;

  void validate() const;  // throws ContractViolation
};

struct QpSolution {
  Eigen::VectorXd u;
  std::vector<int> active_set;   // row indices with positive multipliers
  Eigen::VectorXd multipliers;   // per active-set entry
  double kkt_residual = 0.0;
  int iterations = 0;
};

// Dense dual active-set solver (Goldfarb-Idnani scheme): starts at the
// unconstrained minimizer and adds violated rows, taking primal and dual
// steps until all rows hold. Deterministic given the row ordering; ties are
// broken by lowest row index. Throws QpInfeasible with a jointly infeasible
// row subset, or QpMaxIterations past 100 iterations.
QpSolution solve_qp(const QpProblem& problem);

}  // namespace safectrl
