#include "safectrl/qp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "safectrl/errors.hpp"

namespace safectrl {

void QpProblem::validate() const {
  const int p = static_cast<int>(H.rows());
  if (H.cols() != p || f.size() != p)
    throw ContractViolation("QP dimensions inconsistent");
  if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != p))
    throw ContractViolation("QP constraint dimensions inconsistent");
  if (!H.allFinite() || !f.allFinite() || !A.allFinite() || !b.allFinite())
    throw ContractViolation("QP data contains non-finite entries");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw ContractViolation("QP hessian must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  if (es.eigenvalues().minCoeff() <= 1e-10)
    throw ContractViolation("QP hessian must be positive definite");
}

namespace {

constexpr double kFeasTol = 1e-11;
constexpr double kZeroStep = 1e-12;
constexpr int kMaxIterations = 100;

double kkt_residual(const QpProblem& qp, const Eigen::VectorXd& x,
                    const std::vector<int>& active,
                    const Eigen::VectorXd& lambda) {
  Eigen::VectorXd grad = qp.H * x + qp.f;
  for (std::size_t j = 0; j < active.size(); ++j)
    grad += lambda[j] * qp.A.row(active[j]).transpose();
  double res = grad.cwiseAbs().maxCoeff();
  if (qp.A.rows() > 0) {
    const Eigen::VectorXd slack = qp.A * x - qp.b;
    res = std::max(res, slack.maxCoeff());
    for (std::size_t j = 0; j < active.size(); ++j)
      res = std::max(res, std::abs(lambda[j] * slack[active[j]]));
  }
  return res;
}

}  // namespace

QpSolution solve_qp(const QpProblem& qp) {
  qp.validate();
  const int p = static_cast<int>(qp.H.rows());
  const int m = static_cast<int>(qp.A.rows());

  // Internal sign convention: n_i' x >= d_i with n_i = -a_i, d_i = -b_i.
  const Eigen::LDLT<Eigen::MatrixXd> Hllt(qp.H);
  Eigen::VectorXd x = Hllt.solve(-qp.f);

  std::vector<int> active;
  std::vector<double> lambda;
  Eigen::VectorXd row_norm(m);
  for (int i = 0; i < m; ++i) row_norm[i] = qp.A.row(i).norm();
  for (int i = 0; i < m; ++i) {
    if (row_norm[i] == 0.0 && qp.b[i] < -kFeasTol) throw QpInfeasible({i});
  }

  int iterations = 0;
  while (true) {
    // Most violated inactive row, scaled by the row norm.
    int pick = -1;
    double worst = -kFeasTol;
    for (int i = 0; i < m; ++i) {
      if (row_norm[i] == 0.0) continue;
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double viol = (qp.b[i] - qp.A.row(i).dot(x)) / row_norm[i];
      if (viol < worst) {
        worst = viol;
        pick = i;
      }
    }
    if (pick < 0) break;

    const Eigen::VectorXd n_p = -qp.A.row(pick).transpose();
    const double d_p = -qp.b[pick];
    double lambda_p = 0.0;

    while (true) {
      if (++iterations > kMaxIterations) {
        Eigen::VectorXd lam(active.size());
        for (std::size_t j = 0; j < active.size(); ++j) lam[j] = lambda[j];
        throw QpMaxIterations(kkt_residual(qp, x, active, lam));
      }

      const int na = static_cast<int>(active.size());
      Eigen::VectorXd r(na);
      Eigen::VectorXd z;
      const Eigen::VectorXd Hinv_np = Hllt.solve(n_p);
      if (na == 0) {
        z = Hinv_np;
      } else {
        Eigen::MatrixXd N(p, na);
        for (int j = 0; j < na; ++j)
          N.col(j) = -qp.A.row(active[j]).transpose();
        const Eigen::MatrixXd HinvN = Hllt.solve(N);
        const Eigen::MatrixXd B = N.transpose() * HinvN;
        r = B.ldlt().solve(N.transpose() * Hinv_np);
        z = Hinv_np - HinvN * r;
      }

      const double step_quality = n_p.dot(z);
      const bool primal_step = z.norm() > kZeroStep && step_quality > kZeroStep;

      // Partial (dual) step bound from active multipliers.
      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (int j = 0; j < na; ++j) {
        if (r[j] > kZeroStep) {
          const double cand = lambda[j] / r[j];
          if (cand < t1 - 1e-15) {
            t1 = cand;
            drop = j;
          }
        }
      }

      if (!primal_step) {
        if (drop < 0) {
          // n_p lies in the span of the active normals and no multiplier can
          // yield: the active rows plus pick are jointly infeasible.
          std::vector<int> subset = active;
          subset.push_back(pick);
          std::sort(subset.begin(), subset.end());
          throw QpInfeasible(subset);
        }
        for (int j = 0; j < na; ++j) lambda[j] -= t1 * r[j];
        lambda_p += t1;
        active.erase(active.begin() + drop);
        lambda.erase(lambda.begin() + drop);
        continue;
      }

      const double s_p = n_p.dot(x) - d_p;  // negative while violated
      const double t2 = std::max(0.0, -s_p / step_quality);
      const double t = std::min(t1, t2);

      x += t * z;
      for (int j = 0; j < na; ++j) lambda[j] -= t * r[j];
      lambda_p += t;

      if (t2 <= t1) {
        active.push_back(pick);
        lambda.push_back(lambda_p);
        break;
      }
      active.erase(active.begin() + drop);
      lambda.erase(lambda.begin() + drop);
    }
  }

  QpSolution sol;
  sol.u = x;
  sol.active_set = active;
  sol.multipliers.resize(active.size());
  for (std::size_t j = 0; j < active.size(); ++j) sol.multipliers[j] = lambda[j];
  sol.kkt_residual = kkt_residual(qp, x, active, sol.multipliers);
  sol.iterations = iterations;
  return sol;
}

}  // namespace safectrl
