#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace safectrl {

// Caller-side contract breaches (dimension mismatches, bad arguments).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Configuration / input-file problems, carrying the offending key.
struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string k, const std::string& what)
      : std::runtime_error("config key '" + k + "': " + what), key(std::move(k)) {}
};

// Jacobian lost row rank; no damping is applied, the caller must decide.
struct SingularJacobian : std::runtime_error {
  double smallest_singular_value;
  explicit SingularJacobian(double sigma_min)
      : std::runtime_error("jacobian rank deficient, sigma_min=" +
                           std::to_string(sigma_min)),
        smallest_singular_value(sigma_min) {}
};

// A barrier argument left the admissible set.
struct BarrierViolation : std::runtime_error {
  int axis;  // -1 when raised from an axis-agnostic helper
  double value;
  double bound;
  BarrierViolation(int ax, double v, double b)
      : std::runtime_error("barrier violation on axis " + std::to_string(ax) +
                           ": |" + std::to_string(v) + "| >= " + std::to_string(b)),
        axis(ax), value(v), bound(b) {}
};

// The QP constraint set is empty; carries a jointly infeasible row subset.
struct QpInfeasible : std::runtime_error {
  std::vector<int> constraint_subset;
  explicit QpInfeasible(std::vector<int> rows)
      : std::runtime_error("QP infeasible"), constraint_subset(std::move(rows)) {
  }
  QpInfeasible(std::vector<int> rows, const std::string& what)
      : std::runtime_error(what), constraint_subset(std::move(rows)) {}
};

struct QpMaxIterations : std::runtime_error {
  double kkt_residual;
  explicit QpMaxIterations(double res)
      : std::runtime_error("QP iteration cap reached, kkt_residual=" +
                           std::to_string(res)),
        kkt_residual(res) {}
};

struct TrainingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace safectrl
