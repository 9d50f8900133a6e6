#include "safectrl/mlp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "safectrl/dynamics.hpp"
#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"

namespace safectrl {

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw ContractViolation("mlp input size mismatch");
  const Eigen::VectorXd a = (W1 * x + b1).array().tanh();
  return W2 * a + b2;
}

Eigen::MatrixXd Mlp::jacobian(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw ContractViolation("mlp input size mismatch");
  const Eigen::VectorXd a = (W1 * x + b1).array().tanh();
  const Eigen::VectorXd dact = 1.0 - a.array().square();
  return W2 * dact.asDiagonal() * W1;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

void MlpSurrogate::save(const std::string& path) const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "mlp_surrogate";
  j["dof"] = dof;
  j["task_dim"] = task_dim;
  j["hidden"] = net.hidden_dim();
  j["W1"] = matrix_to_json(net.W1);
  j["b1"] = vector_to_json(net.b1);
  j["W2"] = matrix_to_json(net.W2);
  j["b2"] = vector_to_json(net.b2);
  j["in_mean"] = vector_to_json(in_norm.mean);
  j["in_std"] = vector_to_json(in_norm.std);
  j["out_mean"] = vector_to_json(out_norm.mean);
  j["out_std"] = vector_to_json(out_norm.std);
  std::ofstream out(path);
  if (!out) throw ConfigError("mlp_model", "cannot write " + path);
  out << j.dump(1) << "\n";
}

MlpSurrogate MlpSurrogate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("mlp_model", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("mlp_model", std::string("parse error: ") + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw ConfigError("mlp_model", "unsupported format_version");
  MlpSurrogate s;
  s.dof = j.at("dof").get<int>();
  s.task_dim = j.at("task_dim").get<int>();
  s.net.W1 = matrix_from_json(j.at("W1"));
  s.net.b1 = vector_from_json(j.at("b1"));
  s.net.W2 = matrix_from_json(j.at("W2"));
  s.net.b2 = vector_from_json(j.at("b2"));
  s.in_norm.mean = vector_from_json(j.at("in_mean"));
  s.in_norm.std = vector_from_json(j.at("in_std"));
  s.out_norm.mean = vector_from_json(j.at("out_mean"));
  s.out_norm.std = vector_from_json(j.at("out_std"));
  if (s.net.input_dim() != s.feature_dim() || s.net.output_dim() != s.output_dim())
    throw ConfigError("mlp_model", "layer sizes inconsistent with dof/task_dim");
  return s;
}

Eigen::VectorXd surrogate_features(const ManipulatorModel& model,
                                   const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& qd) {
  const int m = model.dof, n = model.task_dim;
  if (u.size() != n) throw ContractViolation("force input has wrong dimension");
  const JointDynamics jd = joint_space_dynamics(model, q, qd);
  const Eigen::LDLT<Eigen::MatrixXd> Mldlt(jd.M);
  const Eigen::MatrixXd Jee = jacobian(model, q, m);
  const Eigen::MatrixXd MinvJt = Mldlt.solve(Jee.transpose());

  Eigen::VectorXd feat(n * m + 2 * m);
  for (int j = 1; j <= m; ++j) {
    const Eigen::MatrixXd Jj = jacobian(model, q, j);
    feat.segment((j - 1) * n, n) = Jj * (MinvJt * u);
  }
  feat.segment(n * m, m) = q;
  feat.segment(n * m + m, m) = qd;
  return feat;
}

Eigen::VectorXd surrogate_forward(const MlpSurrogate& s,
                                  const ManipulatorModel& model,
                                  const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& q,
                                  const Eigen::VectorXd& qd) {
  const Eigen::VectorXd feat = surrogate_features(model, u, q, qd);
  return s.out_norm.invert(s.net.forward(s.in_norm.apply(feat)));
}

Eigen::MatrixXd surrogate_jacobian_wrt_input(const MlpSurrogate& s,
                                             const ManipulatorModel& model,
                                             const Eigen::VectorXd& u,
                                             const Eigen::VectorXd& q,
                                             const Eigen::VectorXd& qd) {
  const int m = model.dof, n = model.task_dim;
  const Eigen::VectorXd feat = surrogate_features(model, u, q, qd);
  const Eigen::MatrixXd Jnet = s.net.jacobian(s.in_norm.apply(feat));

  // d(feature_j)/du = B_j = J_j M^-1 Jee'; chain through both normalizations.
  const JointDynamics jd = joint_space_dynamics(model, q, qd);
  const Eigen::LDLT<Eigen::MatrixXd> Mldlt(jd.M);
  const Eigen::MatrixXd Jee = jacobian(model, q, m);
  const Eigen::MatrixXd MinvJt = Mldlt.solve(Jee.transpose());

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.output_dim(), n);
  for (int j = 1; j <= m; ++j) {
    const Eigen::MatrixXd Bj = jacobian(model, q, j) * MinvJt;  // n x n
    const Eigen::MatrixXd block =
        Jnet.middleCols((j - 1) * n, n) *
        s.in_norm.std.segment((j - 1) * n, n).cwiseInverse().asDiagonal();
    out += block * Bj;
  }
  return s.out_norm.std.asDiagonal() * out;
}

}  // namespace safectrl
