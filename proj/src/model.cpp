#include "safectrl/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "safectrl/errors.hpp"

namespace safectrl {

namespace {

Eigen::Vector3d to_vec3(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(key, "expected an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Matrix3d to_inertia(const nlohmann::json& j) {
  Eigen::Matrix3d I;
  if (j.is_array() && j.size() == 6) {
    // [Ixx, Iyy, Izz, Ixy, Ixz, Iyz]
    I << j[0].get<double>(), j[3].get<double>(), j[4].get<double>(),
         j[3].get<double>(), j[1].get<double>(), j[5].get<double>(),
         j[4].get<double>(), j[5].get<double>(), j[2].get<double>();
  } else if (j.is_array() && j.size() == 3 && j[0].is_array()) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) I(r, c) = j[r][c].get<double>();
  } else {
    throw ConfigError("links.inertia", "expected [Ixx,Iyy,Izz,Ixy,Ixz,Iyz] or 3x3");
  }
  return I;
}

}  // namespace

void ManipulatorModel::validate() const {
  if (dof < 1) throw ConfigError("dof", "must be >= 1");
  if (task_dim != 2 && task_dim != 3) throw ConfigError("task_dim", "must be 2 or 3");
  if (static_cast<int>(dh.size()) != dof)
    throw ConfigError("dh", "expected one row per joint");
  if (static_cast<int>(links.size()) != dof)
    throw ConfigError("links", "expected one entry per joint");
  if (!joint_limits.empty() && static_cast<int>(joint_limits.size()) != dof)
    throw ConfigError("joint_limits", "expected one [lo,hi] pair per joint");
  for (int i = 0; i < dof; ++i) {
    const auto& link = links[i];
    if (!(link.mass > 0.0))
      throw ConfigError("links[" + std::to_string(i) + "].mass", "must be > 0");
    const Eigen::Matrix3d sym = 0.5 * (link.inertia + link.inertia.transpose());
    if ((link.inertia - sym).cwiseAbs().maxCoeff() > 1e-12)
      throw ConfigError("links[" + std::to_string(i) + "].inertia",
                        "must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sym);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ConfigError("links[" + std::to_string(i) + "].inertia",
                        "must be positive definite");
  }
  if (!gravity.allFinite()) throw ConfigError("gravity", "must be finite");
}

ManipulatorModel ManipulatorModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("manipulator", "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("manipulator", std::string("parse error in ") + path + ": " + e.what());
  }

  ManipulatorModel m;
  m.dof = j.at("dof").get<int>();
  m.task_dim = j.value("task_dim", 3);
  for (const auto& row : j.at("dh")) {
    if (!row.is_array() || row.size() != 4)
      throw ConfigError("dh", "each row must be [a, alpha, d, theta_offset]");
    m.dh.push_back({row[0].get<double>(), row[1].get<double>(),
                    row[2].get<double>(), row[3].get<double>()});
  }
  for (const auto& link : j.at("links")) {
    LinkInertia li;
    li.mass = link.at("mass").get<double>();
    li.com = to_vec3(link.at("com"), "links.com");
    li.inertia = to_inertia(link.at("inertia"));
    m.links.push_back(li);
  }
  if (j.contains("gravity")) m.gravity = to_vec3(j["gravity"], "gravity");
  if (j.contains("joint_limits")) {
    for (const auto& lim : j["joint_limits"]) {
      if (!lim.is_array() || lim.size() != 2)
        throw ConfigError("joint_limits", "each entry must be [lo, hi]");
      m.joint_limits.push_back({lim[0].get<double>(), lim[1].get<double>()});
    }
  }
  m.validate();
  return m;
}

void check_joint_state(const ManipulatorModel& model, const Eigen::VectorXd& q,
                       const Eigen::VectorXd& qd) {
  if (q.size() != model.dof || qd.size() != model.dof)
    throw ContractViolation("joint state dimension mismatch");
  if (!q.allFinite() || !qd.allFinite())
    throw ContractViolation("joint state contains non-finite entries");
  for (std::size_t i = 0; i < model.joint_limits.size(); ++i) {
    if (q[i] < model.joint_limits[i][0] || q[i] > model.joint_limits[i][1])
      throw ContractViolation("joint " + std::to_string(i + 1) +
                              " outside configured limits");
  }
}

}  // namespace safectrl
