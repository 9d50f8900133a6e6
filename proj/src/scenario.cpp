#include "safectrl/scenario.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"

namespace safectrl {

namespace {

using nlohmann::json;

Eigen::VectorXd to_vector(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError(key, "expected an array of numbers");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(key, "expected numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

// Known configuration keys and a coarse type tag; overrides are rejected
// unless they address one of these.
const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "name", "manipulator", "controller", "duration", "dt_control", "substeps",
      "seed", "initial_q", "mlp_model",
      "trajectory.amp", "trajectory.omega", "trajectory.phase",
      "trajectory.offset",
      "obstacles",
      "barrier.k_c",
      "gains.k_z", "gains.K_b_track", "gains.c1", "gains.eta_variant",
      "safety.d_m", "safety.k2", "safety.r_ratio", "safety.clf_mu2",
      "safety.clf_c6", "safety.c4", "safety.input_bounds",
      "safety.constrained_frames", "safety.penalty_gamma_mode", "safety.filter",
      "safety.trigger_margin", "safety.hysteresis", "safety.constraint_margin",
      "safety.penalty_weight",
      "uncertainty.viscous", "uncertainty.coulomb", "uncertainty.amplitude",
      "uncertainty.frequency",
      "rbf.enabled", "rbf.nodes", "rbf.rho", "rbf.gain", "rbf.w_bound", "rbf.q_range",
      "rbf.qd_range",
      "null_space.gravity_comp", "null_space.stiffness", "null_space.damping",
      "metrics_settle_time",
  };
  return keys;
}

void set_dotted(json& root, const std::string& dotted, const json& value) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

Obstacle parse_obstacle(const json& j, int index) {
  const std::string key = "obstacles[" + std::to_string(index) + "]";
  Obstacle ob;
  const std::string type = j.value("type", "static");
  if (type == "static") {
    ob.type = Obstacle::Type::Static;
    const Eigen::VectorXd c = to_vector(j.at("center"), key + ".center");
    if (c.size() != 3) throw ConfigError(key + ".center", "expected 3 entries");
    ob.offset = c.head<3>();
  } else if (type == "sinusoid3") {
    ob.type = Obstacle::Type::Sinusoid3;
    auto get3 = [&](const char* name) {
      const Eigen::VectorXd v = to_vector(j.at(name), key + "." + name);
      if (v.size() != 3)
        throw ConfigError(key + "." + name, "expected 3 entries");
      return Eigen::Vector3d(v.head<3>());
    };
    ob.amp = get3("amp");
    ob.omega = get3("omega");
    ob.phase = j.contains("phase") ? get3("phase") : Eigen::Vector3d::Zero();
    ob.offset = get3("offset");
  } else {
    throw ConfigError(key + ".type", "expected 'static' or 'sinusoid3'");
  }
  ob.radius = j.value("radius", 0.05);
  if (!(ob.radius > 0.0)) throw ConfigError(key + ".radius", "must be > 0");
  return ob;
}

}  // namespace

void Trajectory3::eval(double t, Eigen::VectorXd* x, Eigen::VectorXd* xd,
                       Eigen::VectorXd* xdd) const {
  const int n = static_cast<int>(amp.size());
  if (x != nullptr) x->resize(n);
  if (xd != nullptr) xd->resize(n);
  if (xdd != nullptr) xdd->resize(n);
  for (int i = 0; i < n; ++i) {
    const double arg = omega[i] * t + phase[i];
    if (x != nullptr) (*x)[i] = offset[i] + amp[i] * std::sin(arg);
    if (xd != nullptr) (*xd)[i] = amp[i] * omega[i] * std::cos(arg);
    if (xdd != nullptr)
      (*xdd)[i] = -amp[i] * omega[i] * omega[i] * std::sin(arg);
  }
}

Scenario load_scenario(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scenario", "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("scenario",
                      std::string("parse error in ") + path + ": " + e.what());
  }

  for (const auto& [key, raw] : overrides) {
    if (known_keys().count(key) == 0)
      throw ConfigError(key, "unknown configuration key");
    json value;
    try {
      value = json::parse(raw);
    } catch (...) {
      value = raw;  // bare strings are allowed unquoted
    }
    set_dotted(j, key, value);
  }

  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& rel) {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p.string() : (dir / p).string();
  };

  Scenario sc;
  sc.name = j.value("name", std::filesystem::path(path).stem().string());
  sc.manipulator_path = resolve(j.at("manipulator").get<std::string>());
  sc.model = ManipulatorModel::load(sc.manipulator_path);
  const int n = sc.model.task_dim;

  const json& tj = j.at("trajectory");
  sc.desired.amp = to_vector(tj.at("amp"), "trajectory.amp");
  sc.desired.omega = to_vector(tj.at("omega"), "trajectory.omega");
  sc.desired.phase = tj.contains("phase")
                         ? to_vector(tj["phase"], "trajectory.phase")
                         : Eigen::VectorXd::Zero(n);
  sc.desired.offset = to_vector(tj.at("offset"), "trajectory.offset");
  if (sc.desired.amp.size() != n || sc.desired.omega.size() != n ||
      sc.desired.phase.size() != n || sc.desired.offset.size() != n)
    throw ConfigError("trajectory", "expected " + std::to_string(n) +
                                        " entries per component");

  if (j.contains("obstacles")) {
    int idx = 0;
    for (const auto& oj : j["obstacles"]) sc.obstacles.push_back(parse_obstacle(oj, idx++));
  }

  sc.controller_variant = j.value("controller", "nn-tviblf-aecbf");
  sc.duration = j.at("duration").get<double>();
  sc.dt_control = j.value("dt_control", 0.01);
  sc.substeps = j.value("substeps", 10);
  sc.seed = j.value("seed", 1ULL);
  sc.initial_q = to_vector(j.at("initial_q"), "initial_q");

  sc.bounds.k_c = to_vector(j.at("barrier").at("k_c"), "barrier.k_c");

  const json& gj = j.at("gains");
  sc.gains.k_z = to_vector(gj.at("k_z"), "gains.k_z");
  {
    const json& kb = gj.at("K_b_track");
    if (kb.is_array() && !kb.empty() && kb[0].is_array()) {
      const int rows = static_cast<int>(kb.size());
      sc.gains.K_b_track.resize(rows, rows);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < rows; ++c)
          sc.gains.K_b_track(r, c) = kb[r][c].get<double>();
    } else {
      const Eigen::VectorXd diag = to_vector(kb, "gains.K_b_track");
      sc.gains.K_b_track = diag.asDiagonal();
    }
  }
  sc.gains.c1 = gj.value("c1", 1.0);
  const std::string eta = gj.value("eta_variant", "cancelling");
  if (eta == "cancelling")
    sc.gains.eta = EtaVariant::Cancelling;
  else if (eta == "literal")
    sc.gains.eta = EtaVariant::Literal;
  else
    throw ConfigError("gains.eta_variant", "expected 'cancelling' or 'literal'");

  const json sj = j.value("safety", json::object());
  sc.safety.d_m = sj.value("d_m", 0.07);
  sc.safety.k2 = sj.value("k2", 10.0);
  sc.safety.r_ratio = sj.value("r_ratio", 0.2);
  sc.safety.clf_mu2 = sj.value("clf_mu2", 0.2);
  sc.safety.clf_c6 = sj.value("clf_c6", 10.0);
  sc.safety.c4 = sj.value("c4", 1.0);
  sc.safety.input_bounds = sj.contains("input_bounds")
                               ? to_vector(sj["input_bounds"], "safety.input_bounds")
                               : Eigen::VectorXd::Constant(n, 50.0);
  if (sj.contains("constrained_frames")) {
    sc.safety.constrained_frames.clear();
    for (const auto& f : sj["constrained_frames"])
      sc.safety.constrained_frames.push_back(f.get<int>());
  } else {
    // End-effector plus the last two link frames.
    for (int f = std::max(1, sc.model.dof - 2); f <= sc.model.dof; ++f)
      sc.safety.constrained_frames.push_back(f);
  }
  const std::string gm = sj.value("penalty_gamma_mode", "literal");
  if (gm == "literal")
    sc.safety.penalty_gamma_mode = GammaMode::Literal;
  else if (gm == "radial")
    sc.safety.penalty_gamma_mode = GammaMode::Radial;
  else
    throw ConfigError("safety.penalty_gamma_mode", "expected 'literal' or 'radial'");
  sc.safety.trigger_margin = sj.value("trigger_margin", 0.08);
  sc.safety.hysteresis = sj.value("hysteresis", 0.005);
  sc.safety.constraint_margin = sj.value("constraint_margin", 1e-3);
  sc.safety.penalty_weight = sj.value("penalty_weight", 1.0);

  // The controller variant picks the estimator and filter; explicit
  // rbf.enabled / safety.filter keys (including overrides) take precedence.
  if (sc.controller_variant == "tviblf-ecbf") {
    sc.rbf.enabled = false;
    sc.safety.filter = FilterType::Ecbf;
  } else if (sc.controller_variant == "nn-tviblf-ecbf") {
    sc.rbf.enabled = true;
    sc.safety.filter = FilterType::Ecbf;
  } else if (sc.controller_variant == "nn-tviblf-aecbf") {
    sc.rbf.enabled = true;
    sc.safety.filter = FilterType::Aecbf;
  } else {
    throw ConfigError("controller",
                      "expected tviblf-ecbf | nn-tviblf-ecbf | nn-tviblf-aecbf");
  }
  if (sj.contains("filter")) {
    const std::string f = sj["filter"].get<std::string>();
    if (f == "ecbf")
      sc.safety.filter = FilterType::Ecbf;
    else if (f == "aecbf")
      sc.safety.filter = FilterType::Aecbf;
    else if (f == "off")
      sc.safety.filter = FilterType::Off;
    else
      throw ConfigError("safety.filter", "expected 'ecbf', 'aecbf' or 'off'");
  }

  const json uj = j.value("uncertainty", json::object());
  sc.unc_viscous = uj.value("viscous", 0.5);
  sc.unc_coulomb = uj.value("coulomb", 0.2);
  sc.unc_amplitude = uj.value("amplitude", 1.0);
  sc.unc_frequency = uj.value("frequency", 0.5);

  const json rj = j.value("rbf", json::object());
  if (rj.contains("enabled")) sc.rbf.enabled = rj["enabled"].get<bool>();
  sc.rbf.nodes = rj.value("nodes", 11);
  sc.rbf.rho = rj.value("rho", 0.4);
  sc.rbf.gain = rj.value("gain", 100.0);
  sc.rbf.w_bound = rj.value("w_bound", 50.0);
  sc.rbf.q_range = rj.value("q_range", 3.0);
  sc.rbf.qd_range = rj.value("qd_range", 3.0);

  if (j.contains("mlp_model") && !j["mlp_model"].get<std::string>().empty())
    sc.mlp_model_path = resolve(j["mlp_model"].get<std::string>());

  sc.metrics_settle_time = j.value("metrics_settle_time", 1.0);
  if (sc.metrics_settle_time < 0.0)
    throw ConfigError("metrics_settle_time", "must be >= 0");

  const json nj = j.value("null_space", json::object());
  sc.null_gravity_comp = nj.value("gravity_comp", true);
  sc.null_stiffness = nj.value("stiffness", 100.0);
  sc.null_damping = nj.value("damping", 20.0);
  if (sc.null_stiffness < 0.0)
    throw ConfigError("null_space.stiffness", "must be >= 0");
  if (sc.null_damping < 0.0)
    throw ConfigError("null_space.damping", "must be >= 0");

  sc.resolved_json = j.dump(1);
  validate_scenario(sc);
  return sc;
}

void validate_scenario(const Scenario& sc) {
  sc.model.validate();
  const int n = sc.model.task_dim;

  if (!(sc.duration >= 0.0)) throw ConfigError("duration", "must be >= 0");
  if (!(sc.dt_control > 0.0)) throw ConfigError("dt_control", "must be > 0");
  if (sc.substeps < 1) throw ConfigError("substeps", "must be >= 1");
  if (sc.initial_q.size() != sc.model.dof)
    throw ConfigError("initial_q", "expected one entry per joint");

  if (sc.bounds.k_c.size() != n)
    throw ConfigError("barrier.k_c", "expected one bound per task axis");
  if ((sc.bounds.k_c.array() <= 0.0).any())
    throw ConfigError("barrier.k_c", "bounds must be > 0");

  sc.gains.validate(n);
  sc.safety.validate(sc.model.dof, n);
  if (!sc.obstacles.empty() && n != 3)
    throw ConfigError("obstacles", "obstacle filtering needs task_dim == 3");

  if (!(sc.unc_viscous >= 0.0)) throw ConfigError("uncertainty.viscous", "must be >= 0");
  if (!(sc.unc_coulomb >= 0.0)) throw ConfigError("uncertainty.coulomb", "must be >= 0");
  if (!(sc.unc_amplitude >= 0.0)) throw ConfigError("uncertainty.amplitude", "must be >= 0");
  if (sc.rbf.nodes < 1) throw ConfigError("rbf.nodes", "must be >= 1");
  if (!(sc.rbf.rho > 0.0)) throw ConfigError("rbf.rho", "must be > 0");
  if (!(sc.rbf.gain > 0.0)) throw ConfigError("rbf.gain", "must be > 0");
  if (!(sc.rbf.w_bound > 0.0)) throw ConfigError("rbf.w_bound", "must be > 0");

  static const char* axis_names[] = {"x", "y", "z"};
  // The desired trajectory must stay strictly inside the bounds for all t.
  Eigen::VectorXd x_d;
  const double step = std::min(0.002, sc.duration > 0 ? sc.duration : 0.002);
  for (double t = 0.0; t <= sc.duration + 1e-12; t += step) {
    sc.desired.eval(t, &x_d, nullptr, nullptr);
    for (int i = 0; i < n; ++i) {
      if (std::abs(x_d[i]) >= sc.bounds.k_c[i])
        throw ConfigError("trajectory",
                          std::string("desired trajectory leaves the bound on axis ") +
                              axis_names[i] + " at t=" + std::to_string(t));
    }
  }

  // Initial end-effector position strictly inside the barriers.
  const auto positions = forward_kinematics(sc.model, sc.initial_q);
  const Eigen::VectorXd x0 = positions[sc.model.dof].head(n);
  for (int i = 0; i < n; ++i) {
    if (std::abs(x0[i]) >= sc.bounds.k_c[i])
      throw ConfigError("barrier.k_c",
                        std::string("initial end-effector position violates axis ") +
                            axis_names[i] + ": |" + std::to_string(x0[i]) +
                            "| >= " + std::to_string(sc.bounds.k_c[i]));
  }

  if (sc.safety.filter == FilterType::Aecbf && sc.mlp_model_path.empty())
    throw ConfigError("mlp_model",
                      "the aecbf filter needs a trained surrogate; set mlp_model "
                      "or train one with 'safectrl train-mlp'");
}

void desired_trajectory(const Scenario& scenario, double t, Eigen::VectorXd* x_d,
                        Eigen::VectorXd* xd_dot, Eigen::VectorXd* xd_ddot) {
  if (t < 0.0 || t > scenario.duration + 1e-9)
    throw ContractViolation("t outside [0, duration]");
  scenario.desired.eval(t, x_d, xd_dot, xd_ddot);
}

void obstacle_position(const Scenario& scenario, int i, double t,
                       Eigen::Vector3d* p, Eigen::Vector3d* pd,
                       Eigen::Vector3d* pdd) {
  if (i < 1 || i > static_cast<int>(scenario.obstacles.size()))
    throw ContractViolation("obstacle index out of range");
  const Obstacle& ob = scenario.obstacles[i - 1];
  if (p != nullptr) *p = ob.position(t);
  if (pd != nullptr) *pd = ob.velocity(t);
  if (pdd != nullptr) *pdd = ob.acceleration(t);
}

}  // namespace safectrl
