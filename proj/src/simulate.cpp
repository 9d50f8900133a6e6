#include "safectrl/simulate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "safectrl/controller.hpp"
#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"
#include "safectrl/rbf.hpp"
#include "safectrl/rng.hpp"
#include "safectrl/trace_io.hpp"

namespace safectrl {

int SimTrace::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw ContractViolation("trace column not found: " + name);
}

std::vector<std::string> trace_columns(int dof, int task_dim, int n_obstacles) {
  std::vector<std::string> cols;
  static const char* axes[] = {"x", "y", "z"};
  cols.push_back("t");
  for (int i = 1; i <= dof; ++i) cols.push_back("q_" + std::to_string(i));
  for (int i = 1; i <= dof; ++i) cols.push_back("qd_" + std::to_string(i));
  for (int f = 1; f <= dof; ++f)
    for (int a = 0; a < task_dim; ++a)
      cols.push_back("p" + std::to_string(f) + "_" + axes[a]);
  for (int a = 0; a < task_dim; ++a) cols.push_back(std::string("xd_") + axes[a]);
  for (int a = 0; a < task_dim; ++a) cols.push_back(std::string("z1_") + axes[a]);
  for (int a = 0; a < task_dim; ++a) cols.push_back(std::string("F_") + axes[a]);
  for (int a = 0; a < task_dim; ++a) cols.push_back(std::string("u_") + axes[a]);
  for (int i = 1; i <= dof; ++i) cols.push_back("tau_" + std::to_string(i));
  for (int a = 0; a < task_dim; ++a)
    cols.push_back(std::string("Dx_true_") + axes[a]);
  for (int a = 0; a < task_dim; ++a)
    cols.push_back(std::string("Dx_hat_") + axes[a]);
  for (int o = 1; o <= n_obstacles; ++o) cols.push_back("h_" + std::to_string(o));
  for (int o = 1; o <= n_obstacles; ++o)
    cols.push_back("dist_" + std::to_string(o));
  cols.push_back("filter_active");
  cols.push_back("V1");
  cols.push_back("V2");
  cols.push_back("V3");
  cols.push_back("V4");
  cols.push_back("qp_iterations");
  cols.push_back("kkt_residual");
  cols.push_back("clf_dropped");
  cols.push_back("gn_converged");
  return cols;
}

namespace {

struct PhysicsState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
};

// Joint accelerations under the ground-truth dynamics with the applied torque
// held over the step.
Eigen::VectorXd true_accel(const ManipulatorModel& model,
                           const UncertaintyGroundTruth& gt,
                           const Eigen::VectorXd& tau, const Eigen::VectorXd& q,
                           const Eigen::VectorXd& qd, double t) {
  const JointDynamics jd = joint_space_dynamics(model, q, qd);
  const Eigen::VectorXd d = gt.joint_uncertainty(model, q, qd, t);
  return jd.M.ldlt().solve(tau - jd.C * qd - jd.g - d);
}

PhysicsState rk4_step(const ManipulatorModel& model,
                      const UncertaintyGroundTruth& gt,
                      const Eigen::VectorXd& tau, const PhysicsState& s,
                      double t, double h) {
  const auto f = [&](const PhysicsState& st, double tt) {
    return std::pair<Eigen::VectorXd, Eigen::VectorXd>(
        st.qd, true_accel(model, gt, tau, st.q, st.qd, tt));
  };
  const auto [k1q, k1v] = f(s, t);
  const auto [k2q, k2v] = f({s.q + 0.5 * h * k1q, s.qd + 0.5 * h * k1v}, t + 0.5 * h);
  const auto [k3q, k3v] = f({s.q + 0.5 * h * k2q, s.qd + 0.5 * h * k2v}, t + 0.5 * h);
  const auto [k4q, k4v] = f({s.q + h * k3q, s.qd + h * k3v}, t + h);
  PhysicsState out;
  out.q = s.q + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  out.qd = s.qd + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  return out;
}

}  // namespace

void integrate_joint_dynamics(const ManipulatorModel& model,
                              const UncertaintyGroundTruth& gt,
                              const Eigen::VectorXd& tau, Eigen::VectorXd* q,
                              Eigen::VectorXd* qd, double t, double h) {
  PhysicsState s{*q, *qd};
  s = rk4_step(model, gt, tau, s, t, h);
  *q = s.q;
  *qd = s.qd;
}

namespace {

// Offline least-squares realization of the ideal estimator weights on a
// state grid; the grid spans the force, position and velocity input ranges.
Eigen::MatrixXd fit_wstar(const Scenario& sc, const RbfEstimator& est,
                          const UncertaintyGroundTruth& gt, double* residual) {
  const int m = sc.model.dof, n = sc.model.task_dim;
  const int dim = n + 2 * m;
  const int target_points = 300;
  Rng rng = Rng(sc.seed).fork(0x77737461ULL);  // wstar stream

  std::vector<Eigen::VectorXd> chis;
  std::vector<Eigen::VectorXd> targets;
  int attempts = 0;
  while (static_cast<int>(chis.size()) < target_points && attempts < 5 * target_points) {
    ++attempts;
    Eigen::VectorXd chi(dim);
    for (int i = 0; i < n; ++i)
      chi[i] = rng.uniform(-0.5, 0.5) * sc.rbf.q_range;
    Eigen::VectorXd q(m), qd(m);
    for (int i = 0; i < m; ++i) {
      double lo = -sc.rbf.q_range, hi = sc.rbf.q_range;
      if (!sc.model.joint_limits.empty()) {
        lo = std::max(lo, sc.model.joint_limits[i][0]);
        hi = std::min(hi, sc.model.joint_limits[i][1]);
      }
      q[i] = rng.uniform(lo, hi);
      qd[i] = rng.uniform(-2.0, 2.0);
    }
    chi.segment(n, m) = q;
    chi.segment(n + m, m) = qd;
    try {
      const TaskDynamics td = task_space_dynamics(sc.model, q, qd);
      const Eigen::VectorXd friction =
          gt.viscous.cwiseProduct(qd) +
          gt.coulomb.cwiseProduct(UncertaintyGroundTruth::coulomb_sign(qd));
      targets.push_back(td.Jbar.transpose() * friction);
      chis.push_back(chi);
    } catch (const SingularJacobian&) {
      continue;  // skip degenerate samples
    }
  }
  Eigen::MatrixXd inputs(chis.size(), dim), outs(chis.size(), n);
  for (std::size_t i = 0; i < chis.size(); ++i) {
    inputs.row(i) = chis[i].transpose();
    outs.row(i) = targets[i].transpose();
  }
  return fit_ideal_weights(est, inputs, outs, residual);
}

}  // namespace

SimResult run_scenario(const Scenario& sc) {
  validate_scenario(sc);
  const int m = sc.model.dof, n = sc.model.task_dim;
  const int n_obs = static_cast<int>(sc.obstacles.size());

  SimResult result;
  result.trace.columns = trace_columns(m, n, n_obs);
  result.trace.dof = m;
  result.trace.task_dim = n;
  result.trace.n_obstacles = n_obs;
  result.trace.dt_control = sc.dt_control;
  result.trace.settle_time = sc.metrics_settle_time;

  const UncertaintyGroundTruth gt = UncertaintyGroundTruth::make(
      m, sc.unc_viscous, sc.unc_coulomb, sc.unc_amplitude, sc.unc_frequency,
      sc.seed);

  // The estimator input is chi = [u / u_scale, q, qd]: the force channels
  // are mapped into the same box as the joint coordinates so the isotropic
  // Gaussian metric weighs all inputs comparably.
  std::vector<std::pair<double, double>> ranges;
  Eigen::VectorXd u_scale(n);
  for (int i = 0; i < n; ++i) {
    u_scale[i] = sc.safety.input_bounds[i] / sc.rbf.q_range;
    ranges.push_back({-sc.rbf.q_range, sc.rbf.q_range});
  }
  for (int i = 0; i < m; ++i) ranges.push_back({-sc.rbf.q_range, sc.rbf.q_range});
  for (int i = 0; i < m; ++i)
    ranges.push_back({-sc.rbf.qd_range, sc.rbf.qd_range});
  RbfEstimator estimator = RbfEstimator::make(sc.rbf.nodes, n, ranges,
                                              sc.rbf.rho, sc.rbf.w_bound, sc.seed);
  estimator.gain = sc.rbf.gain;
  result.W_star = fit_wstar(sc, estimator, gt, &result.wstar_residual);

  MlpSurrogate surrogate;
  const bool use_aecbf = sc.safety.filter == FilterType::Aecbf && n_obs > 0;
  if (use_aecbf) surrogate = MlpSurrogate::load(sc.mlp_model_path);

  PhysicsState state{sc.initial_q, Eigen::VectorXd::Zero(m)};
  Eigen::VectorXd u_prev = Eigen::VectorXd::Zero(n);
  bool engaged = false;

  const int steps = static_cast<int>(std::llround(sc.duration / sc.dt_control));

  // Reference posture along the desired path (damped least-squares position
  // IK, warm-started so the posture stays on the initial branch). The
  // null-space servo tracks it; with a square jacobian the projector is zero
  // and nothing is applied.
  std::vector<Eigen::VectorXd> q_ref(steps);
  std::vector<Eigen::VectorXd> qd_ref(steps);
  if (sc.null_stiffness > 0.0 || sc.null_damping > 0.0) {
    Eigen::VectorXd qr = sc.initial_q;
    Eigen::VectorXd x_d_k;
    for (int k = 0; k < steps; ++k) {
      sc.desired.eval(k * sc.dt_control, &x_d_k, nullptr, nullptr);
      qr = inverse_kinematics_position(sc.model, qr, x_d_k, 1e-9, 200);
      q_ref[k] = qr;
    }
    for (int k = 0; k < steps; ++k) {
      const int k2 = std::min(k + 1, steps - 1);
      qd_ref[k] = k2 > k ? ((q_ref[k2] - q_ref[k]) / sc.dt_control).eval()
                         : Eigen::VectorXd::Zero(m).eval();
    }
  }
  const double h_phys = sc.dt_control / sc.substeps;
  const int ncols = static_cast<int>(result.trace.columns.size());

  result.completed = true;
  for (int k = 0; k < steps; ++k) {
    const auto wall0 = std::chrono::steady_clock::now();
    const double t = k * sc.dt_control;
    try {
      const JointDynamics jd = joint_space_dynamics(sc.model, state.q, state.qd);
      const TaskDynamics td = task_space_dynamics(sc.model, state.q, state.qd);
      const auto positions = forward_kinematics(sc.model, state.q);
      const Eigen::VectorXd x = positions[m].head(n);
      const Eigen::VectorXd xdot = td.J * state.qd;

      Eigen::VectorXd x_d, xd_dot, xd_ddot;
      sc.desired.eval(t, &x_d, &xd_dot, &xd_ddot);

      sc.bounds.check_state_inside(x);
      sc.bounds.check_desired_inside(x_d);

      TrackingState tr;
      tr.z1 = x - x_d;
      tr.alpha = virtual_control(tr.z1, x, x_d, xd_dot, sc.bounds, sc.gains);
      tr.z2 = xdot - tr.alpha;
      tr.alpha_dot = alpha_dot_analytic(x, xdot, x_d, xd_dot, xd_ddot,
                                        sc.bounds, sc.gains);
      tr.p.resize(n);
      for (int i = 0; i < n; ++i) tr.p[i] = side_selector(tr.z1[i]);

      Eigen::VectorXd chi(n + 2 * m);
      chi << u_prev.cwiseQuotient(u_scale), state.q, state.qd;
      Eigen::VectorXd D_hat = Eigen::VectorXd::Zero(n);
      if (sc.rbf.enabled) {
        // Anti-windup: while the safety filter overrides the nominal force,
        // z2 reflects the commanded deviation, not unmodeled dynamics, so
        // the weights are held.
        if (!engaged) estimator.adapt(chi, tr.z2, sc.dt_control);
        D_hat = estimator.estimate(chi);
      }

      const Eigen::VectorXd F =
          nominal_force(td, tr, D_hat, x, x_d, sc.bounds, sc.gains);

      FilterDecision dec;
      dec.u_act = F;
      // Distances are always monitored over the end-effector and the last
      // two link frames, independent of which frames carry constraint rows.
      std::vector<int> monitor_frames;
      for (int f = std::max(1, m - 2); f <= m; ++f) monitor_frames.push_back(f);
      for (int f : sc.safety.constrained_frames)
        if (std::find(monitor_frames.begin(), monitor_frames.end(), f) ==
            monitor_frames.end())
          monitor_frames.push_back(f);
      Eigen::VectorXd h_vals(n_obs), dist_vals(n_obs);
      if (n_obs > 0) {
        for (int o = 0; o < n_obs; ++o) {
          const Eigen::Vector3d p = sc.obstacles[o].position(t);
          double best = std::numeric_limits<double>::infinity();
          for (int f : monitor_frames)
            best = std::min(best, (positions[f] - p).norm());
          dist_vals[o] = best;
          const double ds = sc.safety.d_safe(sc.obstacles[o].radius);
          h_vals[o] = best * best - ds * ds;
        }
      }
      if (sc.safety.filter != FilterType::Off && n_obs > 0) {
        const auto frames = build_frame_states(sc.model, jd, state.q, state.qd,
                                               D_hat, sc.safety.constrained_frames);
        const Eigen::VectorXd basis_vec =
            sc.rbf.enabled ? estimator.basis(chi)
                           : Eigen::VectorXd::Zero(estimator.nodes());
        FilterContext ctx{frames,
                          sc.obstacles,
                          t,
                          tr.z2,
                          tr.alpha,
                          tr.alpha_dot,
                          D_hat,
                          td,
                          sc.rbf.enabled ? estimator.W_hat
                                         : Eigen::MatrixXd::Zero(
                                               estimator.nodes(), n),
                          result.W_star,
                          basis_vec,
                          sc.rbf.rho,
                          sc.rbf.gain,
                          sc.bounds.k_c};
        dec = use_aecbf ? aecbf_filter(F, ctx, surrogate, sc.model, state.q,
                                       state.qd, sc.safety, engaged)
                        : ecbf_filter(F, ctx, sc.safety, engaged);
        engaged = dec.active;
      }

      Eigen::VectorXd tau = torque_map(td.J, dec.u_act);
      if (sc.null_gravity_comp) {
        // Jbar'(I - J' Jbar') g = 0: invisible in the task-space equations.
        tau += jd.g - td.J.transpose() * (td.Jbar.transpose() * jd.g);
      }
      if (sc.null_stiffness > 0.0 || sc.null_damping > 0.0) {
        // Inertia-consistent posture servo (M - J' Mx J) v: the induced joint
        // acceleration is (I - Jbar J) v, a pure null-space PD toward the
        // IK reference posture with no task-space component.
        const Eigen::VectorXd v =
            -sc.null_stiffness * (state.q - q_ref[k]) -
            sc.null_damping * (state.qd - qd_ref[k]);
        tau += jd.M * v - td.J.transpose() * (td.Mx * (td.J * v));
      }
      const Eigen::VectorXd Dx_true =
          td.Jbar.transpose() *
              (gt.viscous.cwiseProduct(state.qd) +
               gt.coulomb.cwiseProduct(
                   UncertaintyGroundTruth::coulomb_sign(state.qd))) +
          gt.disturbance(t, n);

      const LyapunovValues lyap = lyapunov_values(
          tr, td, x, x_d, sc.bounds,
          sc.rbf.enabled ? estimator.W_hat
                         : Eigen::MatrixXd::Zero(estimator.nodes(), n),
          result.W_star);

      Eigen::VectorXd row(ncols);
      int c = 0;
      row[c++] = t;
      for (int i = 0; i < m; ++i) row[c++] = state.q[i];
      for (int i = 0; i < m; ++i) row[c++] = state.qd[i];
      for (int f = 1; f <= m; ++f)
        for (int a = 0; a < n; ++a) row[c++] = positions[f][a];
      for (int a = 0; a < n; ++a) row[c++] = x_d[a];
      for (int a = 0; a < n; ++a) row[c++] = tr.z1[a];
      for (int a = 0; a < n; ++a) row[c++] = F[a];
      for (int a = 0; a < n; ++a) row[c++] = dec.u_act[a];
      for (int i = 0; i < m; ++i) row[c++] = tau[i];
      for (int a = 0; a < n; ++a) row[c++] = Dx_true[a];
      for (int a = 0; a < n; ++a) row[c++] = D_hat[a];
      for (int o = 0; o < n_obs; ++o) row[c++] = h_vals[o];
      for (int o = 0; o < n_obs; ++o) row[c++] = dist_vals[o];
      row[c++] = dec.active ? 1.0 : 0.0;
      row[c++] = lyap.V1;
      row[c++] = lyap.V2;
      row[c++] = lyap.V3;
      row[c++] = lyap.V4;
      row[c++] = dec.iterations;
      row[c++] = dec.kkt_residual;
      row[c++] = dec.clf_dropped ? 1.0 : 0.0;
      row[c++] = dec.converged ? 1.0 : 0.0;
      if (!row.allFinite())
        throw std::runtime_error("non-finite value in trace at t=" +
                                 std::to_string(t));
      result.trace.rows.push_back(std::move(row));

      u_prev = dec.u_act;
      for (int s = 0; s < sc.substeps; ++s)
        state = rk4_step(sc.model, gt, tau, state, t + s * h_phys, h_phys);
    } catch (const std::exception& e) {
      result.completed = false;
      result.failure = e.what();
      break;
    }
    const auto wall1 = std::chrono::steady_clock::now();
    result.step_seconds.push_back(
        std::chrono::duration<double>(wall1 - wall0).count());
  }

  result.metrics = compute_metrics(result.trace);
  return result;
}

TrainingCorpus generate_corpus(const Scenario& scenario, int phases,
                               int target_size) {
  if (phases < 1) throw ContractViolation("phases must be >= 1");
  const int m = scenario.model.dof, n = scenario.model.task_dim;

  std::vector<Eigen::VectorXd> rows;  // [t, u, q, qd, x_next]
  for (int ph = 0; ph < phases; ++ph) {
    Scenario sc = scenario;
    sc.controller_variant = "tviblf-ecbf";
    sc.rbf.enabled = false;
    sc.safety.filter = FilterType::Off;
    sc.mlp_model_path.clear();
    sc.desired.phase.array() += 2.0 * 3.141592653589793 * ph / phases;
    sc.seed = scenario.seed + ph;
    const SimResult r = run_scenario(sc);
    if (!r.completed)
      throw TrainingFailure("corpus generation run failed: " + r.failure);

    const SimTrace& tr = r.trace;
    std::vector<int> ucols, qcols, qdcols, pcols;
    for (const auto& cname : trace_columns(m, n, 0)) (void)cname;
    for (int a = 0; a < n; ++a)
      ucols.push_back(tr.col(std::string("u_") + "xyz"[a]));
    for (int i = 1; i <= m; ++i) qcols.push_back(tr.col("q_" + std::to_string(i)));
    for (int i = 1; i <= m; ++i)
      qdcols.push_back(tr.col("qd_" + std::to_string(i)));
    for (int f = 1; f <= m; ++f)
      for (int a = 0; a < n; ++a)
        pcols.push_back(tr.col("p" + std::to_string(f) + "_" + "xyz"[a]));

    // Pair the applied input with the positions one control sample later.
    for (int k = 0; k + 1 < tr.size(); ++k) {
      Eigen::VectorXd rec(1 + n + 2 * m + n * m);
      int c = 0;
      rec[c++] = tr.rows[k][0];
      for (int a = 0; a < n; ++a) rec[c++] = tr.rows[k][ucols[a]];
      for (int i = 0; i < m; ++i) rec[c++] = tr.rows[k][qcols[i]];
      for (int i = 0; i < m; ++i) rec[c++] = tr.rows[k][qdcols[i]];
      for (int i = 0; i < n * m; ++i) rec[c++] = tr.rows[k + 1][pcols[i]];
      rows.push_back(std::move(rec));
    }
  }

  const int total = static_cast<int>(rows.size());
  const int stride = std::max(1, total / std::max(1, target_size));
  TrainingCorpus corpus;
  corpus.dof = m;
  corpus.task_dim = n;
  std::vector<int> keep;
  for (int i = 0; i < total; i += stride) keep.push_back(i);
  const int N = static_cast<int>(keep.size());
  corpus.t.resize(N);
  corpus.U.resize(N, n);
  corpus.Q.resize(N, m);
  corpus.Qd.resize(N, m);
  corpus.X.resize(N, n * m);
  for (int i = 0; i < N; ++i) {
    const Eigen::VectorXd& rec = rows[keep[i]];
    int c = 0;
    corpus.t[i] = rec[c++];
    for (int a = 0; a < n; ++a) corpus.U(i, a) = rec[c++];
    for (int j = 0; j < m; ++j) corpus.Q(i, j) = rec[c++];
    for (int j = 0; j < m; ++j) corpus.Qd(i, j) = rec[c++];
    for (int j = 0; j < n * m; ++j) corpus.X(i, j) = rec[c++];
  }
  return corpus;
}

}  // namespace safectrl
