#include "safectrl/safety.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"

namespace safectrl {

Eigen::Vector3d Obstacle::position(double t) const {
  if (type == Type::Static) return offset;
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i)
    p[i] = offset[i] + amp[i] * std::sin(omega[i] * t + phase[i]);
  return p;
}

Eigen::Vector3d Obstacle::velocity(double t) const {
  if (type == Type::Static) return Eigen::Vector3d::Zero();
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i)
    v[i] = amp[i] * omega[i] * std::cos(omega[i] * t + phase[i]);
  return v;
}

Eigen::Vector3d Obstacle::acceleration(double t) const {
  if (type == Type::Static) return Eigen::Vector3d::Zero();
  Eigen::Vector3d a;
  for (int i = 0; i < 3; ++i)
    a[i] = -amp[i] * omega[i] * omega[i] * std::sin(omega[i] * t + phase[i]);
  return a;
}

void SafetyConfig::validate(int dof, int task_dim) const {
  if (!(d_m > 0.0)) throw ConfigError("safety.d_m", "must be > 0");
  if (!(k2 > 0.0)) throw ConfigError("safety.k2", "must be > 0");
  if (!(r_ratio > 0.0)) throw ConfigError("safety.r_ratio", "must be > 0");
  // Pole placement sanity for s^2 + k2 s + k1: real, non-positive roots.
  if (k2 * k2 - 4.0 * k1() < 0.0)
    throw ConfigError("safety.r_ratio",
                      "k2^2 - 4 k1 < 0: barrier poles would be complex");
  if (!(clf_mu2 > 0.0)) throw ConfigError("safety.clf_mu2", "must be > 0");
  if (!(clf_c6 > 0.0)) throw ConfigError("safety.clf_c6", "must be > 0");
  if (!(c4 > 0.0)) throw ConfigError("safety.c4", "must be > 0");
  if (input_bounds.size() != task_dim)
    throw ConfigError("safety.input_bounds",
                      "expected one bound per task axis");
  if ((input_bounds.array() <= 0.0).any())
    throw ConfigError("safety.input_bounds", "bounds must be > 0");
  for (int f : constrained_frames)
    if (f < 1 || f > dof)
      throw ConfigError("safety.constrained_frames",
                        "frame " + std::to_string(f) + " out of [1, dof]");
  if (trigger_margin < 0.0)
    throw ConfigError("safety.trigger_margin", "must be >= 0");
  if (hysteresis < 0.0) throw ConfigError("safety.hysteresis", "must be >= 0");
  if (constraint_margin < 0.0)
    throw ConfigError("safety.constraint_margin", "must be >= 0");
  if (penalty_weight < 0.0)
    throw ConfigError("safety.penalty_weight", "must be >= 0");
}

double barrier_h(const Eigen::VectorXd& x_j, const Eigen::VectorXd& p_oi,
                 double d_safe) {
  return (x_j - p_oi).squaredNorm() - d_safe * d_safe;
}

LieDerivatives barrier_lie_derivatives(const Eigen::Vector3d& x_j,
                                       const Eigen::Vector3d& xd_j,
                                       const Eigen::Vector3d& xdd_j,
                                       const Obstacle& obstacle, double t,
                                       double d_safe) {
  const Eigen::Vector3d zeta = x_j - obstacle.position(t);
  const Eigen::Vector3d v_rel = xd_j - obstacle.velocity(t);
  const Eigen::Vector3d a_rel = xdd_j - obstacle.acceleration(t);
  LieDerivatives out;
  out.h = zeta.squaredNorm() - d_safe * d_safe;
  out.Lf_h = 2.0 * zeta.dot(v_rel);
  out.Lf2_h = 2.0 * zeta.dot(a_rel) + 2.0 * v_rel.squaredNorm();
  return out;
}

std::vector<FrameState> build_frame_states(const ManipulatorModel& model,
                                           const JointDynamics& jd,
                                           const Eigen::VectorXd& q,
                                           const Eigen::VectorXd& qd,
                                           const Eigen::VectorXd& D_hat,
                                           const std::vector<int>& frames) {
  const Eigen::LDLT<Eigen::MatrixXd> Mldlt(jd.M);
  const Eigen::MatrixXd Jee = jacobian(model, q, model.dof);
  const Eigen::MatrixXd MinvJt = Mldlt.solve(Jee.transpose());
  // u-independent joint acceleration under the estimated dynamics; the task
  // uncertainty estimate enters as the equivalent joint load Jee' D_hat.
  const Eigen::VectorXd qdd0 =
      Mldlt.solve(-(jd.C * qd) - jd.g - Jee.transpose() * D_hat);

  std::vector<FrameState> out;
  out.reserve(frames.size());
  for (int f : frames) {
    FrameState fs;
    fs.frame_index = f;
    const auto positions = forward_kinematics(model, q);
    fs.x = positions[f];
    const Eigen::MatrixXd Jf = jacobian(model, q, f);
    const Eigen::MatrixXd Jfd = jacobian_dot(model, q, qd, f);
    fs.xd.setZero();
    fs.xd.head(model.task_dim) = Jf * qd;
    fs.B = Jf * MinvJt;
    fs.drift.setZero();
    fs.drift.head(model.task_dim) = Jf * qdd0 + Jfd * qd;
    out.push_back(std::move(fs));
  }
  return out;
}

void ConstraintRows::append(const Eigen::RowVectorXd& row, double bound,
                            std::string label) {
  const int p = static_cast<int>(row.size());
  A.conservativeResize(A.rows() + 1, p);
  A.row(A.rows() - 1) = row;
  b.conservativeResize(b.size() + 1);
  b[b.size() - 1] = bound;
  labels.push_back(std::move(label));
}

ConstraintRows ecbf_constraint_rows(const std::vector<FrameState>& frames,
                                    const std::vector<Obstacle>& obstacles,
                                    double t, const SafetyConfig& config) {
  ConstraintRows rows;
  const double k1 = config.k1(), k2 = config.k2;
  for (const FrameState& fs : frames) {
    const int n = static_cast<int>(fs.B.cols());
    for (std::size_t oi = 0; oi < obstacles.size(); ++oi) {
      const Obstacle& ob = obstacles[oi];
      const double d_row = config.d_safe(ob.radius) + config.constraint_margin;
      const Eigen::Vector3d zeta = fs.x - ob.position(t);
      const Eigen::Vector3d v_rel = fs.xd - ob.velocity(t);
      const double h = zeta.squaredNorm() - d_row * d_row;
      const double lf_h = 2.0 * zeta.dot(v_rel);
      const Eigen::RowVectorXd a =
          -2.0 * (zeta.head(n).transpose() * fs.B);
      const double rhs =
          2.0 * zeta.dot(fs.drift - ob.acceleration(t)) +
          2.0 * v_rel.squaredNorm() + k1 * h + k2 * lf_h;
      rows.append(a, rhs,
                  "ecbf:f" + std::to_string(fs.frame_index) + ":o" +
                      std::to_string(oi + 1));
    }
  }
  return rows;
}

ConstraintRows output_bound_rows(const FrameState& ee,
                                 const Eigen::VectorXd& k_c,
                                 const SafetyConfig& config) {
  // One-sided linear barriers h = k_c -+ x_i per axis: the input gradient
  // never vanishes, so the rows stay individually feasible at any speed the
  // input bounds can brake.
  ConstraintRows rows;
  const int n = static_cast<int>(ee.B.cols());
  const double k1 = config.k1(), k2 = config.k2;
  for (int i = 0; i < n && i < k_c.size(); ++i) {
    const double x = ee.x[i], xd = ee.xd[i];
    const double k_row = k_c[i] - config.constraint_margin;
    const Eigen::RowVectorXd bi = ee.B.row(i);
    // upper wall: h = k_row - x
    rows.append(bi, -ee.drift[i] - k2 * xd + k1 * (k_row - x),
                "bound:+axis" + std::to_string(i + 1));
    // lower wall: h = k_row + x
    rows.append(-bi, ee.drift[i] + k2 * xd + k1 * (k_row + x),
                "bound:-axis" + std::to_string(i + 1));
  }
  return rows;
}

ConstraintRows clf_constraint_row(const Eigen::VectorXd& z2,
                                  const Eigen::VectorXd& alpha,
                                  const Eigen::VectorXd& alpha_dot,
                                  const TaskDynamics& td,
                                  const Eigen::VectorXd& D_hat,
                                  const Eigen::MatrixXd& W_hat,
                                  const Eigen::MatrixXd& W_star,
                                  const Eigen::VectorXd& rbf_basis_vec,
                                  double rho, double rbf_gain,
                                  const SafetyConfig& config) {
  double weight_err = 0.0;
  double adapt_term = 0.0;
  if (W_star.size() > 0 && W_star.size() == W_hat.size()) {
    const Eigen::MatrixXd W_tilde = W_star - W_hat;
    weight_err = 0.5 * W_tilde.squaredNorm();
    if (rbf_basis_vec.size() == W_hat.rows()) {
      const Eigen::MatrixXd W_hat_dot =
          -rbf_gain * rbf_basis_vec * z2.transpose() - rho * W_hat;
      adapt_term = (W_tilde.transpose() * W_hat_dot).trace();
    }
  }
  const double V4 = 0.5 * z2.dot(td.Mx * z2) + weight_err;
  const double rhs = config.clf_c6 - config.clf_mu2 * V4 +
                     z2.dot(td.Cx * alpha + td.gx + D_hat + td.Mx * alpha_dot) +
                     adapt_term;
  ConstraintRows rows;
  rows.append(z2.transpose(), rhs, "clf");
  return rows;
}

namespace {

// Minimum clearance (distance minus d_safe) over frames and obstacles, and
// the raw minimum distance.
void min_clearance(const std::vector<FrameState>& frames,
                   const std::vector<Obstacle>& obstacles, double t,
                   const SafetyConfig& config, double* clearance,
                   double* distance) {
  double cl = std::numeric_limits<double>::infinity();
  double di = std::numeric_limits<double>::infinity();
  for (const FrameState& fs : frames) {
    for (const Obstacle& ob : obstacles) {
      const double d = (fs.x - ob.position(t)).norm();
      cl = std::min(cl, d - config.d_safe(ob.radius));
      di = std::min(di, d);
    }
  }
  *clearance = cl;
  *distance = di;
}

ConstraintRows box_rows(const Eigen::VectorXd& bounds) {
  const int n = static_cast<int>(bounds.size());
  ConstraintRows rows;
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
    r[i] = 1.0;
    rows.append(r, bounds[i], "ubound:+" + std::to_string(i + 1));
    r[i] = -1.0;
    rows.append(r, bounds[i], "ubound:-" + std::to_string(i + 1));
  }
  return rows;
}

ConstraintRows assemble_rows(const Eigen::VectorXd& F, const FilterContext& ctx,
                             const SafetyConfig& config, bool include_clf) {
  ConstraintRows rows = ecbf_constraint_rows(ctx.frames, ctx.obstacles, ctx.t, config);
  if (ctx.k_c.size() > 0) {
    const FrameState* ee = nullptr;
    for (const FrameState& fs : ctx.frames)
      if (ee == nullptr || fs.frame_index > ee->frame_index) ee = &fs;
    if (ee != nullptr) {
      const ConstraintRows box = output_bound_rows(*ee, ctx.k_c, config);
      for (int i = 0; i < box.A.rows(); ++i)
        rows.append(box.A.row(i), box.b[i], box.labels[i]);
    }
  }
  if (include_clf) {
    const ConstraintRows clf =
        clf_constraint_row(ctx.z2, ctx.alpha, ctx.alpha_dot, ctx.td, ctx.D_hat,
                           ctx.W_hat, ctx.W_star, ctx.rbf_basis_vec, ctx.rho,
                           ctx.rbf_gain, config);
    rows.append(clf.A.row(0), clf.b[0], clf.labels[0]);
  }
  const ConstraintRows box = box_rows(config.input_bounds);
  for (int i = 0; i < box.A.rows(); ++i)
    rows.append(box.A.row(i), box.b[i], box.labels[i]);
  (void)F;
  return rows;
}

bool filter_engaged(double clearance, const SafetyConfig& config,
                    bool engaged_prev) {
  if (engaged_prev)
    return clearance <= config.trigger_margin + config.hysteresis;
  return clearance <= config.trigger_margin;
}

}  // namespace

FilterDecision ecbf_filter(const Eigen::VectorXd& F, const FilterContext& ctx,
                           const SafetyConfig& config, bool engaged_prev) {
  FilterDecision dec;
  double clearance = 0.0;
  min_clearance(ctx.frames, ctx.obstacles, ctx.t, config, &clearance,
                &dec.min_distance);
  if (!filter_engaged(clearance, config, engaged_prev)) {
    dec.active = false;
    dec.u_act = F;
    return dec;
  }
  dec.active = true;

  const int n = static_cast<int>(F.size());
  QpProblem qp;
  qp.H = 2.0 * Eigen::MatrixXd::Identity(n, n);
  qp.f = -2.0 * F;

  auto run = [&](bool with_clf) {
    const ConstraintRows rows = assemble_rows(F, ctx, config, with_clf);
    qp.A = rows.A;
    qp.b = rows.b;
    try {
      return solve_qp(qp);
    } catch (const QpInfeasible& e) {
      std::string named = "QP infeasible: {";
      for (std::size_t i = 0; i < e.constraint_subset.size(); ++i) {
        if (i > 0) named += ", ";
        named += rows.labels[e.constraint_subset[i]];
      }
      named += "}";
      throw QpInfeasible(e.constraint_subset, named);
    }
  };

  QpSolution sol;
  try {
    sol = run(true);
  } catch (const QpInfeasible&) {
    // Safety rows take precedence over the stability row.
    sol = run(false);
    dec.clf_dropped = true;
  }
  dec.u_act = sol.u;
  dec.active_constraints = sol.active_set;
  dec.kkt_residual = sol.kkt_residual;
  dec.iterations = sol.iterations;
  return dec;
}

FilterDecision aecbf_filter(const Eigen::VectorXd& F, const FilterContext& ctx,
                            const MlpSurrogate& surrogate,
                            const ManipulatorModel& model,
                            const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                            const SafetyConfig& config, bool engaged_prev) {
  FilterDecision dec = ecbf_filter(F, ctx, config, engaged_prev);
  if (!dec.active || config.penalty_weight == 0.0) return dec;

  const int n = static_cast<int>(F.size());
  const double gamma = config.penalty_weight;

  // Per obstacle: nearest constrained frame and the boundary target point.
  struct PenaltyTerm {
    int frame_pos;  // position within ctx.frames
    Eigen::Vector3d target;
  };
  std::vector<PenaltyTerm> terms;
  for (const Obstacle& ob : ctx.obstacles) {
    const Eigen::Vector3d p = ob.position(ctx.t);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t fi = 0; fi < ctx.frames.size(); ++fi) {
      const double d = (ctx.frames[fi].x - p).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(fi);
      }
    }
    Eigen::Vector3d gamma_dir;
    if (config.penalty_gamma_mode == GammaMode::Literal) {
      gamma_dir = Eigen::Vector3d::Ones();
    } else {
      Eigen::Vector3d zeta = ctx.frames[best].x - p;
      const double nz = zeta.norm();
      gamma_dir = nz > 1e-12 ? Eigen::Vector3d(zeta / nz) : Eigen::Vector3d::Ones();
    }
    terms.push_back({best, p + config.d_safe(ob.radius) * gamma_dir});
  }

  bool with_clf = !dec.clf_dropped;
  ConstraintRows rows = assemble_rows(F, ctx, config, with_clf);

  auto true_objective = [&](const Eigen::VectorXd& u) {
    double obj = (F - u).squaredNorm();
    const Eigen::VectorXd pred = surrogate_forward(surrogate, model, u, q, qd);
    for (const PenaltyTerm& term : terms) {
      const int fr = ctx.frames[term.frame_pos].frame_index;
      obj += gamma *
             (pred.segment((fr - 1) * n, n) - term.target.head(n)).squaredNorm();
    }
    return obj;
  };

  Eigen::VectorXd u = dec.u_act;  // feasible start from the plain filter
  Eigen::VectorXd best_u = u;
  double best_obj = true_objective(u);
  bool converged = false;
  int iters = 0;

  for (int it = 0; it < 10; ++it) {
    iters = it + 1;
    const Eigen::VectorXd pred = surrogate_forward(surrogate, model, u, q, qd);
    const Eigen::MatrixXd Sfull =
        surrogate_jacobian_wrt_input(surrogate, model, u, q, qd);

    Eigen::MatrixXd H = 2.0 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd f = -2.0 * (F - u);
    for (const PenaltyTerm& term : terms) {
      const int fr = ctx.frames[term.frame_pos].frame_index;
      const Eigen::MatrixXd S = Sfull.middleRows((fr - 1) * n, n);
      const Eigen::VectorXd r =
          pred.segment((fr - 1) * n, n) - term.target.head(n);
      H += 2.0 * gamma * S.transpose() * S;
      f += 2.0 * gamma * S.transpose() * r;
    }

    QpProblem qp;
    qp.H = 0.5 * (H + H.transpose().eval());
    qp.f = f;
    qp.A = rows.A;
    qp.b = rows.b - rows.A * u;

    QpSolution sol;
    try {
      sol = solve_qp(qp);
    } catch (const QpInfeasible&) {
      if (!with_clf) throw;
      with_clf = false;
      dec.clf_dropped = true;
      rows = assemble_rows(F, ctx, config, false);
      qp.A = rows.A;
      qp.b = rows.b - rows.A * u;
      sol = solve_qp(qp);
    }

    u += sol.u;
    dec.kkt_residual = sol.kkt_residual;
    const double obj = true_objective(u);
    if (obj < best_obj) {
      best_obj = obj;
      best_u = u;
      dec.active_constraints = sol.active_set;
    }
    if (sol.u.norm() < 1e-6) {
      converged = true;
      break;
    }
  }

  dec.u_act = best_u;
  dec.converged = converged;
  dec.iterations = iters;
  return dec;
}

Eigen::VectorXd torque_map(const Eigen::MatrixXd& J, const Eigen::VectorXd& u) {
  if (J.rows() != u.size())
    throw ContractViolation("torque_map dimension mismatch");
  return J.transpose() * u;
}

}  // namespace safectrl
