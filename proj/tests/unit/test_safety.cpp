#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "safectrl/dynamics.hpp"
#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"
#include "safectrl/rng.hpp"
#include "safectrl/safety.hpp"

using namespace safectrl;

namespace {

SafetyConfig default_config(int n = 3) {
  SafetyConfig c;
  c.input_bounds = Eigen::VectorXd::Constant(n, 50.0);
  c.constrained_frames = {3};
  c.constraint_margin = 0.0;
  return c;
}

TaskDynamics identity_task_dynamics(int n) {
  TaskDynamics td;
  td.Mx = Eigen::MatrixXd::Identity(n, n);
  td.Cx = Eigen::MatrixXd::Zero(n, n);
  td.gx = Eigen::VectorXd::Zero(n);
  return td;
}

FilterContext make_context(const std::vector<FrameState>& frames,
                           const std::vector<Obstacle>& obstacles, double t,
                           const TaskDynamics& td) {
  FilterContext ctx{frames,
                    obstacles,
                    t,
                    Eigen::VectorXd::Zero(3),
                    Eigen::VectorXd::Zero(3),
                    Eigen::VectorXd::Zero(3),
                    Eigen::VectorXd::Zero(3),
                    td,
                    Eigen::MatrixXd(),
                    Eigen::MatrixXd(),
                    Eigen::VectorXd(),
                    0.0,
                    1.0,
                    Eigen::VectorXd()};
  return ctx;
}

}  // namespace

TEST_CASE("barrier value: direct arithmetic and paper defaults") {
  Eigen::Vector3d zeta(0.2, 0.0, 0.0);
  CHECK(barrier_h(zeta, Eigen::Vector3d::Zero(), 0.12) ==
        doctest::Approx(0.0256).epsilon(1e-12));
  Eigen::Vector3d boundary(0.12, 0.0, 0.0);
  CHECK(barrier_h(boundary, Eigen::Vector3d::Zero(), 0.12) ==
        doctest::Approx(0.0).epsilon(1e-12));
  SafetyConfig c = default_config();
  CHECK(c.d_safe(0.05) == doctest::Approx(0.12));
}

TEST_CASE("lie derivatives: static obstacle substitutions") {
  Obstacle ob;
  ob.type = Obstacle::Type::Static;
  ob.offset = Eigen::Vector3d::Zero();
  const Eigen::Vector3d x(0.3, 0.0, 0.0);
  const Eigen::Vector3d v(-0.5, 0.2, 0.0);
  const auto d =
      barrier_lie_derivatives(x, v, Eigen::Vector3d::Zero(), ob, 0.0, 0.12);
  CHECK(d.Lf_h == doctest::Approx(2.0 * x.dot(v)).epsilon(1e-14));
  CHECK(d.Lf2_h == doctest::Approx(2.0 * v.squaredNorm()).epsilon(1e-14));

  // Relative motion along zeta at speed s.
  const Eigen::Vector3d vr = 0.7 * x.normalized();
  const auto d2 =
      barrier_lie_derivatives(x, vr, Eigen::Vector3d::Zero(), ob, 0.0, 0.12);
  CHECK(d2.Lf_h == doctest::Approx(2.0 * x.norm() * 0.7).epsilon(1e-12));
}

TEST_CASE("lie derivative matches d/dt of h along an analytic trajectory") {
  Obstacle ob;
  ob.type = Obstacle::Type::Sinusoid3;
  ob.amp = Eigen::Vector3d(0.2, 0.1, 0.0);
  ob.omega = Eigen::Vector3d(-1.5, -1.5, 0.0);
  ob.phase = Eigen::Vector3d(0.4, 0.0, 0.0);
  ob.offset = Eigen::Vector3d(0.1, -0.2, 0.3);
  // Double-integrator trajectory x(t) = x0 + v0 t + 0.5 a t^2.
  const Eigen::Vector3d x0(0.5, 0.1, 0.2), v0(-0.3, 0.2, 0.1), a(0.1, 0.0, -0.2);
  auto x_of = [&](double t) { return Eigen::Vector3d(x0 + v0 * t + 0.5 * a * t * t); };
  auto v_of = [&](double t) { return Eigen::Vector3d(v0 + a * t); };
  const double dt = 1e-6;
  for (double t : {0.1, 0.7, 1.9}) {
    const auto d = barrier_lie_derivatives(x_of(t), v_of(t), a, ob, t, 0.12);
    const double h_p = barrier_h(x_of(t + dt), ob.position(t + dt), 0.12);
    const double h_m = barrier_h(x_of(t - dt), ob.position(t - dt), 0.12);
    CHECK(d.Lf_h == doctest::Approx((h_p - h_m) / (2 * dt)).epsilon(1e-5));
    const double lf_p = 2.0 * (x_of(t + dt) - ob.position(t + dt))
                                  .dot(v_of(t + dt) - ob.velocity(t + dt));
    const double lf_m = 2.0 * (x_of(t - dt) - ob.position(t - dt))
                                  .dot(v_of(t - dt) - ob.velocity(t - dt));
    CHECK(d.Lf2_h == doctest::Approx((lf_p - lf_m) / (2 * dt)).epsilon(1e-4));
  }
}

TEST_CASE("ecbf rows evaluated at u reproduce the lie-derivative expression") {
  const auto model =
      ManipulatorModel::load(oracles::model_path("spatial_three_link.json"));
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(3), qd(3);
    for (int i = 0; i < 3; ++i) {
      q[i] = rng.uniform(-1.0, 1.0);
      qd[i] = rng.uniform(-0.8, 0.8);
    }
    JointDynamics jd;
    try {
      jd = joint_space_dynamics(model, q, qd);
      task_space_dynamics(model, q, qd);
    } catch (const SingularJacobian&) {
      continue;
    }
    const Eigen::VectorXd D_hat = Eigen::Vector3d(0.2, -0.1, 0.3);
    const auto frames = build_frame_states(model, jd, q, qd, D_hat, {3});

    Obstacle ob;
    ob.type = Obstacle::Type::Static;
    ob.offset = frames[0].x + Eigen::Vector3d(0.3, 0.1, -0.2);
    SafetyConfig cfg = default_config();
    const auto rows = ecbf_constraint_rows(frames, {ob}, 0.0, cfg);
    REQUIRE(rows.A.rows() == 1);

    Eigen::Vector3d u;
    for (int i = 0; i < 3; ++i) u[i] = rng.uniform(-20, 20);

    // Row slack must equal Lf2h + k1 h + k2 Lfh with the acceleration the
    // estimated dynamics assign to this u.
    const Eigen::LDLT<Eigen::MatrixXd> Ml(jd.M);
    const Eigen::MatrixXd Jee = jacobian(model, q, 3);
    const Eigen::VectorXd qdd = Ml.solve(
        Jee.transpose() * u - jd.C * qd - jd.g - Jee.transpose() * D_hat);
    const Eigen::Vector3d xdd =
        jacobian(model, q, 3) * qdd + jacobian_dot(model, q, qd, 3) * qd;
    const auto lie = barrier_lie_derivatives(frames[0].x, frames[0].xd, xdd, ob,
                                             0.0, cfg.d_safe(ob.radius));
    const double expr = lie.Lf2_h + cfg.k1() * lie.h + cfg.k2 * lie.Lf_h;
    const double slack = rows.b[0] - rows.A.row(0).dot(u);
    CHECK(slack == doctest::Approx(expr).epsilon(1e-10));
  }
}

TEST_CASE("clf row: zero z2 degenerates to a constant condition; scaling c6 "
          "only adds slack") {
  const TaskDynamics td = identity_task_dynamics(3);
  SafetyConfig cfg = default_config();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  const auto row =
      clf_constraint_row(zero, zero, zero, td, zero, Eigen::MatrixXd(),
                         Eigen::MatrixXd(), Eigen::VectorXd(), 0.4, 1.0, cfg);
  CHECK(row.A.row(0).norm() == 0.0);
  CHECK(row.b[0] >= cfg.clf_c6 - 1e-12);

  SafetyConfig cfg10 = cfg;
  cfg10.clf_c6 *= 10.0;
  Eigen::VectorXd z2(3);
  z2 << 0.1, -0.2, 0.05;
  const auto r1 =
      clf_constraint_row(z2, zero, zero, td, zero, Eigen::MatrixXd(),
                         Eigen::MatrixXd(), Eigen::VectorXd(), 0.4, 1.0, cfg);
  const auto r2 =
      clf_constraint_row(z2, zero, zero, td, zero, Eigen::MatrixXd(),
                         Eigen::MatrixXd(), Eigen::VectorXd(), 0.4, 1.0, cfg10);
  CHECK(r2.b[0] - r1.b[0] == doctest::Approx(9.0 * cfg.clf_c6));
  CHECK((r1.A - r2.A).norm() == 0.0);
}

TEST_CASE("ecbf filter: far obstacles leave the force untouched") {
  const TaskDynamics td = identity_task_dynamics(3);
  FrameState fs;
  fs.frame_index = 1;
  fs.x = Eigen::Vector3d(0.0, 0.0, 0.0);
  fs.xd = Eigen::Vector3d(0.1, 0.0, 0.0);
  fs.B = Eigen::MatrixXd::Identity(3, 3);
  fs.drift = Eigen::Vector3d::Zero();
  Obstacle ob;
  ob.offset = Eigen::Vector3d(5.0, 0.0, 0.0);
  const std::vector<FrameState> frames{fs};
  const std::vector<Obstacle> obstacles{ob};
  const auto ctx = make_context(frames, obstacles, 0.0, td);
  SafetyConfig cfg = default_config();
  const Eigen::VectorXd F = Eigen::Vector3d(3.0, -1.0, 2.0);
  const auto dec = ecbf_filter(F, ctx, cfg, false);
  CHECK_FALSE(dec.active);
  CHECK((dec.u_act - F).norm() == 0.0);
}

TEST_CASE("ecbf filter: nominal force kept exactly when it satisfies the rows") {
  const TaskDynamics td = identity_task_dynamics(3);
  FrameState fs;
  fs.frame_index = 1;
  fs.x = Eigen::Vector3d(0.18, 0.0, 0.0);  // inside the trigger shell
  fs.xd = Eigen::Vector3d(0.05, 0.0, 0.0);  // receding
  fs.B = Eigen::MatrixXd::Identity(3, 3);
  fs.drift = Eigen::Vector3d::Zero();
  Obstacle ob;
  ob.offset = Eigen::Vector3d::Zero();
  const std::vector<FrameState> frames{fs};
  const std::vector<Obstacle> obstacles{ob};
  const auto ctx = make_context(frames, obstacles, 0.0, td);
  SafetyConfig cfg = default_config();
  const Eigen::VectorXd F = Eigen::Vector3d(1.0, 0.2, 0.0);  // pushes away
  const auto dec = ecbf_filter(F, ctx, cfg, false);
  CHECK(dec.active);
  CHECK((dec.u_act - F).norm() < 1e-10);
}

TEST_CASE("ecbf filter: head-on double-integrator approach stays safe") {
  const TaskDynamics td = identity_task_dynamics(3);
  SafetyConfig cfg = default_config();
  cfg.trigger_margin = 0.4;
  Obstacle ob;
  ob.offset = Eigen::Vector3d::Zero();
  ob.radius = 0.05;
  const std::vector<Obstacle> obstacles{ob};
  const double d_safe = cfg.d_safe(ob.radius);

  Eigen::Vector3d x(-1.0, 0.0, 0.0), v(0.0, 0.0, 0.0);
  const Eigen::Vector3d goal(1.0, 0.0, 0.0);
  const double dt = 1e-3;
  bool engaged = false;
  double min_h = 1e9;
  for (int k = 0; k < 4000; ++k) {
    FrameState fs;
    fs.frame_index = 1;
    fs.x = x;
    fs.xd = v;
    fs.B = Eigen::MatrixXd::Identity(3, 3);
    fs.drift = Eigen::Vector3d::Zero();
    const std::vector<FrameState> frames{fs};
    const auto ctx = make_context(frames, obstacles, k * dt, td);
    const Eigen::VectorXd F = -4.0 * (x - goal) - 4.0 * v;
    const auto dec = ecbf_filter(F, ctx, cfg, engaged);
    engaged = dec.active;
    const Eigen::Vector3d u = dec.u_act;
    x += dt * v + 0.5 * dt * dt * u;
    v += dt * u;
    min_h = std::min(min_h, x.squaredNorm() - d_safe * d_safe);
  }
  CHECK(min_h >= 0.0);
  CHECK((x - goal).norm() < 4.0);  // still making progress around the obstacle
}

TEST_CASE("aecbf: zero penalty weight reduces to the plain filter") {
  const TaskDynamics td = identity_task_dynamics(3);
  const auto model =
      ManipulatorModel::load(oracles::model_path("spatial_three_link.json"));
  MlpSurrogate s;
  s.dof = 3;
  s.task_dim = 3;
  s.net.W1 = Eigen::MatrixXd::Zero(2, s.feature_dim());
  s.net.b1 = Eigen::VectorXd::Zero(2);
  s.net.W2 = Eigen::MatrixXd::Zero(s.output_dim(), 2);
  s.net.b2 = Eigen::VectorXd::Zero(s.output_dim());
  s.in_norm.mean = Eigen::VectorXd::Zero(s.feature_dim());
  s.in_norm.std = Eigen::VectorXd::Ones(s.feature_dim());
  s.out_norm.mean = Eigen::VectorXd::Zero(s.output_dim());
  s.out_norm.std = Eigen::VectorXd::Ones(s.output_dim());

  FrameState fs;
  fs.frame_index = 3;
  fs.x = Eigen::Vector3d(0.15, 0.0, 0.0);
  fs.xd = Eigen::Vector3d(-0.3, 0.0, 0.0);
  fs.B = Eigen::MatrixXd::Identity(3, 3);
  fs.drift = Eigen::Vector3d::Zero();
  Obstacle ob;
  ob.offset = Eigen::Vector3d::Zero();
  const std::vector<FrameState> frames{fs};
  const std::vector<Obstacle> obstacles{ob};
  const auto ctx = make_context(frames, obstacles, 0.0, td);

  SafetyConfig cfg = default_config();
  cfg.penalty_weight = 0.0;
  const Eigen::VectorXd F = Eigen::Vector3d(-5.0, 1.0, 0.0);
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
  const auto plain = ecbf_filter(F, ctx, cfg, false);
  const auto adaptive = aecbf_filter(F, ctx, s, model, q, q, cfg, false);
  CHECK((plain.u_act - adaptive.u_act).norm() < 1e-8);
}

TEST_CASE("aecbf: near-linear surrogate matches the quadratic oracle") {
  // A surrogate whose end-to-end map is linear to ~1e-9 (tiny pre-activation
  // scale, inverted by the output normalization): Gauss-Newton must land on
  // the closed-form minimizer of the resulting quadratic objective.
  const auto model =
      ManipulatorModel::load(oracles::model_path("spatial_three_link.json"));
  Eigen::VectorXd q(3), qd(3);
  q << 0.4, -0.6, 0.8;
  qd << 0.0, 0.0, 0.0;

  MlpSurrogate s;
  s.dof = 3;
  s.task_dim = 3;
  const int D = s.feature_dim(), O = s.output_dim();
  const double eps = 1e-5;
  s.net.W1 = eps * Eigen::MatrixXd::Identity(D, D);  // hidden = D
  s.net.b1 = Eigen::VectorXd::Zero(D);
  Eigen::MatrixXd Wout = Eigen::MatrixXd::Zero(O, D);
  Rng rng(111);
  for (int r = 0; r < O; ++r)
    for (int c = 0; c < D; ++c) Wout(r, c) = rng.uniform(-0.2, 0.2);
  s.net.W2 = Wout / eps;
  s.net.b2 = Eigen::VectorXd::Zero(O);
  s.in_norm.mean = Eigen::VectorXd::Zero(D);
  s.in_norm.std = Eigen::VectorXd::Ones(D);
  s.out_norm.mean = Eigen::VectorXd::Zero(O);
  s.out_norm.std = Eigen::VectorXd::Ones(O);

  const JointDynamics jd = joint_space_dynamics(model, q, qd);
  auto frames = build_frame_states(model, jd, q, qd, Eigen::VectorXd::Zero(3), {3});
  frames[0].x = Eigen::Vector3d(0.3, 0.0, 0.0);  // place near one obstacle
  frames[0].xd.setZero();
  frames[0].drift.setZero();  // keep the barrier rows slack at the optimum
  Obstacle ob;
  ob.offset = Eigen::Vector3d::Zero();
  const std::vector<Obstacle> obstacles{ob};
  const TaskDynamics td = identity_task_dynamics(3);
  const auto ctx = make_context(frames, obstacles, 0.0, td);

  SafetyConfig cfg = default_config();
  cfg.trigger_margin = 10.0;      // engage regardless of distance
  cfg.input_bounds.setConstant(1e6);  // keep box rows slack
  cfg.penalty_weight = 1.0;

  const Eigen::VectorXd F = Eigen::Vector3d(2.0, -1.0, 0.5);
  const auto dec = aecbf_filter(F, ctx, s, model, q, qd, cfg, false);

  // Closed form: minimize ||F-u||^2 + ||S u + a - target||^2.
  const Eigen::MatrixXd Sfull = surrogate_jacobian_wrt_input(s, model,
                                                             Eigen::VectorXd::Zero(3),
                                                             q, qd);
  const Eigen::MatrixXd S = Sfull.middleRows((3 - 1) * 3, 3);
  const Eigen::VectorXd pred0 = surrogate_forward(
      s, model, Eigen::VectorXd::Zero(3), q, qd);
  const Eigen::Vector3d a = pred0.segment((3 - 1) * 3, 3);
  const Eigen::Vector3d target =
      ob.offset + cfg.d_safe(ob.radius) * Eigen::Vector3d::Ones();
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(3, 3) + S.transpose() * S;
  const Eigen::VectorXd u_star = H.ldlt().solve(F + S.transpose() * (target - a));
  CHECK((dec.u_act - u_star).norm() < 1e-5);
  CHECK(dec.converged);
}

TEST_CASE("torque map: zeros, isometry, and power consistency") {
  CHECK(torque_map(Eigen::MatrixXd::Random(3, 7), Eigen::VectorXd::Zero(3)).norm() ==
        0.0);

  // Orthonormal rows preserve the norm.
  Eigen::MatrixXd J(2, 3);
  J << 1, 0, 0, 0, 1, 0;
  Eigen::VectorXd u(2);
  u << 3.0, -4.0;
  CHECK(torque_map(J, u).norm() == doctest::Approx(5.0));

  // qd' tau = xd' u through the jacobian identity.
  const auto model =
      ManipulatorModel::load(oracles::model_path("seven_dof.json"));
  Rng rng(117);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(7), qd(7), uu(3);
    for (int i = 0; i < 7; ++i) {
      q[i] = rng.uniform(-1.5, 1.5);
      qd[i] = rng.uniform(-1, 1);
    }
    for (int i = 0; i < 3; ++i) uu[i] = rng.uniform(-10, 10);
    const Eigen::MatrixXd Jee = jacobian(model, q, 7);
    const Eigen::VectorXd tau = torque_map(Jee, uu);
    CHECK(qd.dot(tau) ==
          doctest::Approx((Jee * qd).dot(uu)).epsilon(1e-10));
  }
}
