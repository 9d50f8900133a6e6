#include <doctest.h>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "safectrl/errors.hpp"
#include "safectrl/kinematics.hpp"
#include "safectrl/model.hpp"
#include "safectrl/rng.hpp"

using namespace safectrl;

namespace {
ManipulatorModel planar() {
  return ManipulatorModel::load(oracles::model_path("planar_two_link.json"));
}
ManipulatorModel seven() {
  return ManipulatorModel::load(oracles::model_path("seven_dof.json"));
}
}  // namespace

TEST_CASE("forward kinematics: straight planar configuration") {
  const auto model = planar();
  Eigen::VectorXd q(2);
  q << 0.0, 0.0;
  const auto pos = forward_kinematics(model, q);
  REQUIRE(pos.size() == 3);
  CHECK(pos[2].x() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(pos[2].y() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("forward kinematics: quarter-turn planar configuration") {
  const auto model = planar();
  Eigen::VectorXd q(2);
  q << M_PI / 2.0, 0.0;
  const auto pos = forward_kinematics(model, q);
  CHECK(pos[2].x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pos[2].y() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("forward kinematics matches an independent transform chain") {
  const auto model = seven();
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(7);
    for (int i = 0; i < 7; ++i) q[i] = rng.uniform(-1.5, 1.5);
    const auto pos = forward_kinematics(model, q);
    for (int f = 1; f <= 7; ++f) {
      const Eigen::Vector3d ref = oracles::fk_homogeneous(model, q, f);
      CHECK((pos[f] - ref).norm() < 1e-10);
    }
  }
}

TEST_CASE("jacobian: analytic planar values") {
  const auto model = planar();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd J = jacobian(model, q, 2);
  REQUIRE(J.rows() == 2);
  REQUIRE(J.cols() == 2);
  CHECK(J(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(J(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(J(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(J(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("jacobian: single revolute joint, unit link") {
  ManipulatorModel model;
  model.dof = 1;
  model.task_dim = 2;
  model.dh = {{1.0, 0.0, 0.0, 0.0}};
  LinkInertia li;
  li.mass = 1.0;
  li.com = Eigen::Vector3d::Zero();
  li.inertia = 1e-9 * Eigen::Matrix3d::Identity();
  model.links = {li};
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd J = jacobian(model, q, 1);
  CHECK(J(0, 0) == doctest::Approx(0.0));
  CHECK(J(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("jacobian columns match finite differences of forward kinematics") {
  const auto model = seven();
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd q(7);
    for (int i = 0; i < 7; ++i) q[i] = rng.uniform(-1.8, 1.8);
    const int frame = 1 + static_cast<int>(rng.next_u64() % 7);
    const Eigen::MatrixXd J = jacobian(model, q, frame);
    const Eigen::MatrixXd Jfd = oracles::fd_jacobian(
        [&](const Eigen::VectorXd& qq) {
          return Eigen::VectorXd(
              forward_kinematics(model, qq)[frame].head(model.task_dim));
        },
        q);
    const double scale = std::max(1.0, J.norm());
    CHECK((J - Jfd).norm() / scale < 1e-5);
  }
}

TEST_CASE("jacobian_dot matches finite difference of jacobian along qd") {
  const auto model = seven();
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd q(7), qd(7);
    for (int i = 0; i < 7; ++i) {
      q[i] = rng.uniform(-1.5, 1.5);
      qd[i] = rng.uniform(-1.0, 1.0);
    }
    const Eigen::MatrixXd Jd = jacobian_dot(model, q, qd, 7);
    const double h = 1e-6;
    const Eigen::MatrixXd Jfd =
        (jacobian(model, q + h * qd, 7) - jacobian(model, q - h * qd, 7)) /
        (2.0 * h);
    CHECK((Jd - Jfd).norm() < 1e-6 * std::max(1.0, Jd.norm()));
  }
}

TEST_CASE("pseudo_inverse: identity padded with zero columns") {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, 5);
  J.leftCols(3) = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd Jp = pseudo_inverse(J);
  CHECK((Jp - J.transpose()).norm() < 1e-12);
}

TEST_CASE("pseudo_inverse: square invertible equals inverse") {
  Rng rng(17);
  Eigen::MatrixXd J(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) J(r, c) = rng.uniform(-1, 1);
  J += 3.0 * Eigen::MatrixXd::Identity(3, 3);
  CHECK((pseudo_inverse(J) - J.inverse()).norm() < 1e-10);
}

TEST_CASE("pseudo_inverse: Moore-Penrose residuals on random full-rank 3x7") {
  Rng rng(19);
  for (int trial = 0; trial < 25; ++trial) {
    Eigen::MatrixXd J(3, 7);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 7; ++c) J(r, c) = rng.uniform(-1, 1);
    const Eigen::MatrixXd Jp = pseudo_inverse(J);
    CHECK((J * Jp * J - J).norm() < 1e-8);
    CHECK((Jp * J * Jp - Jp).norm() < 1e-8);
    CHECK((J * Jp - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-8);
  }
}

TEST_CASE("pseudo_inverse: rank-deficient matrix is refused") {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(3, 7);
  J.row(0).setOnes();
  J.row(1) = 2.0 * J.row(0);
  J(2, 0) = 1.0;
  CHECK_THROWS_AS(pseudo_inverse(J), SingularJacobian);
  try {
    pseudo_inverse(J);
  } catch (const SingularJacobian& e) {
    CHECK(e.smallest_singular_value <= 1e-8);
  }
}

TEST_CASE("dimension mismatches are contract violations") {
  const auto model = planar();
  Eigen::VectorXd q(3);
  q.setZero();
  CHECK_THROWS_AS(forward_kinematics(model, q), ContractViolation);
  Eigen::VectorXd q2 = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(jacobian(model, q2, 0), ContractViolation);
  CHECK_THROWS_AS(jacobian(model, q2, 3), ContractViolation);
}

TEST_CASE("position IK reaches a reachable target") {
  const auto model = seven();
  Eigen::VectorXd q0(7);
  q0 << 0.3, 0.4, 0.2, -1.2, 0.1, 0.8, 0.0;
  Eigen::VectorXd target(3);
  target << -0.13, -0.4, 0.74;
  const Eigen::VectorXd q = inverse_kinematics_position(model, q0, target);
  const auto pos = forward_kinematics(model, q);
  CHECK((pos[7] - Eigen::Vector3d(target)).norm() < 1e-9);
}
