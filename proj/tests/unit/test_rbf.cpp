#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "safectrl/rbf.hpp"
#include "safectrl/rng.hpp"

using namespace safectrl;

namespace {
RbfEstimator small_estimator(std::uint64_t seed = 5) {
  std::vector<std::pair<double, double>> ranges(5, {-3.0, 3.0});
  return RbfEstimator::make(11, 3, ranges, 0.4, 50.0, seed);
}
}  // namespace

TEST_CASE("basis is 1 at the center and decays monotonically") {
  auto est = small_estimator();
  const Eigen::VectorXd c0 = est.centers.row(0).transpose();
  const Eigen::VectorXd s = est.basis(c0);
  CHECK(s[0] == doctest::Approx(1.0));
  CHECK((s.array() > 0.0).all());
  CHECK((s.array() <= 1.0).all());

  // e^-1 at one width of distance.
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(5);
  dir[0] = 1.0;
  const Eigen::VectorXd at_width = est.basis(c0 + est.width * dir);
  CHECK(at_width[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  double prev = 1.0;
  for (double r = 0.5; r < 20.0; r += 0.5) {
    const double v = est.basis(c0 + r * dir)[0];
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("estimate: zero weights and single-node identity") {
  auto est = small_estimator();
  est.W_hat.setZero();
  const Eigen::VectorXd chi = Eigen::VectorXd::Zero(5);
  CHECK(est.estimate(chi).norm() == 0.0);

  std::vector<std::pair<double, double>> ranges(5, {-1.0, 1.0});
  RbfEstimator one = RbfEstimator::make(1, 3, ranges, 0.4, 50.0, 7);
  one.W_hat.setZero();
  one.W_hat(0, 0) = 1.0;
  const Eigen::VectorXd d = one.estimate(one.centers.row(0).transpose());
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d[1] == doctest::Approx(0.0));
  CHECK(d[2] == doctest::Approx(0.0));
}

TEST_CASE("adaptation: leak-only decay when z2 = 0") {
  auto est = small_estimator();
  const Eigen::MatrixXd W0 = est.W_hat;
  const double dt = 0.01;
  est.adapt(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(3), dt);
  CHECK((est.W_hat - (1.0 - est.rho * dt) * W0).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("adaptation: pure outer-product step when rho = 0") {
  auto est = small_estimator();
  est.rho = 0.0;
  est.gain = 2.5;
  const Eigen::MatrixXd W0 = est.W_hat;
  Eigen::VectorXd chi(5), z2(3);
  chi << 0.2, -0.4, 1.0, 0.0, 0.5;
  z2 << 1.0, -2.0, 0.5;
  const Eigen::VectorXd s = est.basis(chi);
  est.adapt(chi, z2, 0.01);
  CHECK((est.W_hat - W0 + 0.01 * 2.5 * s * z2.transpose())
            .cwiseAbs()
            .maxCoeff() < 1e-15);
}

TEST_CASE("weights stay inside the clamp over long random adaptation") {
  auto est = small_estimator(9);
  est.w_bound = 0.5;  // tight bound so the clamp actually engages
  Rng rng(51);
  for (int step = 0; step < 10000; ++step) {
    Eigen::VectorXd chi(5), z2(3);
    for (int i = 0; i < 5; ++i) chi[i] = rng.uniform(-3, 3);
    for (int i = 0; i < 3; ++i) z2[i] = rng.uniform(-20, 20);
    est.adapt(chi, z2, 0.01);
    CHECK(est.W_hat.cwiseAbs().maxCoeff() <= est.w_bound + 1e-15);
  }
}

TEST_CASE("clamp projection is idempotent and contractive") {
  auto est = small_estimator();
  est.w_bound = 0.2;
  est.W_hat.setConstant(5.0);
  est.adapt(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(3), 1e-9);
  const Eigen::MatrixXd once = est.W_hat;
  CHECK(once.cwiseAbs().maxCoeff() <= 0.2 + 1e-15);
  est.adapt(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(3), 1e-9);
  CHECK((est.W_hat - once).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("estimate norm bound") {
  auto est = small_estimator();
  Rng rng(53);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd chi(5);
    for (int i = 0; i < 5; ++i) chi[i] = rng.uniform(-4, 4);
    const double bound = est.W_hat.norm() * std::sqrt(double(est.nodes()));
    CHECK(est.estimate(chi).norm() <= bound + 1e-12);
  }
}

TEST_CASE("ideal-weight fit: recovery of an exactly representable target") {
  auto est = small_estimator(13);
  Eigen::MatrixXd W_true(est.nodes(), 3);
  Rng rng(55);
  for (int r = 0; r < W_true.rows(); ++r)
    for (int c = 0; c < 3; ++c) W_true(r, c) = rng.uniform(-1, 1);

  const int N = 400;
  Eigen::MatrixXd inputs(N, 5), targets(N, 3);
  for (int s = 0; s < N; ++s) {
    Eigen::VectorXd chi(5);
    for (int i = 0; i < 5; ++i) chi[i] = rng.uniform(-3, 3);
    inputs.row(s) = chi.transpose();
    targets.row(s) = (W_true.transpose() * est.basis(chi)).transpose();
  }
  double max_res = 0.0;
  const Eigen::MatrixXd W_fit = fit_ideal_weights(est, inputs, targets, &max_res);
  CHECK(max_res < 1e-6);

  // With the fitted weights installed, the worst error over the grid is the
  // reported residual.
  est.W_hat = W_fit;
  double worst = 0.0;
  for (int s = 0; s < N; ++s) {
    const Eigen::VectorXd err =
        est.estimate(inputs.row(s).transpose()) - targets.row(s).transpose();
    worst = std::max(worst, err.norm());
  }
  CHECK(worst <= max_res + 1e-12);
}
