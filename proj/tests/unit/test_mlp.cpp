#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>

#include "oracles.hpp"
#include "safectrl/corpus.hpp"
#include "safectrl/mlp.hpp"
#include "safectrl/rng.hpp"
#include "safectrl/train.hpp"

using namespace safectrl;

namespace {

Mlp random_net(int in, int hidden, int out, std::uint64_t seed) {
  Mlp net;
  Rng rng(seed);
  net.W1.resize(hidden, in);
  net.b1.resize(hidden);
  net.W2.resize(out, hidden);
  net.b2.resize(out);
  for (int h = 0; h < hidden; ++h) {
    for (int i = 0; i < in; ++i) net.W1(h, i) = rng.uniform(-0.8, 0.8);
    net.b1[h] = rng.uniform(-0.3, 0.3);
  }
  for (int o = 0; o < out; ++o) {
    for (int h = 0; h < hidden; ++h) net.W2(o, h) = rng.uniform(-0.8, 0.8);
    net.b2[o] = rng.uniform(-0.3, 0.3);
  }
  return net;
}

}  // namespace

TEST_CASE("mlp jacobian matches finite differences") {
  const Mlp net = random_net(6, 9, 4, 71);
  Rng rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x[i] = rng.uniform(-1, 1);
    const Eigen::MatrixXd J = net.jacobian(x);
    const Eigen::MatrixXd Jfd = oracles::fd_jacobian(
        [&](const Eigen::VectorXd& v) { return net.forward(v); }, x, 1e-6);
    CHECK((J - Jfd).norm() / std::max(1.0, J.norm()) < 1e-8);
  }
}

TEST_CASE("zero hidden weights give a zero jacobian") {
  Mlp net = random_net(4, 5, 2, 75);
  net.W1.setZero();
  const Eigen::MatrixXd J = net.jacobian(Eigen::VectorXd::Random(4));
  CHECK(J.norm() == 0.0);
}

TEST_CASE("structured normal equations equal the dense-jacobian route") {
  const Mlp net = random_net(5, 7, 3, 77);
  Rng rng(79);
  const int N = 40;
  Eigen::MatrixXd X(N, 5), Y(N, 3);
  for (int s = 0; s < N; ++s) {
    for (int i = 0; i < 5; ++i) X(s, i) = rng.uniform(-1, 1);
    for (int i = 0; i < 3; ++i) Y(s, i) = rng.uniform(-1, 1);
  }
  Eigen::MatrixXd JtJ_s, JtJ_d;
  Eigen::VectorXd JtR_s, JtR_d;
  double sse_s = 0, sse_d = 0;
  lm_normal_equations(net, X, Y, &JtJ_s, &JtR_s, &sse_s, true);
  lm_normal_equations(net, X, Y, &JtJ_d, &JtR_d, &sse_d, false);
  CHECK(sse_s == doctest::Approx(sse_d).epsilon(1e-12));
  CHECK((JtJ_s - JtJ_d).cwiseAbs().maxCoeff() <
        1e-10 * std::max(1.0, JtJ_d.cwiseAbs().maxCoeff()));
  CHECK((JtR_s - JtR_d).cwiseAbs().maxCoeff() <
        1e-10 * std::max(1.0, JtR_d.cwiseAbs().maxCoeff()));
}

namespace {

// Tiny synthetic corpus generated by a known linear map on a 2-dof planar
// model: targets are exactly linear in (u, q, qd) features.
TrainingCorpus linear_corpus(const ManipulatorModel& model, int N,
                             std::uint64_t seed) {
  const int n = model.task_dim, m = model.dof;
  Rng rng(seed);
  Eigen::MatrixXd map(n * m, n * m + 2 * m);
  for (int r = 0; r < map.rows(); ++r)
    for (int c = 0; c < map.cols(); ++c) map(r, c) = rng.uniform(-0.3, 0.3);

  TrainingCorpus corpus;
  corpus.dof = m;
  corpus.task_dim = n;
  corpus.t.resize(N);
  corpus.U.resize(N, n);
  corpus.Q.resize(N, m);
  corpus.Qd.resize(N, m);
  corpus.X.resize(N, n * m);
  for (int s = 0; s < N; ++s) {
    corpus.t[s] = 0.01 * s;
    Eigen::VectorXd u(n), q(m), qd(m);
    for (int i = 0; i < n; ++i) u[i] = rng.uniform(-5, 5);
    for (int i = 0; i < m; ++i) {
      q[i] = rng.uniform(-1, 1);
      qd[i] = rng.uniform(-1, 1);
    }
    corpus.U.row(s) = u.transpose();
    corpus.Q.row(s) = q.transpose();
    corpus.Qd.row(s) = qd.transpose();
    const Eigen::VectorXd feat = surrogate_features(model, u, q, qd);
    corpus.X.row(s) = (map * feat).transpose();
  }
  return corpus;
}

}  // namespace

TEST_CASE("levenberg-marquardt fits a linear synthetic corpus") {
  const auto model =
      ManipulatorModel::load(oracles::model_path("planar_two_link.json"));
  const TrainingCorpus corpus = linear_corpus(model, 260, 81);
  TrainOptions opt;
  opt.hidden = 4;
  opt.epochs = 2000;
  opt.seed = 81;
  TrainReport rep;
  const MlpSurrogate s = train_mlp(corpus, model, opt, &rep);
  CHECK(rep.heldout_amse < 1e-8);

  // Accepted-step losses are non-increasing by construction of the step rule.
  for (std::size_t i = 1; i < rep.accepted_losses.size(); ++i)
    CHECK(rep.accepted_losses[i] <= rep.accepted_losses[i - 1] + 1e-15);

  // Forward / jacobian-wrt-input consistency on the trained surrogate.
  Rng rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd u(2), q(2), qd(2);
    for (int i = 0; i < 2; ++i) {
      u[i] = rng.uniform(-3, 3);
      q[i] = rng.uniform(-1, 1);
      qd[i] = rng.uniform(-1, 1);
    }
    const Eigen::MatrixXd J = surrogate_jacobian_wrt_input(s, model, u, q, qd);
    const Eigen::MatrixXd Jfd = oracles::fd_jacobian(
        [&](const Eigen::VectorXd& uu) {
          return surrogate_forward(s, model, uu, q, qd);
        },
        u, 1e-5);
    CHECK((J - Jfd).norm() / std::max(1.0, J.norm()) < 1e-4);
  }
}

TEST_CASE("zero-weight surrogate returns the output normalization mean") {
  const auto model =
      ManipulatorModel::load(oracles::model_path("planar_two_link.json"));
  MlpSurrogate s;
  s.dof = 2;
  s.task_dim = 2;
  s.net.W1 = Eigen::MatrixXd::Zero(3, s.feature_dim());
  s.net.b1 = Eigen::VectorXd::Zero(3);
  s.net.W2 = Eigen::MatrixXd::Zero(s.output_dim(), 3);
  s.net.b2 = Eigen::VectorXd::Zero(s.output_dim());
  s.in_norm.mean = Eigen::VectorXd::Zero(s.feature_dim());
  s.in_norm.std = Eigen::VectorXd::Ones(s.feature_dim());
  s.out_norm.mean = Eigen::VectorXd::LinSpaced(s.output_dim(), 0.1, 0.4);
  s.out_norm.std = Eigen::VectorXd::Ones(s.output_dim());
  const Eigen::VectorXd out = surrogate_forward(
      s, model, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2),
      Eigen::VectorXd::Zero(2));
  CHECK((out - s.out_norm.mean).norm() < 1e-15);
}

TEST_CASE("surrogate save/load round trip") {
  const auto model =
      ManipulatorModel::load(oracles::model_path("planar_two_link.json"));
  const TrainingCorpus corpus = linear_corpus(model, 120, 91);
  TrainOptions opt;
  opt.hidden = 3;
  opt.epochs = 20;
  opt.seed = 91;
  const MlpSurrogate s = train_mlp(corpus, model, opt, nullptr);
  const std::string path = "mlp_roundtrip_test.json";
  s.save(path);
  const MlpSurrogate r = MlpSurrogate::load(path);
  Eigen::VectorXd u(2), q(2), qd(2);
  u << 1.0, -2.0;
  q << 0.3, -0.4;
  qd << 0.1, 0.2;
  CHECK((surrogate_forward(s, model, u, q, qd) -
         surrogate_forward(r, model, u, q, qd))
            .norm() < 1e-15);
  std::remove(path.c_str());
}

TEST_CASE("corpus csv round trip and split") {
  const auto model =
      ManipulatorModel::load(oracles::model_path("planar_two_link.json"));
  const TrainingCorpus corpus = linear_corpus(model, 50, 93);
  const std::string path = "corpus_roundtrip_test.csv";
  corpus.save_csv(path);
  const TrainingCorpus back = TrainingCorpus::load_csv(path, 2, 2);
  CHECK(back.size() == corpus.size());
  CHECK((back.X - corpus.X).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());

  const auto split = corpus.split(0.25, 7);
  CHECK(split.heldout.size() == 12);
  CHECK(split.train.size() == 38);
  // No record in both splits: timestamps are unique in this corpus.
  for (int i = 0; i < split.heldout.size(); ++i)
    for (int j = 0; j < split.train.size(); ++j)
      CHECK(split.heldout.t[i] != split.train.t[j]);
}
