#include "safectrl/train.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "safectrl/errors.hpp"
#include "safectrl/rng.hpp"

namespace safectrl {

namespace {

// Parameter layout: [W1 with bias column, input-major (i, h)] then
// [W2 with bias column, hidden-major (h2, o)].
int param_count(int D, int H, int O) { return (D + 1) * H + (H + 1) * O; }

void unpack(const Eigen::VectorXd& theta, int D, int H, int O, Mlp* net) {
  net->W1.resize(H, D);
  net->b1.resize(H);
  net->W2.resize(O, H);
  net->b2.resize(O);
  for (int i = 0; i < D; ++i)
    for (int h = 0; h < H; ++h) net->W1(h, i) = theta[i * H + h];
  for (int h = 0; h < H; ++h) net->b1[h] = theta[D * H + h];
  const int p1 = (D + 1) * H;
  for (int h2 = 0; h2 < H; ++h2)
    for (int o = 0; o < O; ++o) net->W2(o, h2) = theta[p1 + h2 * O + o];
  for (int o = 0; o < O; ++o) net->b2[o] = theta[p1 + H * O + o];
}

Eigen::VectorXd pack(const Mlp& net) {
  const int D = net.input_dim(), H = net.hidden_dim(), O = net.output_dim();
  Eigen::VectorXd theta(param_count(D, H, O));
  for (int i = 0; i < D; ++i)
    for (int h = 0; h < H; ++h) theta[i * H + h] = net.W1(h, i);
  for (int h = 0; h < H; ++h) theta[D * H + h] = net.b1[h];
  const int p1 = (D + 1) * H;
  for (int h2 = 0; h2 < H; ++h2)
    for (int o = 0; o < O; ++o) theta[p1 + h2 * O + o] = net.W2(o, h2);
  for (int o = 0; o < O; ++o) theta[p1 + H * O + o] = net.b2[o];
  return theta;
}

double sum_squared_error(const Mlp& net, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y) {
  const Eigen::MatrixXd A = ((X * net.W1.transpose()).rowwise() +
                             net.b1.transpose()).array().tanh();
  const Eigen::MatrixXd R =
      (A * net.W2.transpose()).rowwise() + net.b2.transpose() - Y;
  return R.squaredNorm();
}

}  // namespace

void lm_normal_equations(const Mlp& net, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y, Eigen::MatrixXd* JtJ,
                         Eigen::VectorXd* JtR, double* sse, bool structured) {
  const int N = static_cast<int>(X.rows());
  const int D = net.input_dim(), H = net.hidden_dim(), O = net.output_dim();
  const int p1 = (D + 1) * H, p2 = (H + 1) * O, p = p1 + p2;

  // Shared per-sample quantities.
  const Eigen::MatrixXd Z =
      (X * net.W1.transpose()).rowwise() + net.b1.transpose();
  const Eigen::MatrixXd A = Z.array().tanh();
  const Eigen::MatrixXd U = 1.0 - A.array().square();
  const Eigen::MatrixXd R =
      (A * net.W2.transpose()).rowwise() + net.b2.transpose() - Y;
  if (sse != nullptr) *sse = R.squaredNorm();

  if (!structured) {
    Eigen::MatrixXd J(N * O, p);
    J.setZero();
    for (int s = 0; s < N; ++s) {
      for (int o = 0; o < O; ++o) {
        const int row = s * O + o;
        for (int i = 0; i <= D; ++i) {
          const double xi = i < D ? X(s, i) : 1.0;
          for (int h = 0; h < H; ++h)
            J(row, i * H + h) = net.W2(o, h) * U(s, h) * xi;
        }
        for (int h2 = 0; h2 <= H; ++h2) {
          const double ah = h2 < H ? A(s, h2) : 1.0;
          J(row, p1 + h2 * O + o) = ah;
        }
      }
    }
    Eigen::VectorXd rflat(N * O);
    for (int s = 0; s < N; ++s)
      for (int o = 0; o < O; ++o) rflat[s * O + o] = R(s, o);
    *JtJ = J.transpose() * J;
    *JtR = J.transpose() * rflat;
    return;
  }

  // Structured accumulation: the Jacobian rows factor as Kronecker products,
  // so every block of J'J reduces to a GEMM followed by an elementwise mask.
  Eigen::MatrixXd Xa(N, D + 1), Ua(N, H + 1);
  Xa.leftCols(D) = X;
  Xa.col(D).setOnes();
  Ua.leftCols(H) = A;
  Ua.col(H).setOnes();

  // V rows: xa kron u per sample, (i, h) ordering.
  Eigen::MatrixXd V(N, p1);
  for (int i = 0; i <= D; ++i)
    V.middleCols(i * H, H) = Xa.col(i).asDiagonal() * U;

  const Eigen::MatrixXd S = net.W2.transpose() * net.W2;  // H x H
  const Eigen::MatrixXd Q = V.transpose() * V;            // p1 x p1
  const Eigen::MatrixXd T = V.transpose() * Ua;           // p1 x (H+1)
  const Eigen::MatrixXd A2 = Ua.transpose() * Ua;         // (H+1) x (H+1)

  JtJ->resize(p, p);
  JtJ->setZero();
  // (W1, W1): Q masked by W2'W2 over the hidden indices.
  for (int i = 0; i <= D; ++i)
    for (int i2 = 0; i2 <= D; ++i2)
      JtJ->block(i * H, i2 * H, H, H) =
          Q.block(i * H, i2 * H, H, H).cwiseProduct(S);
  // (W2, W2): A2 expanded over the output index.
  for (int h2 = 0; h2 <= H; ++h2)
    for (int h2b = 0; h2b <= H; ++h2b)
      JtJ->block(p1 + h2 * O, p1 + h2b * O, O, O) =
          A2(h2, h2b) * Eigen::MatrixXd::Identity(O, O);
  // (W1, W2): T expanded by the output weights.
  for (int ih = 0; ih < p1; ++ih) {
    const int h = ih % H;
    for (int h2 = 0; h2 <= H; ++h2) {
      const double t = T(ih, h2);
      for (int o = 0; o < O; ++o) {
        const double val = net.W2(o, h) * t;
        (*JtJ)(ih, p1 + h2 * O + o) = val;
        (*JtJ)(p1 + h2 * O + o, ih) = val;
      }
    }
  }

  JtR->resize(p);
  const Eigen::MatrixXd G = (R * net.W2).cwiseProduct(U);  // N x H
  const Eigen::MatrixXd JtR1 = Xa.transpose() * G;         // (D+1) x H
  for (int i = 0; i <= D; ++i)
    for (int h = 0; h < H; ++h) (*JtR)[i * H + h] = JtR1(i, h);
  const Eigen::MatrixXd JtR2 = Ua.transpose() * R;  // (H+1) x O
  for (int h2 = 0; h2 <= H; ++h2)
    for (int o = 0; o < O; ++o) (*JtR)[p1 + h2 * O + o] = JtR2(h2, o);
}

MlpSurrogate train_mlp(const TrainingCorpus& corpus, const ManipulatorModel& model,
                       const TrainOptions& options, TrainReport* report) {
  if (corpus.size() == 0) throw ContractViolation("training corpus is empty");
  if (options.hidden < 1) throw ContractViolation("hidden size must be >= 1");
  if (!(options.held_fraction > 0.0 && options.held_fraction <= 0.5))
    throw ContractViolation("held fraction must be in (0, 0.5]");

  const auto split = corpus.split(options.held_fraction, options.seed);
  const TrainingCorpus& tr = split.train;
  const TrainingCorpus& ho = split.heldout;

  const int n = model.task_dim, m = model.dof;
  const int D = n * m + 2 * m, O = n * m, H = options.hidden;

  auto featurize = [&](const TrainingCorpus& c) {
    Eigen::MatrixXd F(c.size(), D);
    for (int s = 0; s < c.size(); ++s)
      F.row(s) = surrogate_features(model, c.U.row(s).transpose(),
                                    c.Q.row(s).transpose(),
                                    c.Qd.row(s).transpose())
                     .transpose();
    return F;
  };
  const Eigen::MatrixXd Ftr = featurize(tr);
  const Eigen::MatrixXd Fho = featurize(ho);

  MlpSurrogate s;
  s.dof = m;
  s.task_dim = n;
  s.in_norm.mean = Ftr.colwise().mean().transpose();
  s.in_norm.std =
      ((Ftr.rowwise() - Ftr.colwise().mean()).array().square().colwise().sum() /
       std::max(1, tr.size() - 1))
          .sqrt()
          .transpose()
          .matrix()
          .cwiseMax(1e-9);
  s.out_norm.mean = tr.X.colwise().mean().transpose();
  s.out_norm.std =
      ((tr.X.rowwise() - tr.X.colwise().mean()).array().square().colwise().sum() /
       std::max(1, tr.size() - 1))
          .sqrt()
          .transpose()
          .matrix()
          .cwiseMax(1e-9);

  auto normalize_in = [&](const Eigen::MatrixXd& F) {
    return ((F.rowwise() - s.in_norm.mean.transpose()).array().rowwise() /
            s.in_norm.std.transpose().array())
        .matrix();
  };
  auto normalize_out = [&](const Eigen::MatrixXd& X) {
    return ((X.rowwise() - s.out_norm.mean.transpose()).array().rowwise() /
            s.out_norm.std.transpose().array())
        .matrix();
  };
  const Eigen::MatrixXd Xtr = normalize_in(Ftr), Ytr = normalize_out(tr.X);
  const Eigen::MatrixXd Xho = normalize_in(Fho), Yho = normalize_out(ho.X);

  // Physical-unit AMSE (m^2 per output coordinate).
  auto amse = [&](const Mlp& net, const Eigen::MatrixXd& X,
                  const Eigen::MatrixXd& Y) {
    const Eigen::MatrixXd A = ((X * net.W1.transpose()).rowwise() +
                               net.b1.transpose()).array().tanh();
    const Eigen::MatrixXd Rn =
        (A * net.W2.transpose()).rowwise() + net.b2.transpose() - Y;
    const Eigen::MatrixXd Rp =
        Rn.array().rowwise() * s.out_norm.std.transpose().array();
    return Rp.squaredNorm() / (Rp.rows() * Rp.cols());
  };

  Mlp net;
  Rng rng = Rng(options.seed).fork(0x6d6c70ULL);  // mlp-init stream
  net.W1.resize(H, D);
  net.b1 = Eigen::VectorXd::Zero(H);
  net.W2.resize(O, H);
  net.b2 = Eigen::VectorXd::Zero(O);
  const double w1_scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (int h = 0; h < H; ++h)
    for (int i = 0; i < D; ++i) net.W1(h, i) = rng.uniform(-1.0, 1.0) * w1_scale;
  {
    // Ridge least-squares start for the output layer given the random hidden
    // layer; this skips the long flat valley LM would otherwise crawl down.
    const Eigen::MatrixXd A = ((Xtr * net.W1.transpose()).rowwise() +
                               net.b1.transpose()).array().tanh();
    Eigen::MatrixXd Aa(A.rows(), H + 1);
    Aa.leftCols(H) = A;
    Aa.col(H).setOnes();
    const Eigen::MatrixXd G =
        Aa.transpose() * Aa + 1e-8 * Eigen::MatrixXd::Identity(H + 1, H + 1);
    const Eigen::MatrixXd W = G.ldlt().solve(Aa.transpose() * Ytr);
    net.W2 = W.topRows(H).transpose();
    net.b2 = W.row(H).transpose();
  }

  TrainReport rep;
  double lambda = options.lambda0;
  double sse = sum_squared_error(net, Xtr, Ytr);
  if (!std::isfinite(sse))
    throw TrainingFailure("initial loss is non-finite");
  rep.accepted_losses.push_back(sse);

  Mlp best = net;
  double best_ho = amse(net, Xho, Yho);

  Eigen::MatrixXd JtJ;
  Eigen::VectorXd JtR;
  const int p = param_count(D, H, O);
  const bool structured = static_cast<long>(p) * tr.size() * O > 2'000'000L;

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    lm_normal_equations(net, Xtr, Ytr, &JtJ, &JtR, nullptr, structured);
    if (JtR.cwiseAbs().maxCoeff() < options.grad_tol) {
      rep.hit_grad_tol = true;
      break;
    }
    const Eigen::VectorXd damp = JtJ.diagonal().cwiseMax(1e-12);
    const Eigen::VectorXd theta = pack(net);

    bool accepted = false;
    for (int tries = 0; tries < 25 && !accepted; ++tries) {
      Eigen::MatrixXd Hm = JtJ;
      Hm.diagonal() += lambda * damp;
      const Eigen::VectorXd delta = Hm.ldlt().solve(-JtR);
      Mlp cand;
      unpack(theta + delta, D, H, O, &cand);
      const double cand_sse = sum_squared_error(cand, Xtr, Ytr);
      if (!std::isfinite(cand_sse))
        throw TrainingFailure("loss became non-finite at epoch " +
                              std::to_string(epoch));
      if (cand_sse <= sse) {
        net = cand;
        sse = cand_sse;
        lambda = std::max(lambda / 10.0, 1e-14);
        accepted = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e14) break;
      }
    }
    if (!accepted) break;  // damping exhausted; current point is the optimum
    rep.accepted_losses.push_back(sse);
    rep.epochs_run = epoch + 1;

    const double ho_err = amse(net, Xho, Yho);
    if (ho_err < best_ho) {
      best_ho = ho_err;
      best = net;
    }
  }

  s.net = best;
  rep.heldout_amse = best_ho;
  rep.train_amse = amse(best, Xtr, Ytr);
  if (report != nullptr) *report = rep;
  return s;
}

}  // namespace safectrl
