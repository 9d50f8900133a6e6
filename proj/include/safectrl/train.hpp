#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "safectrl/corpus.hpp"
#include "safectrl/mlp.hpp"

namespace safectrl {

struct TrainOptions {
  int hidden = 64;
  int epochs = 200;            // accepted Levenberg-Marquardt steps
  double held_fraction = 0.25;
  double lambda0 = 1e-3;
  double grad_tol = 1e-10;
  std::uint64_t seed = 1;
};

struct TrainReport {
  double train_amse = 0.0;    // m^2, per output coordinate
  double heldout_amse = 0.0;
  std::vector<double> accepted_losses;  // normalized-space SSE, non-increasing
  int epochs_run = 0;
  bool hit_grad_tol = false;
};

// Levenberg-Marquardt fit of the surrogate on the corpus. Damping multiplies
// by 10 on reject and divides by 10 on accept; the returned model is the
// best held-out-error snapshot. Throws TrainingFailure on non-finite loss.
MlpSurrogate train_mlp(const TrainingCorpus& corpus, const ManipulatorModel& model,
                       const TrainOptions& options, TrainReport* report = nullptr);

// Normal-equation blocks for the current parameters; exposed so the
// structured accumulation can be cross-checked against a dense Jacobian.
void lm_normal_equations(const Mlp& net, const Eigen::MatrixXd& inputs,
                         const Eigen::MatrixXd& targets, Eigen::MatrixXd* JtJ,
                         Eigen::VectorXd* JtR, double* sse, bool structured);

}  // namespace safectrl
