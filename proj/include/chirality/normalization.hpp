#pragma once

#include "chirality/blocks.hpp"
#include "chirality/linear.hpp"

namespace chirality {

/// Batch normalization with swap-symmetric gamma, odd-symmetric beta, and
/// batch statistics taken over the batch augmented with its mirrored copies.
/// The augmented moments are accumulated directly; the doubled batch is never
/// materialized.
struct ChiralBatchNorm {
  JointLayout layout;
  ChiralityTransform transform;
  BlockPattern gpat;  // gamma
  BlockPattern bpat;  // beta
  std::vector<Tensor> gblocks;
  std::vector<Tensor> bblocks;
  Tensor running_mean;  // [N]
  Tensor running_var;   // [N]
  double momentum = 0.1;
  double epsilon = 1e-5;

  static ChiralBatchNorm create(JointLayout layout, double momentum = 0.1,
                                double epsilon = 1e-5);

  Tensor materialize_gamma() const { return assemble(gpat, gblocks); }
  Tensor materialize_beta() const { return assemble(bpat, bblocks); }

  /// Augmented-batch mean and variance of x (rows are samples).
  void batch_stats(const Eigen::MatrixXd& x, Eigen::RowVectorXd* mean,
                   Eigen::RowVectorXd* var) const;

  Eigen::MatrixXd forward_train(const Eigen::MatrixXd& x);  // updates running stats
  Eigen::MatrixXd forward_eval(const Eigen::MatrixXd& x) const;

  struct Bound {
    std::vector<Var> gvars, bvars;
    Var gamma, beta;
  };
  Bound bind(Tape& tape, bool requires_grad = true) const;
  Var forward_train(Tape& tape, const Bound& bound, Var x, bool update_running = true);
  Var forward_eval(Tape& tape, const Bound& bound, Var x) const;

  std::vector<Tensor*> params();
};

}  // namespace chirality
