#pragma once

#include "chirality/linear.hpp"

namespace chirality {

/// LSTM cell whose input/output/forget gates use negation-invariant sharing
/// (swap-covariant only) while the cell-candidate path is fully equivariant.
/// Gating a fully equivariant value with a fully equivariant gate would break
/// equivariance; `naive_gates` builds exactly that construction, kept for
/// negative-control tests.
struct ChiralLSTM {
  JointLayout in_layout;
  JointLayout hidden_layout;
  bool naive_gates = false;
  ChiralLinear ii, hi, io, ho, iff, hf;  // gates
  ChiralLinear ig, hg;                   // cell candidate

  static ChiralLSTM create(JointLayout in, JointLayout hidden, bool naive_gates = false);
  void init_uniform(std::mt19937_64& rng);  // forget-gate bias set to +1

  struct StepOut {
    Eigen::MatrixXd h, c;
    Eigen::MatrixXd gate_i, gate_o, gate_f, cand;
  };
  StepOut step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev,
               const Eigen::MatrixXd& c_prev) const;
  /// Returns per-frame hidden states; h0/c0 empty means zeros.
  std::vector<Eigen::MatrixXd> unroll(const std::vector<Eigen::MatrixXd>& frames,
                                      Eigen::MatrixXd h0 = {}, Eigen::MatrixXd c0 = {}) const;

  struct Bound {
    BoundAffine ii, hi, io, ho, iff, hf, ig, hg;
  };
  Bound bind(Tape& tape, bool requires_grad = true) const;
  std::pair<Var, Var> step(Tape& tape, const Bound& bound, Var x, Var h_prev, Var c_prev) const;

  std::vector<Tensor*> params();
};

/// GRU cell with the same reduced gate sharing; update/reset gates are
/// negation-invariant, the candidate state fully equivariant.
struct ChiralGRU {
  JointLayout in_layout;
  JointLayout hidden_layout;
  ChiralLinear iz, hz, ir, hr;  // update / reset gates
  ChiralLinear in_, hn;         // candidate

  static ChiralGRU create(JointLayout in, JointLayout hidden);
  void init_uniform(std::mt19937_64& rng);

  struct StepOut {
    Eigen::MatrixXd h;
    Eigen::MatrixXd gate_z, gate_r, cand;
  };
  StepOut step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev) const;

  struct Bound {
    BoundAffine iz, hz, ir, hr, in_, hn;
  };
  Bound bind(Tape& tape, bool requires_grad = true) const;
  Var step(Tape& tape, const Bound& bound, Var x, Var h_prev) const;

  std::vector<Tensor*> params();
};

}  // namespace chirality
