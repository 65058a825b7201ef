#pragma once

#include <random>

#include "chirality/blocks.hpp"

namespace chirality {

/// Free blocks of an affine layer materialized on a tape.
struct BoundAffine {
  std::vector<Var> wvars;
  std::vector<Var> bvars;
  Var weight_t;  // [N_in, N_out], transposed for batched right-multiplication
  Var bias;      // [N_out]
};

/// Equivariant affine map with left/right shared free blocks. With
/// `gate_output` the output sharing is negation-invariant (swap-covariant
/// only), the reduced scheme used by recurrent gates. An output layout with
/// no left/right joints and no negated dims yields an invariance head.
struct ChiralLinear {
  JointLayout in_layout;
  JointLayout out_layout;
  bool gate_output = false;
  BlockPattern wpat;
  BlockPattern bpat;
  std::vector<Tensor> wblocks;
  std::vector<Tensor> bblocks;

  static ChiralLinear create(JointLayout in, JointLayout out, bool gate_output = false);
  /// Requires empty left/right joint tuples and empty negated set on `out`.
  static ChiralLinear invariance_head(JointLayout in, JointLayout out);

  // uniform(-1/sqrt(N_in), 1/sqrt(N_in)) on every free entry; full fan-in
  void init_uniform(std::mt19937_64& rng);

  Tensor materialize_weight() const { return assemble(wpat, wblocks); }
  Tensor materialize_bias() const { return assemble(bpat, bblocks); }

  long n_in() const { return wpat.n_in; }
  long n_out() const { return wpat.n_out; }
  long free_weight_count() const { return wpat.free_param_count(); }
  long free_bias_count() const { return bpat.free_param_count(); }
  long naive_mult_count() const { return wpat.n_out * wpat.n_in; }

  /// y = x W^T + b over batch rows.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  /// Same map computed via paired sums/differences of mirrored coordinates;
  /// fewer scalar multiplications. mult_count is per sample.
  Eigen::MatrixXd symmetric_forward(const Eigen::MatrixXd& x, long* mult_count = nullptr) const;
  long symmetric_mult_count() const;

  BoundAffine bind(Tape& tape, bool requires_grad = true) const;
  Var forward(Tape& tape, const BoundAffine& bound, Var x) const;

  std::vector<Tensor*> params();
};

}  // namespace chirality
