#pragma once

#include "chirality/linear.hpp"

namespace chirality {

/// Dilated 1-D convolution over a sequence of frames; each tap is an
/// equivariant affine map sharing the fully connected scatter pattern, and
/// the bias is shared across taps and time.
struct ChiralConv1D {
  JointLayout in_layout;
  JointLayout out_layout;
  int kernel_size = 1;
  int dilation = 1;
  int stride = 1;
  BlockPattern wpat;
  BlockPattern bpat;
  std::vector<std::vector<Tensor>> tap_wblocks;  // kernel_size entries
  std::vector<Tensor> bblocks;

  static ChiralConv1D create(JointLayout in, JointLayout out, int kernel_size,
                             int dilation = 1, int stride = 1);
  void init_uniform(std::mt19937_64& rng);

  int receptive_field() const { return (kernel_size - 1) * dilation + 1; }
  long out_frames(long in_frames) const;

  Tensor materialize_tap(int tap) const { return assemble(wpat, tap_wblocks[tap]); }
  Tensor materialize_bias() const { return assemble(bpat, bblocks); }

  /// frames[t] is a [batch, N_in] matrix.
  std::vector<Eigen::MatrixXd> forward(const std::vector<Eigen::MatrixXd>& frames) const;

  struct Bound {
    std::vector<std::vector<Var>> tap_wvars;
    std::vector<Var> bvars;
    std::vector<Var> tap_weight_t;  // [N_in, N_out] each
    Var bias;
  };
  Bound bind(Tape& tape, bool requires_grad = true) const;
  std::vector<Var> forward(Tape& tape, const Bound& bound, const std::vector<Var>& frames) const;

  std::vector<Tensor*> params();
  long free_weight_count() const { return kernel_size * wpat.free_param_count(); }
};

}  // namespace chirality
