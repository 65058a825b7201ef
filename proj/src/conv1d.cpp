#include "chirality/conv1d.hpp"

namespace chirality {

ChiralConv1D ChiralConv1D::create(JointLayout in, JointLayout out, int kernel_size,
                                  int dilation, int stride) {
  if (kernel_size < 1 || dilation < 1 || stride < 1)
    throw ValidationError("conv1d: kernel_size, dilation and stride must be >= 1");
  ChiralConv1D c;
  c.in_layout = std::move(in);
  c.out_layout = std::move(out);
  c.kernel_size = kernel_size;
  c.dilation = dilation;
  c.stride = stride;
  const IndexGroups gin = index_groups(c.in_layout);
  const IndexGroups gout = index_groups(c.out_layout);
  c.wpat = weight_pattern(gout, gin);
  c.bpat = bias_pattern(gout);
  for (int t = 0; t < kernel_size; ++t) c.tap_wblocks.push_back(zero_blocks(c.wpat));
  c.bblocks = zero_blocks(c.bpat);
  return c;
}

void ChiralConv1D::init_uniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(wpat.n_in * kernel_size));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& tap : tap_wblocks)
    for (Tensor& b : tap)
      for (double& v : b.data) v = dist(rng);
  for (Tensor& b : bblocks)
    for (double& v : b.data) v = dist(rng);
}

long ChiralConv1D::out_frames(long in_frames) const {
  if (in_frames < receptive_field())
    throw ValidationError("conv1d: sequence of length " + std::to_string(in_frames) +
                          " shorter than receptive field " +
                          std::to_string(receptive_field()));
  return (in_frames - receptive_field()) / stride + 1;
}

std::vector<Eigen::MatrixXd> ChiralConv1D::forward(
    const std::vector<Eigen::MatrixXd>& frames) const {
  const long n_out = out_frames(static_cast<long>(frames.size()));
  std::vector<Eigen::MatrixXd> taps;
  for (int t = 0; t < kernel_size; ++t) taps.push_back(materialize_tap(t).mat().transpose());
  const Tensor b = materialize_bias();
  std::vector<Eigen::MatrixXd> out;
  for (long o = 0; o < n_out; ++o) {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(frames[0].rows(), wpat.n_out);
    for (int t = 0; t < kernel_size; ++t)
      y += frames[static_cast<size_t>(o * stride + t * dilation)] * taps[t];
    y.rowwise() += b.mat().row(0);
    out.push_back(std::move(y));
  }
  return out;
}

ChiralConv1D::Bound ChiralConv1D::bind(Tape& tape, bool requires_grad) const {
  Bound bd;
  for (const auto& tap : tap_wblocks) {
    std::vector<Var> vars;
    for (const Tensor& t : tap) vars.push_back(tape.leaf(t, requires_grad));
    bd.tap_weight_t.push_back(transpose(assemble(tape, wpat, vars)));
    bd.tap_wvars.push_back(std::move(vars));
  }
  for (const Tensor& t : bblocks) bd.bvars.push_back(tape.leaf(t, requires_grad));
  bd.bias = assemble(tape, bpat, bd.bvars);
  return bd;
}

std::vector<Var> ChiralConv1D::forward(Tape& tape, const Bound& bound,
                                       const std::vector<Var>& frames) const {
  (void)tape;
  const long n_out = out_frames(static_cast<long>(frames.size()));
  std::vector<Var> out;
  for (long o = 0; o < n_out; ++o) {
    Var y = matmul(frames[static_cast<size_t>(o * stride)], bound.tap_weight_t[0]);
    for (int t = 1; t < kernel_size; ++t)
      y = add(y, matmul(frames[static_cast<size_t>(o * stride + t * dilation)],
                        bound.tap_weight_t[t]));
    out.push_back(add(y, bound.bias));
  }
  return out;
}

std::vector<Tensor*> ChiralConv1D::params() {
  std::vector<Tensor*> ps;
  for (auto& tap : tap_wblocks)
    for (Tensor& t : tap) ps.push_back(&t);
  for (Tensor& t : bblocks) ps.push_back(&t);
  return ps;
}

}  // namespace chirality
