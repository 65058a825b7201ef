#include "chirality/normalization.hpp"

namespace chirality {

ChiralBatchNorm ChiralBatchNorm::create(JointLayout layout, double momentum,
                                        double epsilon) {
  ChiralBatchNorm bn;
  bn.layout = std::move(layout);
  bn.transform = make_transform(bn.layout);
  const IndexGroups g = index_groups(bn.layout);
  bn.gpat = gamma_pattern(g);
  bn.bpat = bias_pattern(g);
  bn.gblocks = zero_blocks(bn.gpat);
  for (Tensor& t : bn.gblocks)
    for (double& v : t.data) v = 1.0;
  bn.bblocks = zero_blocks(bn.bpat);
  bn.running_mean = Tensor::zeros({bn.layout.size()});
  bn.running_var = Tensor::zeros({bn.layout.size()});
  for (double& v : bn.running_var.data) v = 1.0;
  bn.momentum = momentum;
  bn.epsilon = epsilon;
  return bn;
}

void ChiralBatchNorm::batch_stats(const Eigen::MatrixXd& x, Eigen::RowVectorXd* mean,
                                  Eigen::RowVectorXd* var) const {
  if (x.rows() < 1) throw ValidationError("batchnorm: empty batch");
  const Eigen::MatrixXd xt = apply_transform(transform, x);
  const Eigen::RowVectorXd mu = 0.5 * (x.colwise().mean() + xt.colwise().mean());
  if (mean) *mean = mu;
  if (var) {
    Eigen::MatrixXd c = x.rowwise() - mu;
    Eigen::MatrixXd ct = xt.rowwise() - mu;
    *var = 0.5 * (c.array().square().colwise().mean() +
                  ct.array().square().colwise().mean());
  }
}

Eigen::MatrixXd ChiralBatchNorm::forward_train(const Eigen::MatrixXd& x) {
  Eigen::RowVectorXd mu, var;
  batch_stats(x, &mu, &var);
  for (long i = 0; i < layout.size(); ++i) {
    running_mean.data[i] = (1.0 - momentum) * running_mean.data[i] + momentum * mu(i);
    running_var.data[i] = (1.0 - momentum) * running_var.data[i] + momentum * var(i);
  }
  const Tensor gamma = materialize_gamma();
  const Tensor beta = materialize_beta();
  Eigen::ArrayXXd c = (x.rowwise() - mu).array();
  Eigen::RowVectorXd inv = (var.array() + epsilon).sqrt();
  c.rowwise() /= inv.array();
  c.rowwise() *= gamma.mat().row(0).array();
  c.rowwise() += beta.mat().row(0).array();
  return c.matrix();
}

Eigen::MatrixXd ChiralBatchNorm::forward_eval(const Eigen::MatrixXd& x) const {
  const Tensor gamma = materialize_gamma();
  const Tensor beta = materialize_beta();
  Eigen::ArrayXXd c = (x.rowwise() - running_mean.mat().row(0)).array();
  Eigen::RowVectorXd inv = (running_var.mat().row(0).array() + epsilon).sqrt();
  c.rowwise() /= inv.array();
  c.rowwise() *= gamma.mat().row(0).array();
  c.rowwise() += beta.mat().row(0).array();
  return c.matrix();
}

ChiralBatchNorm::Bound ChiralBatchNorm::bind(Tape& tape, bool requires_grad) const {
  Bound b;
  for (const Tensor& t : gblocks) b.gvars.push_back(tape.leaf(t, requires_grad));
  for (const Tensor& t : bblocks) b.bvars.push_back(tape.leaf(t, requires_grad));
  b.gamma = assemble(tape, gpat, b.gvars);
  b.beta = assemble(tape, bpat, b.bvars);
  return b;
}

Var ChiralBatchNorm::forward_train(Tape& tape, const Bound& bound, Var x,
                                   bool update_running) {
  const Tensor& xv = tape.val(x);
  if (xv.rows() < 1) throw ValidationError("batchnorm: empty batch");
  Var xt = signed_permute(x, transform);
  Var mu = scale(add(mean_rows(x), mean_rows(xt)), 0.5);
  Var c = sub(x, mu);
  Var ct = sub(xt, mu);
  Var var = scale(add(mean_rows(mul(c, c)), mean_rows(mul(ct, ct))), 0.5);
  if (update_running) {
    const Tensor& muv = tape.val(mu);
    const Tensor& varv = tape.val(var);
    for (long i = 0; i < layout.size(); ++i) {
      running_mean.data[i] = (1.0 - momentum) * running_mean.data[i] + momentum * muv.data[i];
      running_var.data[i] = (1.0 - momentum) * running_var.data[i] + momentum * varv.data[i];
    }
  }
  Var inv = sqrt(add_scalar(var, epsilon));
  return add(mul(div(c, inv), bound.gamma), bound.beta);
}

Var ChiralBatchNorm::forward_eval(Tape& tape, const Bound& bound, Var x) const {
  Var mu = tape.leaf(running_mean, false);
  Var inv = sqrt(add_scalar(tape.leaf(running_var, false), epsilon));
  return add(mul(div(sub(x, mu), inv), bound.gamma), bound.beta);
}

std::vector<Tensor*> ChiralBatchNorm::params() {
  std::vector<Tensor*> ps;
  for (Tensor& t : gblocks) ps.push_back(&t);
  for (Tensor& t : bblocks) ps.push_back(&t);
  return ps;
}

}  // namespace chirality
