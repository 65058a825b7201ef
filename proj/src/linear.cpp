#include "chirality/linear.hpp"

namespace chirality {

ChiralLinear ChiralLinear::create(JointLayout in, JointLayout out, bool gate_output) {
  ChiralLinear l;
  l.in_layout = std::move(in);
  l.out_layout = std::move(out);
  l.gate_output = gate_output;
  const IndexGroups gin = index_groups(l.in_layout);
  const IndexGroups gout =
      gate_output ? gate_index_groups(l.out_layout) : index_groups(l.out_layout);
  l.wpat = weight_pattern(gout, gin);
  l.bpat = bias_pattern(gout);
  l.wblocks = zero_blocks(l.wpat);
  l.bblocks = zero_blocks(l.bpat);
  return l;
}

ChiralLinear ChiralLinear::invariance_head(JointLayout in, JointLayout out) {
  if (!out.left.empty() || !out.right.empty() || !out.negated_dims.empty())
    throw ValidationError(
        "invariance_head: output layout must have empty left/right joint tuples "
        "and an empty negated dimension set");
  return create(std::move(in), std::move(out), false);
}

void ChiralLinear::init_uniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(wpat.n_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Tensor& b : wblocks)
    for (double& v : b.data) v = dist(rng);
  for (Tensor& b : bblocks)
    for (double& v : b.data) v = dist(rng);
}

Eigen::MatrixXd ChiralLinear::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != wpat.n_in)
    throw ValidationError("chiral_linear: input width " + std::to_string(x.cols()) +
                          " != layout size " + std::to_string(wpat.n_in));
  Tensor W = materialize_weight();
  Tensor b = materialize_bias();
  Eigen::MatrixXd y = x * W.mat().transpose();
  y.rowwise() += b.mat().row(0);
  return y;
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(x.rows(), static_cast<long>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) out.col(static_cast<long>(j)) = x.col(idx[j]);
  return out;
}

void scatter(Eigen::MatrixXd& y, const std::vector<int>& idx, const Eigen::MatrixXd& part) {
  for (size_t j = 0; j < idx.size(); ++j) y.col(idx[j]) = part.col(static_cast<long>(j));
}

}  // namespace

Eigen::MatrixXd ChiralLinear::symmetric_forward(const Eigen::MatrixXd& x,
                                                long* mult_count) const {
  if (x.cols() != wpat.n_in)
    throw ValidationError("symmetric_forward: input width mismatch");
  const IndexGroups gin = index_groups(in_layout);
  const IndexGroups gout =
      gate_output ? gate_index_groups(out_layout) : index_groups(out_layout);
  const long batch = x.rows();
  long mults = 0;

  auto blk = [&](const char* name) -> Eigen::MatrixXd {
    int i = wpat.block_index(name);
    if (i < 0) return Eigen::MatrixXd();
    return wblocks[static_cast<size_t>(i)].mat();
  };
  auto bias = [&](const char* name) -> Eigen::RowVectorXd {
    int i = bpat.block_index(name);
    if (i < 0) return Eigen::RowVectorXd();
    return bblocks[static_cast<size_t>(i)].mat().row(0);
  };
  // acc += X * M^T, counting per-sample multiplications; no-op on empty blocks
  auto add_prod = [&](Eigen::MatrixXd& acc, const Eigen::MatrixXd& X,
                      const Eigen::MatrixXd& M) {
    if (X.cols() == 0 || M.size() == 0) return;
    mults += M.rows() * M.cols();
    acc += X * M.transpose();
  };

  const Eigen::MatrixXd Xln = gather(x, gin.ln), Xlp = gather(x, gin.lp);
  const Eigen::MatrixXd Xrn = gather(x, gin.rn), Xrp = gather(x, gin.rp);
  const Eigen::MatrixXd Xcn = gather(x, gin.cn), Xcp = gather(x, gin.cp);
  const Eigen::MatrixXd Sn = Xln + Xrn, Dn = Xln - Xrn;
  const Eigen::MatrixXd Sp = Xlp + Xrp, Dp = Xlp - Xrp;

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(batch, wpat.n_out);

  // mirrored negated output rows: even/odd split of the shared blocks
  if (!gout.ln.empty()) {
    const long n = static_cast<long>(gout.ln.size());
    Eigen::MatrixXd even = Eigen::MatrixXd::Zero(batch, n);
    Eigen::MatrixXd odd = Eigen::MatrixXd::Zero(batch, n);
    const Eigen::MatrixXd Wll = blk("W_ln_ln"), Wlr = blk("W_ln_rn");
    const Eigen::MatrixXd Wlp = blk("W_ln_lp"), Wrp = blk("W_ln_rp");
    if (Wll.size()) add_prod(even, Sn, ((Wll + Wlr) / 2).eval());
    if (Wlp.size()) add_prod(even, Dp, ((Wlp - Wrp) / 2).eval());
    add_prod(even, Xcn, blk("W_ln_cn"));
    if (Wll.size()) add_prod(odd, Dn, ((Wll - Wlr) / 2).eval());
    if (Wlp.size()) add_prod(odd, Sp, ((Wlp + Wrp) / 2).eval());
    add_prod(odd, Xcp, blk("W_ln_cp"));
    if (bias("b_ln").size()) odd.rowwise() += bias("b_ln");
    scatter(y, gout.ln, even + odd);
    scatter(y, gout.rn, even - odd);
  }
  // mirrored positive output rows
  if (!gout.lp.empty()) {
    const long n = static_cast<long>(gout.lp.size());
    Eigen::MatrixXd even = Eigen::MatrixXd::Zero(batch, n);
    Eigen::MatrixXd odd = Eigen::MatrixXd::Zero(batch, n);
    const Eigen::MatrixXd Wll = blk("W_lp_ln"), Wlr = blk("W_lp_rn");
    const Eigen::MatrixXd Wlp = blk("W_lp_lp"), Wrp = blk("W_lp_rp");
    if (Wll.size()) add_prod(even, Dn, ((Wll - Wlr) / 2).eval());
    if (Wlp.size()) add_prod(even, Sp, ((Wlp + Wrp) / 2).eval());
    add_prod(even, Xcp, blk("W_lp_cp"));
    if (bias("b_lp").size()) even.rowwise() += bias("b_lp");
    if (Wll.size()) add_prod(odd, Sn, ((Wll + Wlr) / 2).eval());
    if (Wlp.size()) add_prod(odd, Dp, ((Wlp - Wrp) / 2).eval());
    add_prod(odd, Xcn, blk("W_lp_cn"));
    scatter(y, gout.lp, even + odd);
    scatter(y, gout.rp, even - odd);
  }
  // center rows
  if (!gout.cn.empty()) {
    Eigen::MatrixXd part = Eigen::MatrixXd::Zero(batch, static_cast<long>(gout.cn.size()));
    add_prod(part, Sn, blk("W_cn_ln"));
    add_prod(part, Dp, blk("W_cn_lp"));
    add_prod(part, Xcn, blk("W_cn_cn"));
    scatter(y, gout.cn, part);
  }
  if (!gout.cp.empty()) {
    Eigen::MatrixXd part = Eigen::MatrixXd::Zero(batch, static_cast<long>(gout.cp.size()));
    add_prod(part, Sp, blk("W_cp_lp"));
    add_prod(part, Xcp, blk("W_cp_cp"));
    if (bias("b_cp").size()) part.rowwise() += bias("b_cp");
    scatter(y, gout.cp, part);
  }

  if (mult_count) *mult_count = mults;
  return y;
}

long ChiralLinear::symmetric_mult_count() const {
  long mults = 0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, wpat.n_in);
  symmetric_forward(x, &mults);
  return mults;
}

BoundAffine ChiralLinear::bind(Tape& tape, bool requires_grad) const {
  BoundAffine b;
  for (const Tensor& w : wblocks) b.wvars.push_back(tape.leaf(w, requires_grad));
  for (const Tensor& bb : bblocks) b.bvars.push_back(tape.leaf(bb, requires_grad));
  b.weight_t = transpose(assemble(tape, wpat, b.wvars));
  b.bias = assemble(tape, bpat, b.bvars);
  return b;
}

Var ChiralLinear::forward(Tape& tape, const BoundAffine& bound, Var x) const {
  return add(matmul(x, bound.weight_t), bound.bias);
}

std::vector<Tensor*> ChiralLinear::params() {
  std::vector<Tensor*> ps;
  for (Tensor& w : wblocks) ps.push_back(&w);
  for (Tensor& b : bblocks) ps.push_back(&b);
  return ps;
}

}  // namespace chirality
