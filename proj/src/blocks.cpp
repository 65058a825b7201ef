#include "chirality/blocks.hpp"

namespace chirality {

IndexGroups index_groups(const JointLayout& layout) {
  IndexGroups g;
  g.total = layout.size();
  const int d = layout.dims;
  const int k = layout.negated_per_joint();
  const int nl = static_cast<int>(layout.left.size());
  const int nc = static_cast<int>(layout.center.size());
  auto fill = [&](int joint0, int count, std::vector<int>& neg, std::vector<int>& pos) {
    for (int j = joint0; j < joint0 + count; ++j) {
      for (int s = 0; s < k; ++s) neg.push_back(j * d + s);
      for (int s = k; s < d; ++s) pos.push_back(j * d + s);
    }
  };
  fill(0, nl, g.ln, g.lp);
  fill(nl, nl, g.rn, g.rp);
  fill(2 * nl, nc, g.cn, g.cp);
  return g;
}

IndexGroups gate_index_groups(const JointLayout& layout) {
  IndexGroups g;
  g.total = layout.size();
  const int d = layout.dims;
  const int nl = static_cast<int>(layout.left.size());
  const int nc = static_cast<int>(layout.center.size());
  auto fill = [&](int joint0, int count, std::vector<int>& pos) {
    for (int j = joint0; j < joint0 + count; ++j)
      for (int s = 0; s < d; ++s) pos.push_back(j * d + s);
  };
  fill(0, nl, g.lp);
  fill(nl, nl, g.rp);
  fill(2 * nl, nc, g.cp);
  return g;
}

long BlockPattern::free_param_count() const {
  long n = 0;
  for (const BlockDef& b : blocks) n += b.rows * b.cols;
  return n;
}

int BlockPattern::block_index(const std::string& name) const {
  for (size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].name == name) return static_cast<int>(i);
  return -1;
}

namespace {

// Registers block `name` (once) and scatters it over (rows x cols) index
// groups with the given sign.
struct PatternBuilder {
  BlockPattern pat;

  int block(const std::string& name, long rows, long cols) {
    int idx = pat.block_index(name);
    if (idx >= 0) return idx;
    pat.blocks.push_back({name, rows, cols});
    return static_cast<int>(pat.blocks.size()) - 1;
  }

  void place(const std::string& name, const std::vector<int>& out_idx,
             const std::vector<int>& in_idx, double sign) {
    if (out_idx.empty() || in_idx.empty()) return;
    int b = block(name, static_cast<long>(out_idx.size()), static_cast<long>(in_idx.size()));
    for (size_t i = 0; i < out_idx.size(); ++i)
      for (size_t j = 0; j < in_idx.size(); ++j)
        pat.entries.push_back({b, static_cast<long>(i), static_cast<long>(j),
                               static_cast<long>(out_idx[i]), static_cast<long>(in_idx[j]),
                               sign});
  }

  void place_vec(const std::string& name, const std::vector<int>& out_idx, double sign) {
    if (out_idx.empty()) return;
    int b = block(name, static_cast<long>(out_idx.size()), 1);
    for (size_t i = 0; i < out_idx.size(); ++i)
      pat.entries.push_back({b, static_cast<long>(i), 0, static_cast<long>(out_idx[i]), 0, sign});
  }
};

}  // namespace

BlockPattern weight_pattern(const IndexGroups& out, const IndexGroups& in) {
  PatternBuilder pb;
  pb.pat.n_out = out.total;
  pb.pat.n_in = in.total;

  // left output rows
  pb.place("W_ln_ln", out.ln, in.ln, +1);
  pb.place("W_ln_lp", out.ln, in.lp, +1);
  pb.place("W_lp_ln", out.lp, in.ln, +1);
  pb.place("W_lp_lp", out.lp, in.lp, +1);
  pb.place("W_ln_rn", out.ln, in.rn, +1);
  pb.place("W_ln_rp", out.ln, in.rp, +1);
  pb.place("W_lp_rn", out.lp, in.rn, +1);
  pb.place("W_lp_rp", out.lp, in.rp, +1);
  pb.place("W_ln_cn", out.ln, in.cn, +1);
  pb.place("W_ln_cp", out.ln, in.cp, +1);
  pb.place("W_lp_cn", out.lp, in.cn, +1);
  pb.place("W_lp_cp", out.lp, in.cp, +1);

  // right output rows reuse the left blocks with flipped odd/even signs
  pb.place("W_ln_rn", out.rn, in.ln, +1);
  pb.place("W_ln_rp", out.rn, in.lp, -1);
  pb.place("W_lp_rn", out.rp, in.ln, -1);
  pb.place("W_lp_rp", out.rp, in.lp, +1);
  pb.place("W_ln_ln", out.rn, in.rn, +1);
  pb.place("W_ln_lp", out.rn, in.rp, -1);
  pb.place("W_lp_ln", out.rp, in.rn, -1);
  pb.place("W_lp_lp", out.rp, in.rp, +1);
  pb.place("W_ln_cn", out.rn, in.cn, +1);
  pb.place("W_ln_cp", out.rn, in.cp, -1);
  pb.place("W_lp_cn", out.rp, in.cn, -1);
  pb.place("W_lp_cp", out.rp, in.cp, +1);

  // center output rows; cp<-*n and the center cross blocks stay zero
  pb.place("W_cn_ln", out.cn, in.ln, +1);
  pb.place("W_cn_lp", out.cn, in.lp, +1);
  pb.place("W_cp_lp", out.cp, in.lp, +1);
  pb.place("W_cn_ln", out.cn, in.rn, +1);
  pb.place("W_cn_lp", out.cn, in.rp, -1);
  pb.place("W_cp_lp", out.cp, in.rp, +1);
  pb.place("W_cn_cn", out.cn, in.cn, +1);
  pb.place("W_cp_cp", out.cp, in.cp, +1);

  return pb.pat;
}

BlockPattern bias_pattern(const IndexGroups& out) {
  PatternBuilder pb;
  pb.pat.n_out = out.total;
  pb.pat.vector = true;
  pb.place_vec("b_ln", out.ln, +1);
  pb.place_vec("b_lp", out.lp, +1);
  pb.place_vec("b_ln", out.rn, -1);
  pb.place_vec("b_lp", out.rp, +1);
  pb.place_vec("b_cp", out.cp, +1);
  return pb.pat;
}

BlockPattern gamma_pattern(const IndexGroups& out) {
  PatternBuilder pb;
  pb.pat.n_out = out.total;
  pb.pat.vector = true;
  pb.place_vec("g_ln", out.ln, +1);
  pb.place_vec("g_lp", out.lp, +1);
  pb.place_vec("g_ln", out.rn, +1);
  pb.place_vec("g_lp", out.rp, +1);
  pb.place_vec("g_cn", out.cn, +1);
  pb.place_vec("g_cp", out.cp, +1);
  return pb.pat;
}

std::vector<Tensor> zero_blocks(const BlockPattern& pattern) {
  std::vector<Tensor> out;
  for (const auto& b : pattern.blocks)
    out.push_back(pattern.vector ? Tensor::zeros({b.rows}) : Tensor::zeros({b.rows, b.cols}));
  return out;
}

namespace {

void check_blocks(const BlockPattern& pattern, size_t n) {
  if (n != pattern.blocks.size())
    throw ValidationError("assemble: expected " + std::to_string(pattern.blocks.size()) +
                          " blocks, got " + std::to_string(n));
}

std::vector<long> full_shape(const BlockPattern& pattern) {
  return pattern.vector ? std::vector<long>{pattern.n_out}
                        : std::vector<long>{pattern.n_out, pattern.n_in};
}

}  // namespace

Tensor assemble(const BlockPattern& pattern, const std::vector<Tensor>& blocks) {
  check_blocks(pattern, blocks.size());
  for (size_t i = 0; i < blocks.size(); ++i) {
    const auto& def = pattern.blocks[i];
    if (blocks[i].rows() != (pattern.vector ? 1 : def.rows) ||
        (pattern.vector ? blocks[i].cols() != def.rows : blocks[i].cols() != def.cols))
      throw ValidationError("assemble: block '" + def.name + "' has wrong shape");
  }
  Tensor out(full_shape(pattern));
  for (const auto& e : pattern.entries) {
    const Tensor& b = blocks[e.block];
    const double v = pattern.vector ? b.data[e.br] : b.mat()(e.br, e.bc);
    if (pattern.vector)
      out.data[e.r] += e.sign * v;
    else
      out.mat()(e.r, e.c) += e.sign * v;
  }
  return out;
}

Var assemble(Tape& tape, const BlockPattern& pattern, const std::vector<Var>& blocks) {
  check_blocks(pattern, blocks.size());
  std::vector<Tensor> vals;
  for (Var b : blocks) vals.push_back(tape.val(b));
  Tensor out = assemble(pattern, vals);
  std::vector<int> ids;
  for (Var b : blocks) ids.push_back(b.id);
  BlockPattern pat_copy = pattern;
  return tape.record(std::move(out), blocks, [ids, pat_copy](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    for (const auto& e : pat_copy.entries) {
      const int id = ids[e.block];
      if (!tp.node_requires_grad(id)) continue;
      Tensor& acc = tp.grad_buffer(id);
      const double gv = pat_copy.vector ? g.data[e.r] : g.mat()(e.r, e.c);
      if (pat_copy.vector)
        acc.data[e.br] += e.sign * gv;
      else
        acc.mat()(e.br, e.bc) += e.sign * gv;
    }
  });
}

}  // namespace chirality
