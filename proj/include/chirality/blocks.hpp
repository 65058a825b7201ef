#pragma once

#include <string>
#include <vector>

#include "chirality/layout.hpp"
#include "chirality/tape.hpp"
#include "chirality/tensor.hpp"

namespace chirality {

/// Flattened coordinate indices of one layout, split into the six
/// left/right/center x negated/positive groups.
struct IndexGroups {
  std::vector<int> ln, lp, rn, rp, cn, cp;
  int total = 0;
};

IndexGroups index_groups(const JointLayout& layout);

/// Groups for a negation-invariant output (recurrent gates): every coordinate
/// is treated as positive, keeping the layout's flattened ordering.
IndexGroups gate_index_groups(const JointLayout& layout);

/// How free parameter blocks scatter (with signs) into a full weight matrix
/// or vector. One entry per scalar placement; fine-grained but desk scale.
struct BlockPattern {
  struct BlockDef {
    std::string name;
    long rows = 0;
    long cols = 0;  // 1 for vector patterns
  };
  struct Entry {
    int block;
    long br, bc;  // position inside the block
    long r, c;    // position inside the full tensor
    double sign;
  };

  long n_out = 0;
  long n_in = 0;  // 0 for vector patterns
  bool vector = false;
  std::vector<BlockDef> blocks;
  std::vector<Entry> entries;

  long free_param_count() const;
  int block_index(const std::string& name) const;  // -1 if absent
};

/// Shared-weight scatter pattern of an equivariant affine map. Works for the
/// reduced gate sharing and the invariance head as well, via the groups.
BlockPattern weight_pattern(const IndexGroups& out, const IndexGroups& in);
BlockPattern bias_pattern(const IndexGroups& out);
/// Swap-symmetric per-coordinate scale (batch-norm gamma).
BlockPattern gamma_pattern(const IndexGroups& out);

/// Zero tensors shaped per the pattern's block definitions.
std::vector<Tensor> zero_blocks(const BlockPattern& pattern);

Tensor assemble(const BlockPattern& pattern, const std::vector<Tensor>& blocks);
Var assemble(Tape& tape, const BlockPattern& pattern, const std::vector<Var>& blocks);

}  // namespace chirality
