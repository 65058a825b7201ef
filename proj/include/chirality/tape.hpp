#pragma once

#include <functional>
#include <vector>

#include "chirality/layout.hpp"
#include "chirality/tensor.hpp"

namespace chirality {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
};

/// Reverse-mode tape. Nodes are recorded in creation order, so a reverse scan
/// is a valid reverse topological order. Single-threaded by construction.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& val(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[check(v)].requires_grad; }
  size_t size() const { return nodes_.size(); }

  /// Seeds the (scalar) root with gradient 1 and runs all backward rules.
  void backward(Var root);

  // -- primitive support --------------------------------------------------
  // A backward rule receives the tape and the id of its own node; it reads
  // the node's accumulated gradient and scatters into parent buffers.
  using BackwardFn = std::function<void(Tape&, int)>;
  Var record(Tensor out, const std::vector<Var>& parents, BackwardFn back);
  const Tensor& val_of(int id) const { return nodes_[id].value; }
  const Tensor& grad_of(int id) const { return nodes_[id].grad; }
  bool node_requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulation buffer, zero-initialized on first touch.
  Tensor& grad_buffer(int id);
  bool has_grad(int id) const { return nodes_[id].has_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn back;
  };
  int check(Var v) const;
  std::vector<Node> nodes_;
};

// Primitives. Binary elementwise ops accept a rank-1 right operand, which
// broadcasts across rows of a rank-2 left operand.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var sum(Var a);
Var mean(Var a);
Var mean_rows(Var a);
Var tanh(Var a);
Var hardtanh(Var a);
Var softsign(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var sqrt(Var a);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, long begin, long len);
Var signed_permute(Var a, const ChiralityTransform& t);

/// Mean over batch and joints of the per-joint Euclidean distance.
/// pred/target are [batch, joints*dims] with per-joint coordinates contiguous.
Var mpjpe(Var pred, Var target, long joints, long dims);

}  // namespace chirality
