#include "chirality/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace chirality {

namespace {

Tape* common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw ValidationError("ops: operands must live on the same tape");
  return a.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b))
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_string(a) +
                          " vs " + shape_string(b));
}

// true if b broadcasts across rows of a
bool row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && b.cols() == a.cols();
}

void check_binary(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b) && !row_broadcast(a, b))
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_string(a) +
                          " vs " + shape_string(b));
}

// Elementwise unary op with pointwise derivative.
Var unary(Var a, double (*f)(double), double (*df)(double)) {
  Tape* t = a.tape;
  const Tensor& av = t->val(a);
  Tensor out = av;
  for (double& v : out.data) v = f(v);
  int aid = a.id;
  return t->record(std::move(out), {a}, [aid, df](Tape& tp, int self) {
    if (!tp.node_requires_grad(aid)) return;
    const Tensor& g = tp.grad_of(self);
    const Tensor& x = tp.val_of(aid);
    Tensor& acc = tp.grad_buffer(aid);
    for (long i = 0; i < x.size(); ++i) acc.data[i] += g.data[i] * df(x.data[i]);
  });
}

}  // namespace

int Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ValidationError("tape: invalid variable handle");
  return v.id;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[check(v)];
  if (!n.has_grad)
    throw ValidationError("tape: gradient not computed for this variable");
  return n.grad;
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad.shape = n.value.shape;
    n.grad.data.assign(n.value.data.size(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::record(Tensor out, const std::vector<Var>& parents, BackwardFn back) {
  Node n;
  n.value = std::move(out);
  for (Var p : parents) {
    check(p);
    n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  }
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
  const int rid = check(root);
  if (nodes_[rid].value.size() != 1)
    throw ValidationError("backward: root must be scalar");
  for (Node& n : nodes_) n.has_grad = false;
  grad_buffer(rid).data[0] = 1.0;
  for (int id = rid; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.requires_grad && n.back) n.back(*this, id);
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& av = t->val(a);
  const Tensor& bv = t->val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.shape[1] != bv.shape[0])
    throw ValidationError("matmul: incompatible shapes " + shape_string(av) + " x " +
                          shape_string(bv));
  Tensor out({av.shape[0], bv.shape[1]});
  out.mat() = av.mat() * bv.mat();
  int aid = a.id, bid = b.id;
  return t->record(std::move(out), {a, b}, [aid, bid](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    if (tp.node_requires_grad(aid))
      tp.grad_buffer(aid).mat() += g.mat() * tp.val_of(bid).mat().transpose();
    if (tp.node_requires_grad(bid))
      tp.grad_buffer(bid).mat() += tp.val_of(aid).mat().transpose() * g.mat();
  });
}

Var add(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& av = t->val(a);
  const Tensor& bv = t->val(b);
  check_binary(av, bv, "add");
  Tensor out = av;
  if (same_shape(av, bv)) {
    for (long i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  } else {
    out.mat().rowwise() += bv.mat().row(0);
  }
  int aid = a.id, bid = b.id;
  const bool bc = !same_shape(av, bv);
  return t->record(std::move(out), {a, b}, [aid, bid, bc](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    if (tp.node_requires_grad(aid)) tp.grad_buffer(aid).mat() += g.mat();
    if (tp.node_requires_grad(bid)) {
      if (bc)
        tp.grad_buffer(bid).mat().row(0) += g.mat().colwise().sum();
      else
        tp.grad_buffer(bid).mat() += g.mat();
    }
  });
}

Var sub(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& av = t->val(a);
  const Tensor& bv = t->val(b);
  check_binary(av, bv, "sub");
  Tensor out = av;
  if (same_shape(av, bv)) {
    for (long i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
  } else {
    out.mat().rowwise() -= bv.mat().row(0);
  }
  int aid = a.id, bid = b.id;
  const bool bc = !same_shape(av, bv);
  return t->record(std::move(out), {a, b}, [aid, bid, bc](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    if (tp.node_requires_grad(aid)) tp.grad_buffer(aid).mat() += g.mat();
    if (tp.node_requires_grad(bid)) {
      if (bc)
        tp.grad_buffer(bid).mat().row(0) -= g.mat().colwise().sum();
      else
        tp.grad_buffer(bid).mat() -= g.mat();
    }
  });
}

Var mul(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& av = t->val(a);
  const Tensor& bv = t->val(b);
  check_binary(av, bv, "mul");
  Tensor out = av;
  if (same_shape(av, bv)) {
    for (long i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  } else {
    out.mat().array().rowwise() *= bv.mat().row(0).array();
  }
  int aid = a.id, bid = b.id;
  const bool bc = !same_shape(av, bv);
  return t->record(std::move(out), {a, b}, [aid, bid, bc](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    const Tensor& av2 = tp.val_of(aid);
    const Tensor& bv2 = tp.val_of(bid);
    if (tp.node_requires_grad(aid)) {
      Tensor& acc = tp.grad_buffer(aid);
      if (bc)
        acc.mat().array() += g.mat().array().rowwise() * bv2.mat().row(0).array();
      else
        for (long i = 0; i < acc.size(); ++i) acc.data[i] += g.data[i] * bv2.data[i];
    }
    if (tp.node_requires_grad(bid)) {
      Tensor& acc = tp.grad_buffer(bid);
      if (bc)
        acc.mat().row(0) += (g.mat().array() * av2.mat().array()).colwise().sum().matrix();
      else
        for (long i = 0; i < acc.size(); ++i) acc.data[i] += g.data[i] * av2.data[i];
    }
  });
}

Var div(Var a, Var b) {
  Tape* t = common_tape(a, b);
  const Tensor& av = t->val(a);
  const Tensor& bv = t->val(b);
  check_binary(av, bv, "div");
  Tensor out = av;
  if (same_shape(av, bv)) {
    for (long i = 0; i < out.size(); ++i) out.data[i] /= bv.data[i];
  } else {
    out.mat().array().rowwise() /= bv.mat().row(0).array();
  }
  int aid = a.id, bid = b.id;
  const bool bc = !same_shape(av, bv);
  return t->record(std::move(out), {a, b}, [aid, bid, bc](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    const Tensor& av2 = tp.val_of(aid);
    const Tensor& bv2 = tp.val_of(bid);
    if (tp.node_requires_grad(aid)) {
      Tensor& acc = tp.grad_buffer(aid);
      if (bc)
        acc.mat().array() += g.mat().array().rowwise() / bv2.mat().row(0).array();
      else
        for (long i = 0; i < acc.size(); ++i) acc.data[i] += g.data[i] / bv2.data[i];
    }
    if (tp.node_requires_grad(bid)) {
      Tensor& acc = tp.grad_buffer(bid);
      if (bc) {
        Eigen::ArrayXXd q = g.mat().array() * av2.mat().array();
        q.rowwise() /= (bv2.mat().row(0).array() * bv2.mat().row(0).array());
        acc.mat().row(0) -= q.colwise().sum().matrix();
      } else {
        for (long i = 0; i < acc.size(); ++i)
          acc.data[i] -= g.data[i] * av2.data[i] / (bv2.data[i] * bv2.data[i]);
      }
    }
  });
}

Var scale(Var a, double c) {
  Tape* t = a.tape;
  Tensor out = t->val(a);
  for (double& v : out.data) v *= c;
  int aid = a.id;
  return t->record(std::move(out), {a}, [aid, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    Tensor& acc = tp.grad_buffer(aid);
    for (long i = 0; i < acc.size(); ++i) acc.data[i] += c * g.data[i];
  });
}

Var add_scalar(Var a, double c) {
  Tape* t = a.tape;
  Tensor out = t->val(a);
  for (double& v : out.data) v += c;
  int aid = a.id;
  return t->record(std::move(out), {a}, [aid](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    Tensor& acc = tp.grad_buffer(aid);
    for (long i = 0; i < acc.size(); ++i) acc.data[i] += g.data[i];
  });
}

Var sum(Var a) {
  Tape* t = a.tape;
  double s = 0.0;
  for (double v : t->val(a).data) s += v;
  int aid = a.id;
  return t->record(Tensor::scalar_value(s), {a}, [aid](Tape& tp, int self) {
    const double g = tp.grad_of(self).data[0];
    Tensor& acc = tp.grad_buffer(aid);
    for (double& v : acc.data) v += g;
  });
}

Var mean(Var a) {
  Tape* t = a.tape;
  const Tensor& av = t->val(a);
  double s = 0.0;
  for (double v : av.data) s += v;
  const double inv = 1.0 / static_cast<double>(av.size());
  int aid = a.id;
  return t->record(Tensor::scalar_value(s * inv), {a}, [aid, inv](Tape& tp, int self) {
    const double g = tp.grad_of(self).data[0] * inv;
    Tensor& acc = tp.grad_buffer(aid);
    for (double& v : acc.data) v += g;
  });
}

Var mean_rows(Var a) {
  Tape* t = a.tape;
  const Tensor& av = t->val(a);
  if (av.rank() != 2) throw ValidationError("mean_rows: rank-2 input required");
  Tensor out({av.shape[1]});
  out.mat().row(0) = av.mat().colwise().mean();
  int aid = a.id;
  const double inv = 1.0 / static_cast<double>(av.shape[0]);
  return t->record(std::move(out), {a}, [aid, inv](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    tp.grad_buffer(aid).mat().rowwise() += inv * g.mat().row(0);
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) { double c = std::cosh(x); return 1.0 / (c * c); });
}

Var hardtanh(Var a) {
  return unary(a, [](double x) { return x > 1.0 ? 1.0 : (x < -1.0 ? -1.0 : x); },
               [](double x) { return (x > -1.0 && x < 1.0) ? 1.0 : 0.0; });
}

Var softsign(Var a) {
  return unary(a, [](double x) { return x / (1.0 + std::abs(x)); },
               [](double x) { double d = 1.0 + std::abs(x); return 1.0 / (d * d); });
}

Var sigmoid(Var a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double x) {
                 double s = 1.0 / (1.0 + std::exp(-x));
                 return s * (1.0 - s);
               });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double x) { return 0.5 / std::sqrt(x); });
}

Var transpose(Var a) {
  Tape* t = a.tape;
  const Tensor& av = t->val(a);
  if (av.rank() != 2) throw ValidationError("transpose: rank-2 input required");
  Tensor out({av.shape[1], av.shape[0]});
  out.mat() = av.mat().transpose();
  int aid = a.id;
  return t->record(std::move(out), {a}, [aid](Tape& tp, int self) {
    tp.grad_buffer(aid).mat() += tp.grad_of(self).mat().transpose();
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: empty input");
  Tape* t = parts[0].tape;
  long rows = t->val(parts[0]).rows();
  long cols = 0;
  for (Var p : parts) {
    if (p.tape != t) throw ValidationError("concat_cols: mixed tapes");
    if (t->val(p).rows() != rows) throw ValidationError("concat_cols: row mismatch");
    cols += t->val(p).cols();
  }
  const bool rank1 = t->val(parts[0]).rank() == 1;
  Tensor out(rank1 ? std::vector<long>{cols} : std::vector<long>{rows, cols});
  std::vector<int> ids;
  std::vector<long> widths;
  long off = 0;
  for (Var p : parts) {
    const Tensor& pv = t->val(p);
    out.mat().middleCols(off, pv.cols()) = pv.mat();
    ids.push_back(p.id);
    widths.push_back(pv.cols());
    off += pv.cols();
  }
  return t->record(std::move(out), parts, [ids, widths](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    long o = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      if (tp.node_requires_grad(ids[k]))
        tp.grad_buffer(ids[k]).mat() += g.mat().middleCols(o, widths[k]);
      o += widths[k];
    }
  });
}

Var slice_cols(Var a, long begin, long len) {
  Tape* t = a.tape;
  const Tensor& av = t->val(a);
  if (begin < 0 || len <= 0 || begin + len > av.cols())
    throw ValidationError("slice_cols: range out of bounds");
  Tensor out(av.rank() == 1 ? std::vector<long>{len}
                            : std::vector<long>{av.rows(), len});
  out.mat() = av.mat().middleCols(begin, len);
  int aid = a.id;
  return t->record(std::move(out), {a}, [aid, begin, len](Tape& tp, int self) {
    tp.grad_buffer(aid).mat().middleCols(begin, len) += tp.grad_of(self).mat();
  });
}

Var signed_permute(Var a, const ChiralityTransform& tr) {
  Tape* t = a.tape;
  const Tensor& av = t->val(a);
  if (av.cols() != tr.size())
    throw ValidationError("signed_permute: feature axis mismatch");
  Tensor out = av;
  for (int i = 0; i < tr.size(); ++i)
    out.mat().col(tr.perm[i]) = tr.sign[i] * av.mat().col(i);
  int aid = a.id;
  ChiralityTransform trc = tr;
  return t->record(std::move(out), {a}, [aid, trc](Tape& tp, int self) {
    const Tensor& g = tp.grad_of(self);
    Tensor& acc = tp.grad_buffer(aid);
    for (int i = 0; i < trc.size(); ++i)
      acc.mat().col(i) += trc.sign[i] * g.mat().col(trc.perm[i]);
  });
}

Var mpjpe(Var pred, Var target, long joints, long dims) {
  Tape* t = common_tape(pred, target);
  const Tensor& pv = t->val(pred);
  const Tensor& tv = t->val(target);
  require_same_shape(pv, tv, "mpjpe");
  if (pv.cols() != joints * dims)
    throw ValidationError("mpjpe: feature size != joints*dims");
  const long batch = pv.rows();
  double acc = 0.0;
  for (long r = 0; r < batch; ++r)
    for (long j = 0; j < joints; ++j) {
      double ss = 0.0;
      for (long d = 0; d < dims; ++d) {
        double diff = pv.mat()(r, j * dims + d) - tv.mat()(r, j * dims + d);
        ss += diff * diff;
      }
      acc += std::sqrt(ss);
    }
  const double inv = 1.0 / static_cast<double>(batch * joints);
  int pid = pred.id, tid = target.id;
  return t->record(Tensor::scalar_value(acc * inv), {pred, target},
                   [pid, tid, joints, dims, inv](Tape& tp, int self) {
                     const double g = tp.grad_of(self).data[0] * inv;
                     const Tensor& p = tp.val_of(pid);
                     const Tensor& q = tp.val_of(tid);
                     const long batch = p.rows();
                     auto scatter = [&](int id, double s) {
                       Tensor& acc2 = tp.grad_buffer(id);
                       for (long r = 0; r < batch; ++r)
                         for (long j = 0; j < joints; ++j) {
                           double ss = 0.0;
                           for (long d = 0; d < dims; ++d) {
                             double diff = p.mat()(r, j * dims + d) - q.mat()(r, j * dims + d);
                             ss += diff * diff;
                           }
                           const double norm = std::sqrt(ss);
                           if (norm == 0.0) continue;
                           for (long d = 0; d < dims; ++d) {
                             double diff = p.mat()(r, j * dims + d) - q.mat()(r, j * dims + d);
                             acc2.mat()(r, j * dims + d) += s * g * diff / norm;
                           }
                         }
                     };
                     if (tp.node_requires_grad(pid)) scatter(pid, 1.0);
                     if (tp.node_requires_grad(tid)) scatter(tid, -1.0);
                   });
}

}  // namespace chirality
