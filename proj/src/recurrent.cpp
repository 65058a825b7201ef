#include "chirality/recurrent.hpp"

namespace chirality {

namespace {

Eigen::MatrixXd sigmoid_m(const Eigen::MatrixXd& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

Eigen::MatrixXd tanh_m(const Eigen::MatrixXd& x) { return x.array().tanh().matrix(); }

void set_bias(ChiralLinear& l, double v) {
  for (Tensor& b : l.bblocks)
    for (double& e : b.data) e = v;
}

}  // namespace

ChiralLSTM ChiralLSTM::create(JointLayout in, JointLayout hidden, bool naive_gates) {
  ChiralLSTM m;
  m.in_layout = in;
  m.hidden_layout = hidden;
  m.naive_gates = naive_gates;
  const bool gate = !naive_gates;
  m.ii = ChiralLinear::create(in, hidden, gate);
  m.hi = ChiralLinear::create(hidden, hidden, gate);
  m.io = ChiralLinear::create(in, hidden, gate);
  m.ho = ChiralLinear::create(hidden, hidden, gate);
  m.iff = ChiralLinear::create(in, hidden, gate);
  m.hf = ChiralLinear::create(hidden, hidden, gate);
  m.ig = ChiralLinear::create(in, hidden, false);
  m.hg = ChiralLinear::create(hidden, hidden, false);
  return m;
}

void ChiralLSTM::init_uniform(std::mt19937_64& rng) {
  for (ChiralLinear* l : {&ii, &hi, &io, &ho, &iff, &hf, &ig, &hg}) l->init_uniform(rng);
  set_bias(iff, 1.0);
  set_bias(hf, 0.0);
}

ChiralLSTM::StepOut ChiralLSTM::step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& h_prev,
                                     const Eigen::MatrixXd& c_prev) const {
  StepOut s;
  s.gate_i = sigmoid_m(ii.forward(x) + hi.forward(h_prev));
  s.gate_o = sigmoid_m(io.forward(x) + ho.forward(h_prev));
  s.gate_f = sigmoid_m(iff.forward(x) + hf.forward(h_prev));
  s.cand = tanh_m(ig.forward(x) + hg.forward(h_prev));
  s.c = s.gate_f.cwiseProduct(c_prev) + s.gate_i.cwiseProduct(s.cand);
  s.h = s.gate_o.cwiseProduct(tanh_m(s.c));
  return s;
}

std::vector<Eigen::MatrixXd> ChiralLSTM::unroll(const std::vector<Eigen::MatrixXd>& frames,
                                                Eigen::MatrixXd h0, Eigen::MatrixXd c0) const {
  if (frames.empty()) throw ValidationError("lstm: empty sequence");
  const long batch = frames[0].rows();
  const long n = hidden_layout.size();
  Eigen::MatrixXd h = h0.size() ? h0 : Eigen::MatrixXd::Zero(batch, n);
  Eigen::MatrixXd c = c0.size() ? c0 : Eigen::MatrixXd::Zero(batch, n);
  std::vector<Eigen::MatrixXd> out;
  for (const auto& x : frames) {
    StepOut s = step(x, h, c);
    h = s.h;
    c = s.c;
    out.push_back(h);
  }
  return out;
}

ChiralLSTM::Bound ChiralLSTM::bind(Tape& tape, bool requires_grad) const {
  return Bound{ii.bind(tape, requires_grad), hi.bind(tape, requires_grad),
               io.bind(tape, requires_grad), ho.bind(tape, requires_grad),
               iff.bind(tape, requires_grad), hf.bind(tape, requires_grad),
               ig.bind(tape, requires_grad), hg.bind(tape, requires_grad)};
}

std::pair<Var, Var> ChiralLSTM::step(Tape& tape, const Bound& b, Var x, Var h_prev,
                                     Var c_prev) const {
  Var i = sigmoid(add(ii.forward(tape, b.ii, x), hi.forward(tape, b.hi, h_prev)));
  Var o = sigmoid(add(io.forward(tape, b.io, x), ho.forward(tape, b.ho, h_prev)));
  Var f = sigmoid(add(iff.forward(tape, b.iff, x), hf.forward(tape, b.hf, h_prev)));
  Var g = tanh(add(ig.forward(tape, b.ig, x), hg.forward(tape, b.hg, h_prev)));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

std::vector<Tensor*> ChiralLSTM::params() {
  std::vector<Tensor*> ps;
  for (ChiralLinear* l : {&ii, &hi, &io, &ho, &iff, &hf, &ig, &hg})
    for (Tensor* t : l->params()) ps.push_back(t);
  return ps;
}

ChiralGRU ChiralGRU::create(JointLayout in, JointLayout hidden) {
  ChiralGRU m;
  m.in_layout = in;
  m.hidden_layout = hidden;
  m.iz = ChiralLinear::create(in, hidden, true);
  m.hz = ChiralLinear::create(hidden, hidden, true);
  m.ir = ChiralLinear::create(in, hidden, true);
  m.hr = ChiralLinear::create(hidden, hidden, true);
  m.in_ = ChiralLinear::create(in, hidden, false);
  m.hn = ChiralLinear::create(hidden, hidden, false);
  return m;
}

void ChiralGRU::init_uniform(std::mt19937_64& rng) {
  for (ChiralLinear* l : {&iz, &hz, &ir, &hr, &in_, &hn}) l->init_uniform(rng);
}

ChiralGRU::StepOut ChiralGRU::step(const Eigen::MatrixXd& x,
                                   const Eigen::MatrixXd& h_prev) const {
  StepOut s;
  s.gate_z = sigmoid_m(iz.forward(x) + hz.forward(h_prev));
  s.gate_r = sigmoid_m(ir.forward(x) + hr.forward(h_prev));
  s.cand = tanh_m(in_.forward(x) + s.gate_r.cwiseProduct(hn.forward(h_prev)));
  s.h = (1.0 - s.gate_z.array()).matrix().cwiseProduct(s.cand) +
        s.gate_z.cwiseProduct(h_prev);
  return s;
}

ChiralGRU::Bound ChiralGRU::bind(Tape& tape, bool requires_grad) const {
  return Bound{iz.bind(tape, requires_grad), hz.bind(tape, requires_grad),
               ir.bind(tape, requires_grad), hr.bind(tape, requires_grad),
               in_.bind(tape, requires_grad), hn.bind(tape, requires_grad)};
}

Var ChiralGRU::step(Tape& tape, const Bound& b, Var x, Var h_prev) const {
  Var z = sigmoid(add(iz.forward(tape, b.iz, x), hz.forward(tape, b.hz, h_prev)));
  Var r = sigmoid(add(ir.forward(tape, b.ir, x), hr.forward(tape, b.hr, h_prev)));
  Var n = tanh(add(in_.forward(tape, b.in_, x), mul(r, hn.forward(tape, b.hn, h_prev))));
  // (1-z)*n + z*h = n - z*n + z*h
  return add(sub(n, mul(z, n)), mul(z, h_prev));
}

std::vector<Tensor*> ChiralGRU::params() {
  std::vector<Tensor*> ps;
  for (ChiralLinear* l : {&iz, &hz, &ir, &hr, &in_, &hn})
    for (Tensor* t : l->params()) ps.push_back(t);
  return ps;
}

}  // namespace chirality
