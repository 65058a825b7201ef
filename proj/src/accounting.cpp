#include "chirality/accounting.hpp"

#include <sstream>
#include <stdexcept>

#include "chirality/model.hpp"

namespace chirality {

Rational::Rational(long n, long d) {
  if (d == 0) throw std::invalid_argument("rational: zero denominator");
  if (d < 0) {
    n = -n;
    d = -d;
  }
  const long g = std::gcd(n < 0 ? -n : n, d);
  num = g ? n / g : n;
  den = g ? d / g : d;
}

Rational param_reduction_factor(const JointLayout& in, const JointLayout& out) {
  const long jin = static_cast<long>(in.left.size() + in.right.size() + in.center.size());
  const long jout = static_cast<long>(out.left.size() + out.right.size() + out.center.size());
  const long fin = static_cast<long>(in.left.size() + in.center.size());
  const long fout = static_cast<long>(out.left.size() + out.center.size());
  return Rational(fin * fout, jin * jout);
}

Rational mult_reduction_factor(const JointLayout& in) {
  const long jin = static_cast<long>(in.left.size() + in.right.size() + in.center.size());
  return Rational(static_cast<long>(in.left.size() + in.center.size()), jin);
}

long CostReport::total_free() const {
  long n = 0;
  for (const LayerCost& l : layers) n += l.free_weights + l.free_biases;
  return n;
}

long CostReport::total_dense() const {
  long n = 0;
  for (const LayerCost& l : layers) n += l.dense_weights + l.dense_biases;
  return n;
}

long CostReport::total_naive_mults() const {
  long n = 0;
  for (const LayerCost& l : layers) n += l.naive_mults;
  return n;
}

long CostReport::total_symmetric_mults() const {
  long n = 0;
  for (const LayerCost& l : layers) n += l.symmetric_mults;
  return n;
}

std::string CostReport::table() const {
  std::ostringstream os;
  os << "layer                     free_w  free_b  dense_w  dense_b  w_ratio  "
        "formula  sym_mult  naive_mult  m_ratio\n";
  char line[256];
  for (const LayerCost& l : layers) {
    std::snprintf(line, sizeof(line),
                  "%-24s %7ld %7ld %8ld %8ld %8.4f %8.4f %9ld %11ld %8.4f\n",
                  l.name.c_str(), l.free_weights, l.free_biases, l.dense_weights,
                  l.dense_biases, l.weight_ratio(), l.formula_param_factor,
                  l.symmetric_mults, l.naive_mults, l.mult_ratio());
    os << line;
  }
  std::snprintf(line, sizeof(line),
                "%-24s %7ld %7s %8ld %8s %8.4f %8s %9ld %11ld %8.4f\n", "total",
                total_free(), "", total_dense(), "",
                total_dense() ? static_cast<double>(total_free()) / total_dense() : 1.0, "",
                total_symmetric_mults(), total_naive_mults(),
                total_naive_mults()
                    ? static_cast<double>(total_symmetric_mults()) / total_naive_mults()
                    : 1.0);
  os << line;
  return os.str();
}

namespace {

LayerCost affine_cost(const std::string& name, const ChiralLinear& l) {
  LayerCost c;
  c.name = name;
  c.free_weights = l.free_weight_count();
  c.free_biases = l.free_bias_count();
  c.dense_weights = l.n_out() * l.n_in();
  c.dense_biases = l.n_out();
  c.naive_mults = l.naive_mult_count();
  c.symmetric_mults = l.symmetric_mult_count();
  c.formula_param_factor = param_reduction_factor(l.in_layout, l.out_layout).value();
  c.formula_mult_factor = mult_reduction_factor(l.in_layout).value();
  return c;
}

LayerCost sum_parts(const std::string& name,
                    const std::vector<const ChiralLinear*>& parts) {
  LayerCost c;
  c.name = name;
  double pf = 0.0, mf = 0.0;
  for (const ChiralLinear* l : parts) {
    LayerCost p = affine_cost("", *l);
    c.free_weights += p.free_weights;
    c.free_biases += p.free_biases;
    c.dense_weights += p.dense_weights;
    c.dense_biases += p.dense_biases;
    c.naive_mults += p.naive_mults;
    c.symmetric_mults += p.symmetric_mults;
    pf += p.formula_param_factor;
    mf += p.formula_mult_factor;
  }
  c.formula_param_factor = pf / parts.size();
  c.formula_mult_factor = mf / parts.size();
  return c;
}

}  // namespace

CostReport audit_model(const Model& model) {
  CostReport report;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    LayerCost c;
    switch (layer.kind) {
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead:
        c = affine_cost(layer.label(i), *layer.linear);
        break;
      case Layer::Kind::Dense:
        c.name = layer.label(i);
        c.free_weights = c.dense_weights = layer.dense->W.shape[0] * layer.dense->W.shape[1];
        c.free_biases = c.dense_biases = layer.dense->b.shape[0];
        c.naive_mults = c.symmetric_mults = c.dense_weights;
        break;
      case Layer::Kind::BatchNorm: {
        c.name = layer.label(i);
        const auto& bn = *layer.bn;
        c.free_weights = bn.gpat.free_param_count();
        c.free_biases = bn.bpat.free_param_count();
        c.dense_weights = bn.layout.size();
        c.dense_biases = bn.layout.size();
        c.naive_mults = c.symmetric_mults = bn.layout.size();
        break;
      }
      case Layer::Kind::Conv1D: {
        const auto& cv = *layer.conv;
        // per output frame; each tap shares the fully connected pattern
        ChiralLinear tap = ChiralLinear::create(cv.in_layout, cv.out_layout);
        c = affine_cost(layer.label(i), tap);
        c.free_weights *= cv.kernel_size;
        c.dense_weights *= cv.kernel_size;
        c.naive_mults *= cv.kernel_size;
        c.symmetric_mults *= cv.kernel_size;
        break;
      }
      case Layer::Kind::LSTM: {
        const auto& m = *layer.lstm;
        c = sum_parts(layer.label(i),
                      {&m.ii, &m.hi, &m.io, &m.ho, &m.iff, &m.hf, &m.ig, &m.hg});
        break;
      }
      case Layer::Kind::GRU: {
        const auto& m = *layer.gru;
        c = sum_parts(layer.label(i), {&m.iz, &m.hz, &m.ir, &m.hr, &m.in_, &m.hn});
        break;
      }
      default: continue;  // activation / dropout carry no parameters
    }
    if (c.free_weights > c.dense_weights || c.free_biases > c.dense_biases ||
        c.symmetric_mults > c.naive_mults)
      throw ValidationError("audit: layer " + c.name + " exceeds its dense baseline");
    report.layers.push_back(std::move(c));
  }
  return report;
}

}  // namespace chirality
