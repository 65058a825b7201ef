#include "chirality/model.hpp"

#include <cmath>

#include "chirality/gradcheck.hpp"

namespace chirality {

// --------------------------------------------------------------------------
// DenseLinear

DenseLinear DenseLinear::create(long in, long out) {
  if (in <= 0 || out <= 0) throw ValidationError("dense: non-positive dimension");
  DenseLinear d;
  d.W = Tensor::zeros({out, in});
  d.b = Tensor::zeros({out});
  return d;
}

void DenseLinear::init_uniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(W.shape[1]));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : W.data) v = dist(rng);
  for (double& v : b.data) v = dist(rng);
}

Eigen::MatrixXd DenseLinear::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != W.shape[1]) throw ValidationError("dense: input width mismatch");
  Eigen::MatrixXd y = x * W.mat().transpose();
  y.rowwise() += b.mat().row(0);
  return y;
}

DenseLinear::Bound DenseLinear::bind(Tape& tape, bool requires_grad) const {
  Bound bd;
  bd.wvar = tape.leaf(W, requires_grad);
  bd.bvar = tape.leaf(b, requires_grad);
  bd.weight_t = transpose(bd.wvar);
  return bd;
}

Var DenseLinear::forward(Tape& tape, const Bound& bound, Var x) const {
  (void)tape;
  return add(matmul(x, bound.weight_t), bound.bvar);
}

std::vector<Tensor*> DenseLinear::params() { return {&W, &b}; }

// --------------------------------------------------------------------------
// Layer

std::string Layer::label(size_t index) const {
  const char* k = "?";
  switch (kind) {
    case Kind::Linear: k = "linear"; break;
    case Kind::InvarianceHead: k = "invariance_head"; break;
    case Kind::Dense: k = "dense"; break;
    case Kind::Activation: k = "activation"; break;
    case Kind::BatchNorm: k = "batchnorm"; break;
    case Kind::Dropout: k = "dropout"; break;
    case Kind::Conv1D: k = "conv1d"; break;
    case Kind::LSTM: k = "lstm"; break;
    case Kind::GRU: k = "gru"; break;
  }
  return std::to_string(index) + ":" + k;
}

long Layer::in_size() const {
  switch (kind) {
    case Kind::Linear:
    case Kind::InvarianceHead: return linear->n_in();
    case Kind::Dense: return dense->W.shape[1];
    case Kind::Activation:
    case Kind::Dropout: return elem_layout->size();
    case Kind::BatchNorm: return bn->layout.size();
    case Kind::Conv1D: return conv->wpat.n_in;
    case Kind::LSTM: return lstm->in_layout.size();
    case Kind::GRU: return gru->in_layout.size();
  }
  return 0;
}

long Layer::out_size() const {
  switch (kind) {
    case Kind::Linear:
    case Kind::InvarianceHead: return linear->n_out();
    case Kind::Dense: return dense->W.shape[0];
    case Kind::Activation:
    case Kind::Dropout: return elem_layout->size();
    case Kind::BatchNorm: return bn->layout.size();
    case Kind::Conv1D: return conv->wpat.n_out;
    case Kind::LSTM: return lstm->hidden_layout.size();
    case Kind::GRU: return gru->hidden_layout.size();
  }
  return 0;
}

std::vector<Tensor*> Layer::params() {
  switch (kind) {
    case Kind::Linear:
    case Kind::InvarianceHead: return linear->params();
    case Kind::Dense: return dense->params();
    case Kind::BatchNorm: return bn->params();
    case Kind::Conv1D: return conv->params();
    case Kind::LSTM: return lstm->params();
    case Kind::GRU: return gru->params();
    default: return {};
  }
}

// --------------------------------------------------------------------------
// Model

bool Model::sequential() const {
  for (const Layer& l : layers)
    if (l.sequential()) return true;
  return false;
}

bool Model::fully_chiral() const {
  for (const Layer& l : layers)
    if (!l.chiral()) return false;
  return true;
}

void Model::init_params(std::mt19937_64& rng) {
  for (Layer& l : layers) {
    switch (l.kind) {
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead: l.linear->init_uniform(rng); break;
      case Layer::Kind::Dense: l.dense->init_uniform(rng); break;
      case Layer::Kind::Conv1D: l.conv->init_uniform(rng); break;
      case Layer::Kind::LSTM: l.lstm->init_uniform(rng); break;
      case Layer::Kind::GRU: l.gru->init_uniform(rng); break;
      default: break;  // batchnorm keeps gamma=1/beta=0; others have no params
    }
  }
}

std::vector<Tensor*> Model::params() {
  std::vector<Tensor*> ps;
  for (Layer& l : layers)
    for (Tensor* t : l.params()) ps.push_back(t);
  return ps;
}

Eigen::MatrixXd Model::forward_eval(const Eigen::MatrixXd& x, long* mult_count) const {
  Eigen::MatrixXd h = x;
  long mults = 0;
  for (const Layer& l : layers) {
    switch (l.kind) {
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead: {
        long m = 0;
        h = l.linear->symmetric_forward(h, &m);
        mults += m;
        break;
      }
      case Layer::Kind::Dense:
        h = l.dense->forward(h);
        mults += l.dense->W.shape[0] * l.dense->W.shape[1];
        break;
      case Layer::Kind::Activation: h = apply_activation(l.act, h); break;
      case Layer::Kind::BatchNorm: h = l.bn->forward_eval(h); break;
      case Layer::Kind::Dropout: break;  // eval identity
      default:
        throw ValidationError("forward_eval: sequence layer in feed-forward pass");
    }
  }
  if (mult_count) *mult_count = mults;
  return h;
}

Eigen::MatrixXd Model::forward_eval_naive(const Eigen::MatrixXd& x, long* mult_count) const {
  Eigen::MatrixXd h = x;
  long mults = 0;
  for (const Layer& l : layers) {
    switch (l.kind) {
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead:
        h = l.linear->forward(h);
        mults += l.linear->naive_mult_count();
        break;
      case Layer::Kind::Dense:
        h = l.dense->forward(h);
        mults += l.dense->W.shape[0] * l.dense->W.shape[1];
        break;
      case Layer::Kind::Activation: h = apply_activation(l.act, h); break;
      case Layer::Kind::BatchNorm: h = l.bn->forward_eval(h); break;
      case Layer::Kind::Dropout: break;
      default:
        throw ValidationError("forward_eval: sequence layer in feed-forward pass");
    }
  }
  if (mult_count) *mult_count = mults;
  return h;
}

BoundModel Model::bind(Tape& tape, bool requires_grad) {
  if (sequential())
    throw ValidationError("bind: sequence models are not trainable through this path");
  BoundModel bm;
  for (Layer& l : layers) {
    BoundModel::BoundLayer bl;
    switch (l.kind) {
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead: {
        bl.affine = l.linear->bind(tape, requires_grad);
        for (Var v : bl.affine->wvars) bm.param_vars.push_back(v);
        for (Var v : bl.affine->bvars) bm.param_vars.push_back(v);
        break;
      }
      case Layer::Kind::Dense: {
        bl.dense = l.dense->bind(tape, requires_grad);
        bm.param_vars.push_back(bl.dense->wvar);
        bm.param_vars.push_back(bl.dense->bvar);
        break;
      }
      case Layer::Kind::BatchNorm: {
        bl.bn = l.bn->bind(tape, requires_grad);
        for (Var v : bl.bn->gvars) bm.param_vars.push_back(v);
        for (Var v : bl.bn->bvars) bm.param_vars.push_back(v);
        break;
      }
      default: break;
    }
    bm.layers.push_back(std::move(bl));
  }
  return bm;
}

Var Model::forward(Tape& tape, BoundModel& bound, Var x, bool training,
                   std::mt19937_64* rng) {
  Var h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    Layer& l = layers[i];
    BoundModel::BoundLayer& bl = bound.layers[i];
    switch (l.kind) {
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead:
        h = l.linear->forward(tape, *bl.affine, h);
        break;
      case Layer::Kind::Dense: h = l.dense->forward(tape, *bl.dense, h); break;
      case Layer::Kind::Activation: h = apply_activation(tape, l.act, h); break;
      case Layer::Kind::BatchNorm:
        h = training ? l.bn->forward_train(tape, *bl.bn, h)
                     : l.bn->forward_eval(tape, *bl.bn, h);
        break;
      case Layer::Kind::Dropout:
        if (training && rng) h = l.dropout->forward_train(tape, h, *rng);
        break;
      default:
        throw ValidationError("forward: sequence layer in feed-forward pass");
    }
  }
  return h;
}

// --------------------------------------------------------------------------
// JSON

namespace {

Json affine_params_json(const ChiralLinear& l) {
  Json j = Json::object();
  for (size_t i = 0; i < l.wpat.blocks.size(); ++i)
    j[l.wpat.blocks[i].name] = tensor_to_json(l.wblocks[i]);
  for (size_t i = 0; i < l.bpat.blocks.size(); ++i)
    j[l.bpat.blocks[i].name] = tensor_to_json(l.bblocks[i]);
  return j;
}

void affine_params_load(ChiralLinear& l, const Json& j) {
  for (size_t i = 0; i < l.wpat.blocks.size(); ++i)
    l.wblocks[i] = tensor_from_json(j.at(l.wpat.blocks[i].name));
  for (size_t i = 0; i < l.bpat.blocks.size(); ++i)
    l.bblocks[i] = tensor_from_json(j.at(l.bpat.blocks[i].name));
}

Json layer_params_json(const Layer& l) {
  switch (l.kind) {
    case Layer::Kind::Linear:
    case Layer::Kind::InvarianceHead: return affine_params_json(*l.linear);
    case Layer::Kind::Dense: {
      Json j;
      j["W"] = tensor_to_json(l.dense->W);
      j["b"] = tensor_to_json(l.dense->b);
      return j;
    }
    case Layer::Kind::BatchNorm: {
      Json j;
      Json g = Json::object(), b = Json::object();
      for (size_t i = 0; i < l.bn->gpat.blocks.size(); ++i)
        g[l.bn->gpat.blocks[i].name] = tensor_to_json(l.bn->gblocks[i]);
      for (size_t i = 0; i < l.bn->bpat.blocks.size(); ++i)
        b[l.bn->bpat.blocks[i].name] = tensor_to_json(l.bn->bblocks[i]);
      j["gamma"] = std::move(g);
      j["beta"] = std::move(b);
      j["running_mean"] = tensor_to_json(l.bn->running_mean);
      j["running_var"] = tensor_to_json(l.bn->running_var);
      return j;
    }
    case Layer::Kind::Conv1D: {
      Json j;
      Json taps = Json::array();
      for (int t = 0; t < l.conv->kernel_size; ++t) {
        Json tj = Json::object();
        for (size_t i = 0; i < l.conv->wpat.blocks.size(); ++i)
          tj[l.conv->wpat.blocks[i].name] = tensor_to_json(l.conv->tap_wblocks[t][i]);
        taps.push_back(std::move(tj));
      }
      j["taps"] = std::move(taps);
      Json bj = Json::object();
      for (size_t i = 0; i < l.conv->bpat.blocks.size(); ++i)
        bj[l.conv->bpat.blocks[i].name] = tensor_to_json(l.conv->bblocks[i]);
      j["bias"] = std::move(bj);
      return j;
    }
    case Layer::Kind::LSTM: {
      Json j;
      j["ii"] = affine_params_json(l.lstm->ii);
      j["hi"] = affine_params_json(l.lstm->hi);
      j["io"] = affine_params_json(l.lstm->io);
      j["ho"] = affine_params_json(l.lstm->ho);
      j["if"] = affine_params_json(l.lstm->iff);
      j["hf"] = affine_params_json(l.lstm->hf);
      j["ig"] = affine_params_json(l.lstm->ig);
      j["hg"] = affine_params_json(l.lstm->hg);
      return j;
    }
    case Layer::Kind::GRU: {
      Json j;
      j["iz"] = affine_params_json(l.gru->iz);
      j["hz"] = affine_params_json(l.gru->hz);
      j["ir"] = affine_params_json(l.gru->ir);
      j["hr"] = affine_params_json(l.gru->hr);
      j["in"] = affine_params_json(l.gru->in_);
      j["hn"] = affine_params_json(l.gru->hn);
      return j;
    }
    default: return Json::object();
  }
}

void layer_params_load(Layer& l, const Json& j) {
  switch (l.kind) {
    case Layer::Kind::Linear:
    case Layer::Kind::InvarianceHead: affine_params_load(*l.linear, j); break;
    case Layer::Kind::Dense:
      l.dense->W = tensor_from_json(j.at("W"));
      l.dense->b = tensor_from_json(j.at("b"));
      break;
    case Layer::Kind::BatchNorm:
      for (size_t i = 0; i < l.bn->gpat.blocks.size(); ++i)
        l.bn->gblocks[i] = tensor_from_json(j.at("gamma").at(l.bn->gpat.blocks[i].name));
      for (size_t i = 0; i < l.bn->bpat.blocks.size(); ++i)
        l.bn->bblocks[i] = tensor_from_json(j.at("beta").at(l.bn->bpat.blocks[i].name));
      l.bn->running_mean = tensor_from_json(j.at("running_mean"));
      l.bn->running_var = tensor_from_json(j.at("running_var"));
      break;
    case Layer::Kind::Conv1D:
      for (int t = 0; t < l.conv->kernel_size; ++t)
        for (size_t i = 0; i < l.conv->wpat.blocks.size(); ++i)
          l.conv->tap_wblocks[t][i] =
              tensor_from_json(j.at("taps").at(t).at(l.conv->wpat.blocks[i].name));
      for (size_t i = 0; i < l.conv->bpat.blocks.size(); ++i)
        l.conv->bblocks[i] = tensor_from_json(j.at("bias").at(l.conv->bpat.blocks[i].name));
      break;
    case Layer::Kind::LSTM:
      affine_params_load(l.lstm->ii, j.at("ii"));
      affine_params_load(l.lstm->hi, j.at("hi"));
      affine_params_load(l.lstm->io, j.at("io"));
      affine_params_load(l.lstm->ho, j.at("ho"));
      affine_params_load(l.lstm->iff, j.at("if"));
      affine_params_load(l.lstm->hf, j.at("hf"));
      affine_params_load(l.lstm->ig, j.at("ig"));
      affine_params_load(l.lstm->hg, j.at("hg"));
      break;
    case Layer::Kind::GRU:
      affine_params_load(l.gru->iz, j.at("iz"));
      affine_params_load(l.gru->hz, j.at("hz"));
      affine_params_load(l.gru->ir, j.at("ir"));
      affine_params_load(l.gru->hr, j.at("hr"));
      affine_params_load(l.gru->in_, j.at("in"));
      affine_params_load(l.gru->hn, j.at("hn"));
      break;
    default: break;
  }
}

Layer layer_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  Layer l;
  if (kind == "linear" || kind == "invariance_head") {
    JointLayout in = layout_from_json(j.at("in_layout"));
    JointLayout out = layout_from_json(j.at("out_layout"));
    if (kind == "invariance_head") {
      l.kind = Layer::Kind::InvarianceHead;
      l.linear = ChiralLinear::invariance_head(std::move(in), std::move(out));
    } else {
      l.kind = Layer::Kind::Linear;
      l.linear = ChiralLinear::create(std::move(in), std::move(out));
    }
  } else if (kind == "dense") {
    l.kind = Layer::Kind::Dense;
    l.dense = DenseLinear::create(j.at("in_dim").get<long>(), j.at("out_dim").get<long>());
  } else if (kind == "activation") {
    l.kind = Layer::Kind::Activation;
    l.act = parse_activation(j.at("fn").get<std::string>());
    l.elem_layout = layout_from_json(j.at("layout"));
  } else if (kind == "batchnorm") {
    l.kind = Layer::Kind::BatchNorm;
    l.bn = ChiralBatchNorm::create(layout_from_json(j.at("layout")),
                                   j.value("momentum", 0.1), j.value("epsilon", 1e-5));
  } else if (kind == "dropout") {
    l.kind = Layer::Kind::Dropout;
    l.dropout = Dropout::create(j.at("p").get<double>());
    l.elem_layout = layout_from_json(j.at("layout"));
  } else if (kind == "conv1d") {
    l.kind = Layer::Kind::Conv1D;
    l.conv = ChiralConv1D::create(layout_from_json(j.at("in_layout")),
                                  layout_from_json(j.at("out_layout")),
                                  j.at("kernel_size").get<int>(), j.value("dilation", 1),
                                  j.value("stride", 1));
  } else if (kind == "lstm") {
    l.kind = Layer::Kind::LSTM;
    l.lstm = ChiralLSTM::create(layout_from_json(j.at("in_layout")),
                                layout_from_json(j.at("hidden_layout")));
  } else if (kind == "gru") {
    l.kind = Layer::Kind::GRU;
    l.gru = ChiralGRU::create(layout_from_json(j.at("in_layout")),
                              layout_from_json(j.at("hidden_layout")));
  } else {
    throw ValidationError("model: unknown layer kind '" + kind + "'");
  }
  if (j.contains("params")) layer_params_load(l, j.at("params"));
  return l;
}

Json layer_to_json(const Layer& l, bool include_params) {
  Json j;
  switch (l.kind) {
    case Layer::Kind::Linear:
    case Layer::Kind::InvarianceHead:
      j["kind"] = l.kind == Layer::Kind::Linear ? "linear" : "invariance_head";
      j["in_layout"] = layout_to_json(l.linear->in_layout);
      j["out_layout"] = layout_to_json(l.linear->out_layout);
      break;
    case Layer::Kind::Dense:
      j["kind"] = "dense";
      j["in_dim"] = l.dense->W.shape[1];
      j["out_dim"] = l.dense->W.shape[0];
      break;
    case Layer::Kind::Activation:
      j["kind"] = "activation";
      j["fn"] = activation_name(l.act);
      j["layout"] = layout_to_json(*l.elem_layout);
      break;
    case Layer::Kind::BatchNorm:
      j["kind"] = "batchnorm";
      j["layout"] = layout_to_json(l.bn->layout);
      j["momentum"] = l.bn->momentum;
      j["epsilon"] = l.bn->epsilon;
      break;
    case Layer::Kind::Dropout:
      j["kind"] = "dropout";
      j["p"] = l.dropout->p;
      j["layout"] = layout_to_json(*l.elem_layout);
      break;
    case Layer::Kind::Conv1D:
      j["kind"] = "conv1d";
      j["in_layout"] = layout_to_json(l.conv->in_layout);
      j["out_layout"] = layout_to_json(l.conv->out_layout);
      j["kernel_size"] = l.conv->kernel_size;
      j["dilation"] = l.conv->dilation;
      j["stride"] = l.conv->stride;
      break;
    case Layer::Kind::LSTM:
      j["kind"] = "lstm";
      j["in_layout"] = layout_to_json(l.lstm->in_layout);
      j["hidden_layout"] = layout_to_json(l.lstm->hidden_layout);
      break;
    case Layer::Kind::GRU:
      j["kind"] = "gru";
      j["in_layout"] = layout_to_json(l.gru->in_layout);
      j["hidden_layout"] = layout_to_json(l.gru->hidden_layout);
      break;
  }
  if (include_params) j["params"] = layer_params_json(l);
  return j;
}

}  // namespace

Model model_from_json(const Json& j) {
  if (j.value("schema", "") != kSchemaTag)
    throw ValidationError("model: missing or unsupported schema tag");
  Model m;
  m.in_layout = layout_from_json(j.at("in_layout"));
  m.out_layout = layout_from_json(j.at("out_layout"));
  m.seed = j.value("seed", std::uint64_t{1});
  m.augment_prob = j.value("augment_prob", 0.5);
  m.bn_momentum_decay = j.value("bn_momentum_decay", 0.99);
  if (m.augment_prob < 0.0 || m.augment_prob > 1.0)
    throw ValidationError("model: augment_prob must be in [0,1]");
  if (j.contains("optimizer")) {
    const Json& o = j.at("optimizer");
    m.opt.kind = o.value("kind", "adam");
    if (m.opt.kind != "adam" && m.opt.kind != "sgd")
      throw ValidationError("model: optimizer kind must be adam or sgd");
    m.opt.lr = o.value("lr", 0.01);
    m.opt.lr_decay = o.value("lr_decay", 1.0);
    m.opt.beta1 = o.value("beta1", 0.9);
    m.opt.beta2 = o.value("beta2", 0.9999);
    m.opt.momentum = o.value("momentum", 0.9);
    m.opt.epochs = o.value("epochs", 500);
    m.opt.batch_size = o.value("batch_size", 0);
  }
  for (const Json& lj : j.at("layers")) m.layers.push_back(layer_from_json(lj));
  if (m.layers.empty()) throw ValidationError("model: empty layer list");
  long width = m.in_layout.size();
  for (size_t i = 0; i < m.layers.size(); ++i) {
    if (m.layers[i].in_size() != width)
      throw ValidationError("model: layer " + m.layers[i].label(i) + " expects width " +
                            std::to_string(m.layers[i].in_size()) + ", got " +
                            std::to_string(width));
    width = m.layers[i].out_size();
  }
  if (width != m.out_layout.size())
    throw ValidationError("model: final width does not match out_layout");
  return m;
}

Json model_to_json(const Model& m, bool include_params) {
  Json j;
  j["schema"] = kSchemaTag;
  j["in_layout"] = layout_to_json(m.in_layout);
  j["out_layout"] = layout_to_json(m.out_layout);
  j["seed"] = m.seed;
  j["augment_prob"] = m.augment_prob;
  j["bn_momentum_decay"] = m.bn_momentum_decay;
  Json o;
  o["kind"] = m.opt.kind;
  o["lr"] = m.opt.lr;
  o["lr_decay"] = m.opt.lr_decay;
  o["beta1"] = m.opt.beta1;
  o["beta2"] = m.opt.beta2;
  o["momentum"] = m.opt.momentum;
  o["epochs"] = m.opt.epochs;
  o["batch_size"] = m.opt.batch_size;
  j["optimizer"] = std::move(o);
  Json layers = Json::array();
  for (const Layer& l : m.layers) layers.push_back(layer_to_json(l, include_params));
  j["layers"] = std::move(layers);
  return j;
}

// --------------------------------------------------------------------------
// Property suites

namespace {

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd random_batch(long rows, long cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

void randomize_bn(ChiralBatchNorm& bn, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> gd(0.5, 1.5), bd(-0.5, 0.5);
  for (Tensor& t : bn.gblocks)
    for (double& v : t.data) v = gd(rng);
  for (Tensor& t : bn.bblocks)
    for (double& v : t.data) v = bd(rng);
}

}  // namespace

std::vector<EquivarianceCheck> equivariance_suite(const Model& model, int trials,
                                                  std::mt19937_64& rng) {
  std::vector<EquivarianceCheck> out;
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const Layer& layer = model.layers[li];
    EquivarianceCheck chk{layer.label(li), "equivariance", 0.0};
    switch (layer.kind) {
      case Layer::Kind::Dense: continue;  // baseline layer, no symmetry claim
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead: {
        ChiralLinear l = *layer.linear;
        const auto tin = make_transform(l.in_layout);
        const auto tout = make_transform(l.out_layout);
        for (int t = 0; t < trials; ++t) {
          l.init_uniform(rng);
          Eigen::MatrixXd x = random_batch(3, l.n_in(), rng);
          chk.violation = std::max(
              chk.violation,
              max_abs_diff(apply_transform(tout, l.forward(x)), l.forward(apply_transform(tin, x))));
        }
        break;
      }
      case Layer::Kind::Activation: {
        const auto tr = make_transform(*layer.elem_layout);
        for (int t = 0; t < trials; ++t) {
          Eigen::MatrixXd x = random_batch(3, layer.elem_layout->size(), rng);
          chk.violation = std::max(
              chk.violation, max_abs_diff(apply_transform(tr, apply_activation(layer.act, x)),
                                          apply_activation(layer.act, apply_transform(tr, x))));
        }
        break;
      }
      case Layer::Kind::Dropout: {
        // eval mode is the identity; violation identically zero
        const auto tr = make_transform(*layer.elem_layout);
        for (int t = 0; t < trials; ++t) {
          Eigen::MatrixXd x = random_batch(3, layer.elem_layout->size(), rng);
          chk.violation = std::max(
              chk.violation, max_abs_diff(apply_transform(tr, layer.dropout->forward_eval(x)),
                                          layer.dropout->forward_eval(apply_transform(tr, x))));
        }
        chk.property = "equivariance(eval)";
        break;
      }
      case Layer::Kind::BatchNorm: {
        const auto tr = make_transform(layer.bn->layout);
        for (int t = 0; t < trials; ++t) {
          ChiralBatchNorm a = *layer.bn;
          randomize_bn(a, rng);
          ChiralBatchNorm b = a;
          Eigen::MatrixXd x = random_batch(8, a.layout.size(), rng);
          chk.violation =
              std::max(chk.violation, max_abs_diff(apply_transform(tr, a.forward_train(x)),
                                                   b.forward_train(apply_transform(tr, x))));
          // eval mode on the stats just accumulated
          chk.violation =
              std::max(chk.violation, max_abs_diff(apply_transform(tr, a.forward_eval(x)),
                                                   a.forward_eval(apply_transform(tr, x))));
        }
        chk.property = "equivariance(train+eval)";
        break;
      }
      case Layer::Kind::Conv1D: {
        ChiralConv1D c = *layer.conv;
        const auto tin = make_transform(c.in_layout);
        const auto tout = make_transform(c.out_layout);
        for (int t = 0; t < trials; ++t) {
          c.init_uniform(rng);
          const long frames = c.receptive_field() + 2;
          std::vector<Eigen::MatrixXd> xs, xts;
          for (long f = 0; f < frames; ++f) {
            xs.push_back(random_batch(2, c.wpat.n_in, rng));
            xts.push_back(apply_transform(tin, xs.back()));
          }
          auto ys = c.forward(xs);
          auto yts = c.forward(xts);
          for (size_t f = 0; f < ys.size(); ++f)
            chk.violation =
                std::max(chk.violation, max_abs_diff(apply_transform(tout, ys[f]), yts[f]));
        }
        break;
      }
      case Layer::Kind::LSTM: {
        ChiralLSTM m = *layer.lstm;
        const auto tin = make_transform(m.in_layout);
        const auto th = make_transform(m.hidden_layout);
        const auto psw = make_swap_transform(m.hidden_layout);
        EquivarianceCheck gate{layer.label(li), "gate swap covariance", 0.0};
        for (int t = 0; t < trials; ++t) {
          m.init_uniform(rng);
          Eigen::MatrixXd x = random_batch(2, m.in_layout.size(), rng);
          Eigen::MatrixXd h = random_batch(2, m.hidden_layout.size(), rng);
          Eigen::MatrixXd c = random_batch(2, m.hidden_layout.size(), rng);
          auto s = m.step(x, h, c);
          auto st = m.step(apply_transform(tin, x), apply_transform(th, h),
                           apply_transform(th, c));
          chk.violation = std::max(chk.violation, max_abs_diff(apply_transform(th, s.h), st.h));
          chk.violation = std::max(chk.violation, max_abs_diff(apply_transform(th, s.c), st.c));
          gate.violation =
              std::max(gate.violation, max_abs_diff(apply_transform(psw, s.gate_i), st.gate_i));
          gate.violation =
              std::max(gate.violation, max_abs_diff(apply_transform(psw, s.gate_f), st.gate_f));
        }
        out.push_back(chk);
        out.push_back(gate);
        continue;
      }
      case Layer::Kind::GRU: {
        ChiralGRU m = *layer.gru;
        const auto tin = make_transform(m.in_layout);
        const auto th = make_transform(m.hidden_layout);
        const auto psw = make_swap_transform(m.hidden_layout);
        EquivarianceCheck gate{layer.label(li), "gate swap covariance", 0.0};
        for (int t = 0; t < trials; ++t) {
          m.init_uniform(rng);
          Eigen::MatrixXd x = random_batch(2, m.in_layout.size(), rng);
          Eigen::MatrixXd h = random_batch(2, m.hidden_layout.size(), rng);
          auto s = m.step(x, h);
          auto st = m.step(apply_transform(tin, x), apply_transform(th, h));
          chk.violation = std::max(chk.violation, max_abs_diff(apply_transform(th, s.h), st.h));
          gate.violation =
              std::max(gate.violation, max_abs_diff(apply_transform(psw, s.gate_z), st.gate_z));
          gate.violation =
              std::max(gate.violation, max_abs_diff(apply_transform(psw, s.gate_r), st.gate_r));
        }
        out.push_back(chk);
        out.push_back(gate);
        continue;
      }
    }
    out.push_back(chk);
  }

  if (!model.sequential() && model.fully_chiral()) {
    EquivarianceCheck chk{"model", "end-to-end equivariance", 0.0};
    const auto tin = make_transform(model.in_layout);
    const auto tout = make_transform(model.out_layout);
    Model m = model;
    for (int t = 0; t < trials; ++t) {
      std::mt19937_64 prng(rng());
      m.init_params(prng);
      Eigen::MatrixXd x = random_batch(3, model.in_layout.size(), rng);
      chk.violation = std::max(chk.violation,
                               max_abs_diff(apply_transform(tout, m.forward_eval(x)),
                                            m.forward_eval(apply_transform(tin, x))));
    }
    out.push_back(chk);
  }
  return out;
}

std::vector<EquivarianceCheck> gradcheck_suite(const Model& model, double eps,
                                               std::mt19937_64& rng) {
  std::vector<EquivarianceCheck> out;
  for (size_t li = 0; li < model.layers.size(); ++li) {
    const Layer& layer = model.layers[li];
    EquivarianceCheck chk{layer.label(li), "grad_check", 0.0};
    switch (layer.kind) {
      case Layer::Kind::Linear:
      case Layer::Kind::InvarianceHead: {
        ChiralLinear l = *layer.linear;
        l.init_uniform(rng);
        Eigen::MatrixXd x = random_batch(2, l.n_in(), rng);
        std::vector<Tensor> ps;
        for (const Tensor& t : l.wblocks) ps.push_back(t);
        for (const Tensor& t : l.bblocks) ps.push_back(t);
        const size_t nw = l.wblocks.size();
        chk.violation = grad_check_params(
            [&](Tape& tape, const std::vector<Var>& vars) {
              std::vector<Var> wv(vars.begin(), vars.begin() + nw);
              std::vector<Var> bv(vars.begin() + nw, vars.end());
              Var xx = tape.leaf(Tensor::from_matrix(x), false);
              Var wt = transpose(assemble(tape, l.wpat, wv));
              Var y = add(matmul(xx, wt), assemble(tape, l.bpat, bv));
              return sum(tanh(y));
            },
            ps, eps);
        break;
      }
      case Layer::Kind::Dense: {
        DenseLinear d = *layer.dense;
        d.init_uniform(rng);
        Eigen::MatrixXd x = random_batch(2, d.W.shape[1], rng);
        chk.violation = grad_check_params(
            [&](Tape& tape, const std::vector<Var>& vars) {
              Var xx = tape.leaf(Tensor::from_matrix(x), false);
              return sum(tanh(add(matmul(xx, transpose(vars[0])), vars[1])));
            },
            {d.W, d.b}, eps);
        break;
      }
      case Layer::Kind::BatchNorm: {
        ChiralBatchNorm bn = *layer.bn;
        randomize_bn(bn, rng);
        Eigen::MatrixXd x = random_batch(6, bn.layout.size(), rng);
        std::vector<Tensor> ps;
        for (const Tensor& t : bn.gblocks) ps.push_back(t);
        for (const Tensor& t : bn.bblocks) ps.push_back(t);
        const size_t ng = bn.gblocks.size();
        chk.violation = grad_check_params(
            [&, bn](Tape& tape, const std::vector<Var>& vars) mutable {
              ChiralBatchNorm::Bound bound;
              bound.gvars.assign(vars.begin(), vars.begin() + ng);
              bound.bvars.assign(vars.begin() + ng, vars.end());
              bound.gamma = assemble(tape, bn.gpat, bound.gvars);
              bound.beta = assemble(tape, bn.bpat, bound.bvars);
              Var xx = tape.leaf(Tensor::from_matrix(x), false);
              return sum(tanh(bn.forward_train(tape, bound, xx, false)));
            },
            ps, eps);
        break;
      }
      case Layer::Kind::Conv1D: {
        ChiralConv1D c = *layer.conv;
        c.init_uniform(rng);
        const long frames = c.receptive_field() + 1;
        std::vector<Eigen::MatrixXd> xs;
        for (long f = 0; f < frames; ++f) xs.push_back(random_batch(2, c.wpat.n_in, rng));
        std::vector<Tensor> ps;
        for (const auto& tap : c.tap_wblocks)
          for (const Tensor& t : tap) ps.push_back(t);
        for (const Tensor& t : c.bblocks) ps.push_back(t);
        const size_t per_tap = c.wpat.blocks.size();
        chk.violation = grad_check_params(
            [&](Tape& tape, const std::vector<Var>& vars) {
              ChiralConv1D::Bound bound;
              size_t off = 0;
              for (int t = 0; t < c.kernel_size; ++t) {
                std::vector<Var> wv(vars.begin() + off, vars.begin() + off + per_tap);
                bound.tap_weight_t.push_back(transpose(assemble(tape, c.wpat, wv)));
                off += per_tap;
              }
              std::vector<Var> bv(vars.begin() + off, vars.end());
              bound.bias = assemble(tape, c.bpat, bv);
              std::vector<Var> frames_v;
              for (const auto& xf : xs)
                frames_v.push_back(tape.leaf(Tensor::from_matrix(xf), false));
              auto ys = c.forward(tape, bound, frames_v);
              Var total = sum(tanh(ys[0]));
              for (size_t f = 1; f < ys.size(); ++f) total = add(total, sum(tanh(ys[f])));
              return total;
            },
            ps, eps);
        break;
      }
      case Layer::Kind::LSTM: {
        ChiralLSTM m = *layer.lstm;
        m.init_uniform(rng);
        Eigen::MatrixXd x = random_batch(2, m.in_layout.size(), rng);
        Eigen::MatrixXd h = random_batch(2, m.hidden_layout.size(), rng);
        Eigen::MatrixXd cc = random_batch(2, m.hidden_layout.size(), rng);
        std::vector<Tensor> ps;
        std::vector<const ChiralLinear*> parts = {&m.ii, &m.hi, &m.io, &m.ho,
                                                  &m.iff, &m.hf, &m.ig, &m.hg};
        for (const ChiralLinear* l : parts) {
          for (const Tensor& t : l->wblocks) ps.push_back(t);
          for (const Tensor& t : l->bblocks) ps.push_back(t);
        }
        chk.violation = grad_check_params(
            [&](Tape& tape, const std::vector<Var>& vars) {
              ChiralLSTM::Bound bound;
              BoundAffine* bas[] = {&bound.ii, &bound.hi, &bound.io, &bound.ho,
                                    &bound.iff, &bound.hf, &bound.ig, &bound.hg};
              size_t off = 0;
              for (size_t k = 0; k < parts.size(); ++k) {
                const ChiralLinear* l = parts[k];
                std::vector<Var> wv(vars.begin() + off, vars.begin() + off + l->wblocks.size());
                off += l->wblocks.size();
                std::vector<Var> bv(vars.begin() + off, vars.begin() + off + l->bblocks.size());
                off += l->bblocks.size();
                bas[k]->weight_t = transpose(assemble(tape, l->wpat, wv));
                bas[k]->bias = assemble(tape, l->bpat, bv);
              }
              Var xx = tape.leaf(Tensor::from_matrix(x), false);
              Var hh = tape.leaf(Tensor::from_matrix(h), false);
              Var cv = tape.leaf(Tensor::from_matrix(cc), false);
              auto [h1, c1] = m.step(tape, bound, xx, hh, cv);
              return add(sum(h1), sum(c1));
            },
            ps, eps);
        break;
      }
      case Layer::Kind::GRU: {
        ChiralGRU m = *layer.gru;
        m.init_uniform(rng);
        Eigen::MatrixXd x = random_batch(2, m.in_layout.size(), rng);
        Eigen::MatrixXd h = random_batch(2, m.hidden_layout.size(), rng);
        std::vector<Tensor> ps;
        std::vector<const ChiralLinear*> parts = {&m.iz, &m.hz, &m.ir, &m.hr, &m.in_, &m.hn};
        for (const ChiralLinear* l : parts) {
          for (const Tensor& t : l->wblocks) ps.push_back(t);
          for (const Tensor& t : l->bblocks) ps.push_back(t);
        }
        chk.violation = grad_check_params(
            [&](Tape& tape, const std::vector<Var>& vars) {
              ChiralGRU::Bound bound;
              BoundAffine* bas[] = {&bound.iz, &bound.hz, &bound.ir,
                                    &bound.hr, &bound.in_, &bound.hn};
              size_t off = 0;
              for (size_t k = 0; k < parts.size(); ++k) {
                const ChiralLinear* l = parts[k];
                std::vector<Var> wv(vars.begin() + off, vars.begin() + off + l->wblocks.size());
                off += l->wblocks.size();
                std::vector<Var> bv(vars.begin() + off, vars.begin() + off + l->bblocks.size());
                off += l->bblocks.size();
                bas[k]->weight_t = transpose(assemble(tape, l->wpat, wv));
                bas[k]->bias = assemble(tape, l->bpat, bv);
              }
              Var xx = tape.leaf(Tensor::from_matrix(x), false);
              Var hh = tape.leaf(Tensor::from_matrix(h), false);
              return sum(m.step(tape, bound, xx, hh));
            },
            ps, eps);
        break;
      }
      default: continue;  // no parameters
    }
    out.push_back(chk);
  }
  return out;
}

}  // namespace chirality
