#include "chirality/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace chirality {

Task gen_task(const JointLayout& in, const JointLayout& out, const std::string& teacher,
              long samples, double noise, std::uint64_t seed) {
  if (samples <= 0) throw ValidationError("gen_task: samples must be positive");
  if (noise < 0) throw ValidationError("gen_task: noise must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Task task;
  task.in_layout = in;
  task.out_layout = out;
  task.X.resize(samples, in.size());
  for (long r = 0; r < samples; ++r)
    for (long c = 0; c < task.X.cols(); ++c) task.X(r, c) = gauss(rng);

  if (teacher == "linear") {
    ChiralLinear t = ChiralLinear::create(in, out);
    t.init_uniform(rng);
    task.Y = t.forward(task.X);
  } else if (teacher == "mlp") {
    ChiralLinear t1 = ChiralLinear::create(in, in);
    ChiralLinear t2 = ChiralLinear::create(in, out);
    t1.init_uniform(rng);
    t2.init_uniform(rng);
    task.Y = t2.forward(t1.forward(task.X).array().tanh().matrix());
  } else {
    throw ValidationError("gen_task: teacher must be linear or mlp");
  }

  if (noise > 0)
    for (long r = 0; r < task.Y.rows(); ++r)
      for (long c = 0; c < task.Y.cols(); ++c) task.Y(r, c) += noise * gauss(rng);
  return task;
}

Json task_to_json(const Task& task) {
  Json j;
  j["schema"] = kSchemaTag;
  j["in_layout"] = layout_to_json(task.in_layout);
  j["out_layout"] = layout_to_json(task.out_layout);
  j["X"] = tensor_to_json(Tensor::from_matrix(task.X));
  j["Y"] = tensor_to_json(Tensor::from_matrix(task.Y));
  return j;
}

Task task_from_json(const Json& j) {
  if (j.value("schema", "") != kSchemaTag)
    throw ValidationError("task: missing or unsupported schema tag");
  Task task;
  task.in_layout = layout_from_json(j.at("in_layout"));
  task.out_layout = layout_from_json(j.at("out_layout"));
  Tensor x = tensor_from_json(j.at("X"));
  Tensor y = tensor_from_json(j.at("Y"));
  task.X = x.mat();
  task.Y = y.mat();
  if (task.X.cols() != task.in_layout.size() || task.Y.cols() != task.out_layout.size() ||
      task.X.rows() != task.Y.rows())
    throw ValidationError("task: data shape does not match layouts");
  return task;
}

double mpjpe_metric(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                    const JointLayout& layout) {
  const long dims = layout.dims;
  const long joints = layout.size() / dims;
  double total = 0.0;
  for (long r = 0; r < pred.rows(); ++r)
    for (long jnt = 0; jnt < joints; ++jnt) {
      double sq = 0.0;
      for (long d = 0; d < dims; ++d) {
        const double e = pred(r, jnt * dims + d) - target(r, jnt * dims + d);
        sq += e * e;
      }
      total += std::sqrt(sq);
    }
  return total / (static_cast<double>(pred.rows()) * joints);
}

namespace {

struct AdamState {
  std::vector<Tensor> m, v;
  long t = 0;
};

void apply_update(std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                  const OptimizerConfig& opt, AdamState& state) {
  if (opt.kind == "adam") {
    ++state.t;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      for (size_t k = 0; k < p.data.size(); ++k) {
        const double g = grads[i].data[k];
        double& m = state.m[i].data[k];
        double& v = state.v[i].data[k];
        m = opt.beta1 * m + (1.0 - opt.beta1) * g;
        v = opt.beta2 * v + (1.0 - opt.beta2) * g * g;
        p.data[k] -= opt.lr * (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
      }
    }
  } else {  // sgd with momentum, velocity in state.m
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& p = *params[i];
      for (size_t k = 0; k < p.data.size(); ++k) {
        double& vel = state.m[i].data[k];
        vel = opt.momentum * vel + grads[i].data[k];
        p.data[k] -= opt.lr * vel;
      }
    }
  }
}

}  // namespace

bool augment_pair(Eigen::RowVectorXd& x, Eigen::RowVectorXd& y,
                  const ChiralityTransform& tin, const ChiralityTransform& tout,
                  double prob, std::mt19937_64& rng) {
  if (prob < 0.0 || prob > 1.0) throw ValidationError("augment: prob must be in [0,1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) >= prob) return false;
  x = apply_transform(tin, Eigen::MatrixXd(x)).row(0);
  y = apply_transform(tout, Eigen::MatrixXd(y)).row(0);
  return true;
}

TrainResult train(Model& model, const Task& task, double limit_frac) {
  if (model.sequential())
    throw ValidationError("train: sequence models are not trainable through this path");
  if (limit_frac <= 0.0 || limit_frac > 1.0)
    throw ValidationError("train: limit_frac must be in (0, 1]");
  if (task.X.cols() != model.in_layout.size() || task.Y.cols() != model.out_layout.size())
    throw ValidationError("train: task does not match model layouts");

  std::mt19937_64 init_rng(model.seed);
  std::mt19937_64 aug_rng(model.seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 drop_rng(model.seed ^ 0xc2b2ae3d27d4eb4full);
  std::mt19937_64 shuffle_rng(model.seed ^ 0x165667b19e3779f9ull);
  model.init_params(init_rng);

  // seeded subset for data-limited runs
  std::vector<long> rows(task.X.rows());
  std::iota(rows.begin(), rows.end(), 0);
  if (limit_frac < 1.0) {
    std::shuffle(rows.begin(), rows.end(), shuffle_rng);
    const long keep = std::max<long>(1, std::lround(limit_frac * rows.size()));
    rows.resize(keep);
    std::sort(rows.begin(), rows.end());
  }
  const long n = static_cast<long>(rows.size());

  const auto tin = make_transform(model.in_layout);
  const auto tout = make_transform(model.out_layout);
  const long out_dims = model.out_layout.dims;
  const long out_joints = model.out_layout.size() / out_dims;

  std::vector<Tensor*> params = model.params();
  AdamState state;
  for (Tensor* p : params) {
    state.m.push_back(Tensor::zeros(p->shape));
    state.v.push_back(Tensor::zeros(p->shape));
  }

  const long batch = model.opt.batch_size > 0 ? model.opt.batch_size : n;
  TrainResult result;
  result.samples_used = n;

  OptimizerConfig step_opt = model.opt;
  for (int epoch = 0; epoch < model.opt.epochs; ++epoch) {
    step_opt.lr = model.opt.lr * std::pow(model.opt.lr_decay, static_cast<double>(epoch));
    std::vector<long> order = rows;
    if (batch < n) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    long seen = 0;
    for (long start = 0; start < n; start += batch) {
      const long bsz = std::min(batch, n - start);
      Eigen::MatrixXd xb(bsz, task.X.cols()), yb(bsz, task.Y.cols());
      for (long r = 0; r < bsz; ++r) {
        const long src = order[start + r];
        Eigen::RowVectorXd xr = task.X.row(src), yr = task.Y.row(src);
        augment_pair(xr, yr, tin, tout, model.augment_prob, aug_rng);
        xb.row(r) = xr;
        yb.row(r) = yr;
      }

      Tape tape;
      BoundModel bound = model.bind(tape);
      Var x = tape.leaf(Tensor::from_matrix(xb), false);
      Var y = tape.leaf(Tensor::from_matrix(yb), false);
      Var pred = model.forward(tape, bound, x, /*training=*/true, &drop_rng);
      Var loss = mpjpe(pred, y, out_joints, out_dims);
      const double lv = tape.val(loss).scalar();
      if (!std::isfinite(lv)) throw DivergenceError("training loss diverged");
      tape.backward(loss);

      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Var v : bound.param_vars) grads.push_back(tape.grad(v));
      apply_update(params, grads, step_opt, state);
      epoch_loss += lv * bsz;
      seen += bsz;
    }
    for (Layer& l : model.layers)
      if (l.kind == Layer::Kind::BatchNorm) l.bn->momentum *= model.bn_momentum_decay;
    result.losses.push_back(epoch_loss / seen);
    result.epochs_run = epoch + 1;
  }
  result.final_loss = result.losses.empty() ? 0.0 : result.losses.back();
  return result;
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "plain") return EvalMode::Plain;
  if (name == "flip-averaged" || name == "flip_averaged") return EvalMode::FlipAveraged;
  throw ValidationError("eval mode must be plain or flip-averaged");
}

double evaluate(const Model& model, const Task& task, EvalMode mode, long* mult_count) {
  long mults = 0;
  Eigen::MatrixXd pred;
  if (mode == EvalMode::Plain || model.fully_chiral()) {
    // for a fully equivariant model the flipped pass is the same function,
    // so the flip average collapses to a single pass
    pred = model.forward_eval(task.X, &mults);
  } else {
    const auto tin = make_transform(model.in_layout);
    const auto tout = make_transform(model.out_layout);
    long m2 = 0;
    pred = model.forward_eval(task.X, &mults);
    Eigen::MatrixXd flipped =
        apply_transform(tout, model.forward_eval(apply_transform(tin, task.X), &m2));
    pred = 0.5 * (pred + flipped);
    mults += m2;
  }
  if (mult_count) *mult_count = mults;
  return mpjpe_metric(pred, task.Y, model.out_layout);
}

double flip_average_two_pass(const Model& model, const Task& task, long* mult_count) {
  const auto tin = make_transform(model.in_layout);
  const auto tout = make_transform(model.out_layout);
  long m1 = 0, m2 = 0;
  Eigen::MatrixXd a = model.forward_eval(task.X, &m1);
  Eigen::MatrixXd b =
      apply_transform(tout, model.forward_eval(apply_transform(tin, task.X), &m2));
  if (mult_count) *mult_count = m1 + m2;
  Eigen::MatrixXd pred = 0.5 * (a + b);
  return mpjpe_metric(pred, task.Y, model.out_layout);
}

}  // namespace chirality
