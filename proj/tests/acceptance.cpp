// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <chrono>
#include <cstdio>

#include "chirality/accounting.hpp"
#include "chirality/harness.hpp"
#include "chirality/model.hpp"

using namespace chirality;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%-4s %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

JointLayout random_layout(std::mt19937_64& rng, int max_pairs = 3, int max_dims = 4) {
  std::uniform_int_distribution<int> pp(0, max_pairs), cc(0, 2), dd(1, max_dims);
  int pairs = pp(rng), center = cc(rng);
  if (pairs + center == 0) center = 1;
  int dims = dd(rng);
  std::set<int> neg;
  std::uniform_int_distribution<int> coin(0, 1);
  for (int d = 0; d < dims; ++d)
    if (coin(rng)) neg.insert(d);
  return synthetic_layout(pairs, center, dims, neg);
}

Eigen::MatrixXd random_batch(long rows, long cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
  return m;
}

// ------------------------------------------------------------------------

void criterion_equivariance_suite() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(101);

  // one layer of every kind, layouts up to 8 joints x 4 dims
  JointLayout a = synthetic_layout(3, 2, 4, {0, 2});  // 8 joints, 4 dims
  JointLayout b = synthetic_layout(2, 2, 3, {0});
  JointLayout inv_out = center_layout(2, 2);

  Model m;
  m.in_layout = a;
  m.out_layout = a;
  auto push = [&](Layer l) { m.layers.push_back(std::move(l)); };
  {
    Layer l;
    l.kind = Layer::Kind::Linear;
    l.linear = ChiralLinear::create(a, b);
    push(l);
  }
  for (int dil : {1, 3}) {
    Layer l;
    l.kind = Layer::Kind::Conv1D;
    l.conv = ChiralConv1D::create(a, b, 3, dil);
    push(l);
  }
  {
    Layer l;
    l.kind = Layer::Kind::BatchNorm;
    l.bn = ChiralBatchNorm::create(a);
    push(l);
  }
  {
    Layer l;
    l.kind = Layer::Kind::Dropout;
    l.dropout = Dropout::create(0.3);
    l.elem_layout = a;
    push(l);
  }
  for (Activation act : {Activation::Tanh, Activation::HardTanh, Activation::SoftSign}) {
    Layer l;
    l.kind = Layer::Kind::Activation;
    l.act = act;
    l.elem_layout = a;
    push(l);
  }
  {
    Layer l;
    l.kind = Layer::Kind::LSTM;
    l.lstm = ChiralLSTM::create(a, b);
    push(l);
  }
  {
    Layer l;
    l.kind = Layer::Kind::GRU;
    l.gru = ChiralGRU::create(a, b);
    push(l);
  }
  {
    Layer l;
    l.kind = Layer::Kind::InvarianceHead;
    l.linear = ChiralLinear::invariance_head(a, inv_out);
    push(l);
  }

  auto checks = equivariance_suite(m, 100, rng);
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, c.violation);
  double secs = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max violation %.2e over %zu checks x 100 trials, %.1f s", worst,
                checks.size(), secs);
  report("equivariance-suite", worst <= 1e-10 && secs < 60.0, buf);
}

void criterion_commutation_identity() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    JointLayout in = random_layout(rng);
    JointLayout out = random_layout(rng);
    ChiralLinear l = ChiralLinear::create(in, out);
    l.init_uniform(rng);
    Eigen::MatrixXd W = l.materialize_weight().mat();
    Eigen::MatrixXd Tin = transform_as_dense(make_transform(in));
    Eigen::MatrixXd Tout = transform_as_dense(make_transform(out));
    worst = std::max(worst, (W * Tin - Tout * W).cwiseAbs().maxCoeff());
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |W T_in - T_out W| = %.2e over 100 specs", worst);
  report("commutation-identity", worst <= 1e-14, buf);
}

void criterion_negative_controls() {
  std::mt19937_64 rng(303);
  JointLayout layout = synthetic_layout(2, 1, 2, {0});
  ChiralityTransform t = make_transform(layout);

  // (a) relu instead of an odd activation
  double relu_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd x = random_batch(3, layout.size(), rng);
    Eigen::MatrixXd fx = x.cwiseMax(0.0);
    Eigen::MatrixXd ftx = apply_transform(t, x).cwiseMax(0.0);
    relu_worst = std::max(relu_worst, (apply_transform(t, fx) - ftx).cwiseAbs().maxCoeff());
  }

  // (b) LSTM with fully chiral gates
  JointLayout hid = synthetic_layout(2, 1, 2, {0});
  ChiralLSTM naive = ChiralLSTM::create(layout, hid, /*naive_gates=*/true);
  auto th = make_transform(hid);
  double lstm_worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    naive.init_uniform(rng);
    Eigen::MatrixXd x = random_batch(2, layout.size(), rng);
    Eigen::MatrixXd h = random_batch(2, hid.size(), rng);
    Eigen::MatrixXd c = random_batch(2, hid.size(), rng);
    auto s = naive.step(x, h, c);
    auto st = naive.step(apply_transform(t, x), apply_transform(th, h),
                         apply_transform(th, c));
    lstm_worst = std::max(lstm_worst, (apply_transform(th, s.h) - st.h).cwiseAbs().maxCoeff());
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf), "relu violation %.2e, naive-gate LSTM violation %.2e",
                relu_worst, lstm_worst);
  report("negative-controls", relu_worst > 1e-3 && lstm_worst > 1e-3, buf);
}

void criterion_accounting() {
  JointLayout h36 = h36m17_layout(2, {0});
  bool param_ok = param_reduction_factor(h36, h36) == Rational(121, 289);
  bool mult_ok = mult_reduction_factor(h36) == Rational(11, 17);
  ChiralLinear l = ChiralLinear::create(h36, h36);
  long sym = l.symmetric_mult_count(), naive = l.naive_mult_count();
  bool count_ok = sym * 17 <= naive * 11;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "121/289 %s, 11/17 %s, sym %ld vs naive %ld",
                param_ok ? "exact" : "WRONG", mult_ok ? "exact" : "WRONG", sym, naive);
  report("accounting-exactness", param_ok && mult_ok && count_ok, buf);
}

Model gradcheck_model() {
  JointLayout a = synthetic_layout(1, 1, 2, {0});
  JointLayout b = synthetic_layout(1, 1, 2, {0});
  Model m;
  m.in_layout = a;
  m.out_layout = b;
  Layer lin;
  lin.kind = Layer::Kind::Linear;
  lin.linear = ChiralLinear::create(a, b);
  m.layers.push_back(lin);
  Layer inv;
  inv.kind = Layer::Kind::InvarianceHead;
  inv.linear = ChiralLinear::invariance_head(a, center_layout(2, 1));
  m.layers.push_back(inv);
  Layer den;
  den.kind = Layer::Kind::Dense;
  den.dense = DenseLinear::create(a.size(), b.size());
  m.layers.push_back(den);
  Layer bn;
  bn.kind = Layer::Kind::BatchNorm;
  bn.bn = ChiralBatchNorm::create(a);
  m.layers.push_back(bn);
  Layer conv;
  conv.kind = Layer::Kind::Conv1D;
  conv.conv = ChiralConv1D::create(a, b, 3, 2);
  m.layers.push_back(conv);
  Layer lstm;
  lstm.kind = Layer::Kind::LSTM;
  lstm.lstm = ChiralLSTM::create(a, b);
  m.layers.push_back(lstm);
  Layer gru;
  gru.kind = Layer::Kind::GRU;
  gru.gru = ChiralGRU::create(a, b);
  m.layers.push_back(gru);
  return m;
}

void criterion_gradients() {
  std::mt19937_64 rng(404);
  Model m = gradcheck_model();
  auto checks = gradcheck_suite(m, 1e-6, rng);
  double worst = 0.0;
  for (const auto& c : checks) worst = std::max(worst, c.violation);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max grad error %.2e over %zu layer kinds", worst,
                checks.size());
  report("gradient-checks", worst <= 1e-5, buf);
}

Json chiral_linear_config(const JointLayout& in, const JointLayout& out, int epochs,
                          double lr, std::uint64_t seed) {
  Json j;
  j["schema"] = kSchemaTag;
  j["in_layout"] = layout_to_json(in);
  j["out_layout"] = layout_to_json(out);
  j["seed"] = seed;
  Json l;
  l["kind"] = "linear";
  l["in_layout"] = layout_to_json(in);
  l["out_layout"] = layout_to_json(out);
  j["layers"] = Json::array({l});
  Json opt;
  opt["kind"] = "adam";
  opt["lr"] = lr;
  opt["epochs"] = epochs;
  j["optimizer"] = opt;
  return j;
}

void criterion_flip_average() {
  JointLayout in = h36m17_layout(2, {0});
  JointLayout out = h36m17_layout(3, {0});
  Task task = gen_task(in, out, "linear", 128, 0.05, 71);
  Model m = model_from_json(chiral_linear_config(in, out, 50, 0.05, 7));
  train(m, task);

  long m_one = 0, m_two = 0;
  Eigen::MatrixXd one = m.forward_eval(task.X, &m_one);
  ChiralityTransform tin = make_transform(in), tout = make_transform(out);
  Eigen::MatrixXd two =
      0.5 * (one + apply_transform(tout, m.forward_eval(apply_transform(tin, task.X), &m_two)));
  double per_sample = (one - two).cwiseAbs().maxCoeff();
  long flip_mults = 0;
  evaluate(m, task, EvalMode::FlipAveraged, &flip_mults);
  bool ok = per_sample <= 1e-10 && 2 * flip_mults <= m_one + m_two;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "per-sample gap %.2e, %ld vs two-pass %ld mults",
                per_sample, flip_mults, m_one + m_two);
  report("flip-average-equivalence", ok, buf);
}

void criterion_convergence() {
  auto t0 = Clock::now();
  JointLayout in = h36m17_layout(2, {0});
  JointLayout out = h36m17_layout(3, {0});
  Task task = gen_task(in, out, "linear", 256, 0.0, 99);
  Json cfg = chiral_linear_config(in, out, 500, 0.1, 13);
  cfg["optimizer"]["lr_decay"] = 0.985;
  Model m = model_from_json(cfg);
  TrainResult r = train(m, task);
  double secs = seconds_since(t0);
  char buf[96];
  std::snprintf(buf, sizeof(buf), "final MPJPE %.2e after %d epochs, %.1f s", r.final_loss,
                r.epochs_run, secs);
  report("synthetic-convergence", r.final_loss <= 1e-3 && secs < 30.0, buf);
}

void criterion_limited_data() {
  auto t0 = Clock::now();
  JointLayout in = h36m17_layout(2, {0});
  JointLayout out = h36m17_layout(3, {0});
  Task full = gen_task(in, out, "linear", 2200, 0.02, 55);
  Task train_task{in, out, full.X.topRows(2000), full.Y.topRows(2000)};
  Task val_task{in, out, full.X.bottomRows(200), full.Y.bottomRows(200)};

  // parameter-matched dense baseline: bottleneck sized to the chiral layer's
  // free parameter count
  ChiralLinear probe = ChiralLinear::create(in, out);
  long free_total = probe.free_weight_count() + probe.free_bias_count();
  long h = std::max<long>(1, free_total / (in.size() + out.size() + 1));

  std::vector<double> chiral_err, dense_err;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Model cm = model_from_json(chiral_linear_config(in, out, 300, 0.05, seed));
    train(cm, train_task, 0.05);
    chiral_err.push_back(evaluate(cm, val_task, EvalMode::Plain));

    Json dj = chiral_linear_config(in, out, 300, 0.05, seed);
    Json d1, d2;
    d1["kind"] = "dense";
    d1["in_dim"] = in.size();
    d1["out_dim"] = h;
    d2["kind"] = "dense";
    d2["in_dim"] = h;
    d2["out_dim"] = out.size();
    dj["layers"] = Json::array({d1, d2});
    Model dm = model_from_json(dj);
    train(dm, train_task, 0.05);
    dense_err.push_back(evaluate(dm, val_task, EvalMode::Plain));
  }
  std::sort(chiral_err.begin(), chiral_err.end());
  std::sort(dense_err.begin(), dense_err.end());
  double cmed = chiral_err[2], dmed = dense_err[2];
  double secs = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "5%% data, median MPJPE chiral %.3e vs dense(h=%ld) %.3e, %.0f s", cmed, h,
                dmed, secs);
  report("limited-data-trend", cmed <= dmed && secs < 600.0, buf);
}

void criterion_batchnorm_fixed_points() {
  JointLayout io = synthetic_layout(2, 1, 2, {0});
  Json j = chiral_linear_config(io, io, 80, 0.02, 17);
  Json l1 = j["layers"][0];
  Json bn;
  bn["kind"] = "batchnorm";
  bn["layout"] = layout_to_json(io);
  Json act;
  act["kind"] = "activation";
  act["fn"] = "tanh";
  act["layout"] = layout_to_json(io);
  j["layers"] = Json::array({l1, bn, act, l1});
  j["augment_prob"] = 0.5;
  Model m = model_from_json(j);
  Task task = gen_task(io, io, "mlp", 128, 0.0, 61);
  train(m, task);

  const ChiralBatchNorm& state = *m.layers[1].bn;
  ChiralityTransform t = make_transform(io);
  ChiralityTransform sw = make_swap_transform(io);
  Eigen::MatrixXd mu = state.running_mean.mat();
  Eigen::MatrixXd var = state.running_var.mat();
  double mu_gap = (apply_transform(t, mu) - mu).cwiseAbs().maxCoeff();
  double var_gap = (apply_transform(sw, var) - var).cwiseAbs().maxCoeff();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "|T(mu)-mu| %.2e, |swap(var)-var| %.2e", mu_gap, var_gap);
  report("batchnorm-fixed-points", mu_gap <= 1e-6 && var_gap <= 1e-6, buf);
}

void criterion_serialization() {
  JointLayout in = synthetic_layout(2, 1, 2, {0});
  JointLayout out = synthetic_layout(2, 1, 2, {0});
  Task task = gen_task(in, out, "linear", 64, 0.01, 77);

  Model a = model_from_json(chiral_linear_config(in, out, 40, 0.05, 23));
  Model b = model_from_json(chiral_linear_config(in, out, 40, 0.05, 23));
  train(a, task);
  train(b, task);
  std::string sa = model_to_json(a, true).dump(2);
  std::string sb = model_to_json(b, true).dump(2);
  bool deterministic = sa == sb;

  Model rt = model_from_json(model_to_json(a, true));
  bool stable = model_to_json(rt, true).dump(2) == sa;

  char buf[96];
  std::snprintf(buf, sizeof(buf), "seed-deterministic %s, round-trip byte-stable %s",
                deterministic ? "yes" : "NO", stable ? "yes" : "NO");
  report("serialization", deterministic && stable, buf);
}

}  // namespace

int main() {
  criterion_equivariance_suite();
  criterion_commutation_identity();
  criterion_negative_controls();
  criterion_accounting();
  criterion_gradients();
  criterion_flip_average();
  criterion_convergence();
  criterion_limited_data();
  criterion_batchnorm_fixed_points();
  criterion_serialization();
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
