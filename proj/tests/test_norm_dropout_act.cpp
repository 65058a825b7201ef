#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chirality/activation.hpp"
#include "chirality/dropout.hpp"
#include "chirality/gradcheck.hpp"
#include "chirality/normalization.hpp"

using namespace chirality;

namespace {

Eigen::MatrixXd random_batch(long rows, long cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
  return m;
}

}  // namespace

// ---------------------------------------------------------------- batch norm

TEST_CASE("augmented statistics are transform fixed points") {
  std::mt19937_64 rng(3);
  JointLayout layout = synthetic_layout(2, 2, 3, {0});
  ChiralBatchNorm bn = ChiralBatchNorm::create(layout);
  ChiralityTransform t = make_transform(layout);

  Eigen::MatrixXd x = random_batch(9, layout.size(), rng);
  Eigen::RowVectorXd mean, var;
  bn.batch_stats(x, &mean, &var);

  Eigen::MatrixXd mu = mean;
  CHECK((apply_transform(t, mu) - mu).cwiseAbs().maxCoeff() <= 1e-12);

  ChiralityTransform sw = make_swap_transform(layout);
  Eigen::MatrixXd v = var;
  CHECK((apply_transform(sw, v) - v).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("mean vanishes on center-negated coordinates for batch {x, T(x)}") {
  std::mt19937_64 rng(5);
  JointLayout layout = synthetic_layout(1, 2, 2, {0});
  ChiralBatchNorm bn = ChiralBatchNorm::create(layout);
  ChiralityTransform t = make_transform(layout);

  Eigen::MatrixXd x = random_batch(1, layout.size(), rng);
  Eigen::MatrixXd batch(2, layout.size());
  batch.row(0) = x;
  batch.row(1) = apply_transform(t, x);
  Eigen::RowVectorXd mean, var;
  bn.batch_stats(batch, &mean, &var);

  IndexGroups g = index_groups(layout);
  for (int i : g.cn) CHECK(mean(i) == 0.0);
}

TEST_CASE("default parameters with unit running stats act as identity in eval") {
  JointLayout layout = synthetic_layout(1, 1, 2, {0});
  ChiralBatchNorm bn = ChiralBatchNorm::create(layout);
  std::mt19937_64 rng(7);
  Eigen::MatrixXd x = random_batch(3, layout.size(), rng);
  CHECK((bn.forward_eval(x) - x).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("batch norm equivariance in train and eval mode") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> gd(0.5, 1.5), bd(-0.5, 0.5);
  JointLayout layout = synthetic_layout(2, 1, 2, {0});
  ChiralityTransform t = make_transform(layout);
  for (int trial = 0; trial < 50; ++trial) {
    ChiralBatchNorm a = ChiralBatchNorm::create(layout);
    for (Tensor& g : a.gblocks)
      for (double& v : g.data) v = gd(rng);
    for (Tensor& b : a.bblocks)
      for (double& v : b.data) v = bd(rng);
    ChiralBatchNorm b = a;

    Eigen::MatrixXd x = random_batch(6, layout.size(), rng);
    CHECK((apply_transform(t, a.forward_train(x)) - b.forward_train(apply_transform(t, x)))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    // running stats from the two passes coincide up to the transform, so eval
    // is equivariant too
    CHECK((apply_transform(t, a.forward_eval(x)) - a.forward_eval(apply_transform(t, x)))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }
}

TEST_CASE("materialized gamma is swap-symmetric and beta is odd") {
  JointLayout layout = synthetic_layout(2, 1, 3, {0, 1});
  ChiralBatchNorm bn = ChiralBatchNorm::create(layout);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Tensor& g : bn.gblocks)
    for (double& v : g.data) v = unif(rng);
  for (Tensor& b : bn.bblocks)
    for (double& v : b.data) v = unif(rng);

  Eigen::MatrixXd gamma = bn.materialize_gamma().mat();
  Eigen::MatrixXd beta = bn.materialize_beta().mat();
  ChiralityTransform sw = make_swap_transform(layout);
  ChiralityTransform t = make_transform(layout);
  CHECK((apply_transform(sw, gamma) - gamma).cwiseAbs().maxCoeff() == 0.0);
  CHECK((apply_transform(t, beta) - beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("running statistics EMA update") {
  JointLayout layout = center_layout(2, 1);
  ChiralBatchNorm bn = ChiralBatchNorm::create(layout, 0.5);
  Eigen::MatrixXd x(2, 2);
  x << 1, 3, 3, 5;  // mean [2,4], biased var [1,1]
  bn.forward_train(x);
  CHECK(bn.running_mean.data[0] == doctest::Approx(0.5 * 2.0));
  CHECK(bn.running_mean.data[1] == doctest::Approx(0.5 * 4.0));
  CHECK(bn.running_var.data[0] == doctest::Approx(0.5 * 1.0 + 0.5 * 1.0));
}

TEST_CASE("tape batch norm matches the plain path and passes grad check") {
  std::mt19937_64 rng(17);
  JointLayout layout = synthetic_layout(1, 1, 2, {0});
  ChiralBatchNorm bn = ChiralBatchNorm::create(layout);
  std::uniform_real_distribution<double> gd(0.5, 1.5);
  for (Tensor& g : bn.gblocks)
    for (double& v : g.data) v = gd(rng);
  Eigen::MatrixXd x = random_batch(5, layout.size(), rng);

  ChiralBatchNorm plain = bn;
  Eigen::MatrixXd expect = plain.forward_train(x);
  Tape tape;
  ChiralBatchNorm tape_bn = bn;
  auto bound = tape_bn.bind(tape);
  Var y = tape_bn.forward_train(tape, bound, tape.leaf(Tensor::from_matrix(x)));
  CHECK((Eigen::MatrixXd(tape.val(y).mat()) - expect).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((Eigen::Map<Eigen::VectorXd>(tape_bn.running_mean.data.data(), layout.size()) -
         Eigen::Map<Eigen::VectorXd>(plain.running_mean.data.data(), layout.size()))
            .cwiseAbs()
            .maxCoeff() <= 1e-12);

  std::vector<Tensor> params;
  for (const Tensor& t : bn.gblocks) params.push_back(t);
  for (const Tensor& t : bn.bblocks) params.push_back(t);
  const size_t ng = bn.gblocks.size();
  double err = grad_check_params(
      [&, bn](Tape& tp, const std::vector<Var>& vars) mutable {
        ChiralBatchNorm::Bound bd;
        bd.gvars.assign(vars.begin(), vars.begin() + ng);
        bd.bvars.assign(vars.begin() + ng, vars.end());
        bd.gamma = assemble(tp, bn.gpat, bd.gvars);
        bd.beta = assemble(tp, bn.bpat, bd.bvars);
        return sum(tanh(bn.forward_train(tp, bd, tp.leaf(Tensor::from_matrix(x)), false)));
      },
      params);
  CHECK(err <= 1e-5);
}

// ------------------------------------------------------------------ dropout

TEST_CASE("dropout validation and eval identity") {
  CHECK_THROWS_AS(Dropout::create(1.0), ValidationError);
  CHECK_THROWS_AS(Dropout::create(-0.1), ValidationError);
  Dropout d = Dropout::create(0.0);
  std::mt19937_64 rng(1);
  Eigen::MatrixXd x = random_batch(2, 4, rng);
  CHECK((d.forward_train(x, rng) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((d.forward_eval(x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fixed seed reproduces the mask; surviving entries are rescaled") {
  Dropout d = Dropout::create(0.4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 6);
  std::mt19937_64 r1(99), r2(99);
  Eigen::MatrixXd a = d.forward_train(x, r1);
  Eigen::MatrixXd b = d.forward_train(x, r2);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  for (long i = 0; i < a.size(); ++i)
    CHECK((a.data()[i] == 0.0 || a.data()[i] == doctest::Approx(1.0 / 0.6)));
}

TEST_CASE("mirror-pair masks are statistically independent (chi-square)") {
  JointLayout pair = build_layout({"L"}, {"R"}, {}, 1, {0});
  Dropout d = Dropout::create(0.5);
  std::mt19937_64 rng(123);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, pair.size());
  long n[2][2] = {{0, 0}, {0, 0}};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Eigen::MatrixXd y = d.forward_train(x, rng);
    ++n[y(0, 0) != 0.0][y(0, 1) != 0.0];
  }
  const double rows[2] = {double(n[0][0] + n[0][1]), double(n[1][0] + n[1][1])};
  const double cols[2] = {double(n[0][0] + n[1][0]), double(n[0][1] + n[1][1])};
  double chi2 = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double e = rows[a] * cols[b] / draws;
      chi2 += (n[a][b] - e) * (n[a][b] - e) / e;
    }
  CHECK(chi2 < 6.635);  // chi-square df=1 critical value at p=0.01
}

TEST_CASE("dropout train mean is unbiased") {
  Dropout d = Dropout::create(0.3);
  std::mt19937_64 rng(7);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 1);
  double total = 0.0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) total += d.forward_train(x, rng)(0, 0);
  CHECK(total / draws == doctest::Approx(1.0).epsilon(0.05));
}

// --------------------------------------------------------------- activations

TEST_CASE("parse_activation accepts odd kinds and rejects relu") {
  CHECK(parse_activation("tanh") == Activation::Tanh);
  CHECK(parse_activation("hardtanh") == Activation::HardTanh);
  CHECK(parse_activation("softsign") == Activation::SoftSign);
  CHECK_THROWS_AS(parse_activation("relu"), ValidationError);
  CHECK_THROWS_AS(parse_activation("gelu"), ValidationError);
}

TEST_CASE("odd activation hand values") {
  Eigen::MatrixXd x(1, 2);
  x << 1.0, -1.0;
  Eigen::MatrixXd y = apply_activation(Activation::Tanh, x);
  CHECK(y(0, 0) == doctest::Approx(std::tanh(1.0)));
  CHECK(y(0, 1) == doctest::Approx(-std::tanh(1.0)));

  Eigen::MatrixXd z(1, 2);
  z << 2.0, -2.0;
  Eigen::MatrixXd h = apply_activation(Activation::HardTanh, z);
  CHECK(h(0, 0) == 1.0);
  CHECK(h(0, 1) == -1.0);
}

TEST_CASE("elementwise oddness makes activations exactly equivariant") {
  std::mt19937_64 rng(19);
  JointLayout layout = synthetic_layout(2, 2, 3, {0, 1});
  ChiralityTransform t = make_transform(layout);
  for (Activation a : {Activation::Tanh, Activation::HardTanh, Activation::SoftSign}) {
    Eigen::MatrixXd x = random_batch(3, layout.size(), rng);
    CHECK((apply_transform(t, apply_activation(a, x)) -
           apply_activation(a, apply_transform(t, x)))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}
