#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chirality/gradcheck.hpp"
#include "chirality/linear.hpp"

using namespace chirality;

namespace {

void set_block(ChiralLinear& l, const std::string& name, double v) {
  int wi = l.wpat.block_index(name);
  if (wi >= 0) {
    for (double& d : l.wblocks[wi].data) d = v;
    return;
  }
  int bi = l.bpat.block_index(name);
  REQUIRE(bi >= 0);
  for (double& d : l.bblocks[bi].data) d = v;
}

JointLayout random_layout(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 3);
  int pairs = pick(rng), center = pick(rng);
  if (pairs + center == 0) center = 1;
  int dims = 1 + pick(rng);
  std::set<int> neg;
  for (int d = 0; d < dims; ++d)
    if (pick(rng) % 2) neg.insert(d);
  return synthetic_layout(pairs, center, dims, neg);
}

// Dimension of {W : T_out W == W T_in}, computed by brute force as the
// nullity of the linear map W -> T_out W - W T_in. Independent oracle for the
// free weight count.
long commutant_dimension(const JointLayout& in, const JointLayout& out) {
  Eigen::MatrixXd tin = transform_as_dense(make_transform(in));
  Eigen::MatrixXd tout = transform_as_dense(make_transform(out));
  const long ni = tin.rows(), no = tout.rows();
  Eigen::MatrixXd big(no * ni, no * ni);
  big.setZero();
  for (long r = 0; r < no; ++r)
    for (long c = 0; c < ni; ++c) {
      const long row = r * ni + c;  // constraint for entry (r, c)
      for (long k = 0; k < no; ++k) big(row, k * ni + c) += tout(r, k);
      for (long k = 0; k < ni; ++k) big(row, r * ni + k) -= tin(k, c);
    }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(big);
  lu.setThreshold(1e-9);
  return no * ni - lu.rank();
}

long fixed_space_dimension(const JointLayout& out) {
  Eigen::MatrixXd tout = transform_as_dense(make_transform(out));
  Eigen::MatrixXd m = tout - Eigen::MatrixXd::Identity(tout.rows(), tout.cols());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-9);
  return tout.rows() - lu.rank();
}

}  // namespace

TEST_CASE("minimal pair materialization and forward, hand values") {
  JointLayout pair = build_layout({"LW"}, {"RW"}, {}, 1, {0});
  ChiralLinear l = ChiralLinear::create(pair, pair);
  set_block(l, "W_ln_ln", 1.0);
  set_block(l, "W_ln_rn", 2.0);
  set_block(l, "b_ln", 0.5);

  Eigen::MatrixXd W = l.materialize_weight().mat();
  Eigen::MatrixXd expectW(2, 2);
  expectW << 1, 2, 2, 1;
  CHECK((W - expectW).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd b = l.materialize_bias().mat();
  CHECK(b(0, 0) == 0.5);
  CHECK(b(0, 1) == -0.5);

  Eigen::MatrixXd x(1, 2);
  x << 1, 3;
  Eigen::MatrixXd y = l.forward(x);
  CHECK(y(0, 0) == doctest::Approx(7.5));
  CHECK(y(0, 1) == doctest::Approx(4.5));

  ChiralityTransform t = make_transform(pair);
  Eigen::MatrixXd yt = l.forward(apply_transform(t, x));
  CHECK(yt(0, 0) == doctest::Approx(-4.5));
  CHECK(yt(0, 1) == doctest::Approx(-7.5));
  CHECK((apply_transform(t, y) - yt).cwiseAbs().maxCoeff() <= 1e-14);

  // commutation identity on the dense oracle
  Eigen::MatrixXd tin = transform_as_dense(t);
  CHECK((W * tin - tin * W).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("all-zero blocks and x=0 edge cases") {
  JointLayout layout = synthetic_layout(2, 1, 2, {0});
  ChiralLinear l = ChiralLinear::create(layout, layout);
  CHECK(l.materialize_weight().mat().cwiseAbs().maxCoeff() == 0.0);
  CHECK(l.materialize_bias().mat().cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(1);
  l.init_uniform(rng);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, layout.size());
  CHECK((l.forward(zero) - l.materialize_bias().mat()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pure-center layout with empty D_n collapses to a dense affine layer") {
  JointLayout layout = center_layout(3, 2);
  ChiralLinear l = ChiralLinear::create(layout, layout);
  CHECK(l.free_weight_count() == layout.size() * layout.size());
  CHECK(l.free_bias_count() == layout.size());
  CHECK(l.symmetric_mult_count() == l.naive_mult_count());
}

TEST_CASE("random specs: equivariance, A.1 identity, free-count oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    JointLayout in = random_layout(rng);
    JointLayout out = random_layout(rng);
    ChiralLinear l = ChiralLinear::create(in, out);
    l.init_uniform(rng);

    ChiralityTransform tin = make_transform(in);
    ChiralityTransform tout = make_transform(out);

    // algebraic identity W T_in == T_out W
    Eigen::MatrixXd W = l.materialize_weight().mat();
    Eigen::MatrixXd Tin = transform_as_dense(tin);
    Eigen::MatrixXd Tout = transform_as_dense(tout);
    CHECK((W * Tin - Tout * W).cwiseAbs().maxCoeff() <= 1e-14);

    // bias fixed point T_out b == b
    Eigen::VectorXd b = l.materialize_bias().mat().row(0).transpose();
    CHECK(((Tout * b) - b).cwiseAbs().maxCoeff() <= 1e-14);

    Eigen::MatrixXd x(3, in.size());
    for (long i = 0; i < x.size(); ++i) x.data()[i] = unif(rng);
    CHECK((apply_transform(tout, l.forward(x)) - l.forward(apply_transform(tin, x)))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);

    // brute-force dimension of the constrained space bounds the block count:
    // the shared-block scheme is a subspace of the full commutant
    CHECK(l.free_weight_count() <= commutant_dimension(in, out));
    CHECK(l.free_bias_count() == fixed_space_dimension(out));
    CHECK(l.free_weight_count() <= out.size() * in.size());
  }
}

TEST_CASE("symmetric matvec: hand value and instrumentation") {
  JointLayout pair = build_layout({"LW"}, {"RW"}, {}, 1, {0});
  ChiralLinear l = ChiralLinear::create(pair, pair);
  set_block(l, "W_ln_ln", 1.0);
  set_block(l, "W_ln_rn", 2.0);

  Eigen::MatrixXd x(1, 2);
  x << 1, 3;
  long mults = 0;
  Eigen::MatrixXd y = l.symmetric_forward(x, &mults);
  CHECK(mults == 2);  // naive would take 4
  CHECK(y(0, 0) == doctest::Approx(7.0));  // no bias set
  CHECK(y(0, 1) == doctest::Approx(5.0));
}

TEST_CASE("symmetric matvec agrees with the dense path on random specs") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    JointLayout in = random_layout(rng);
    JointLayout out = random_layout(rng);
    ChiralLinear l = ChiralLinear::create(in, out);
    l.init_uniform(rng);
    Eigen::MatrixXd x(2, in.size());
    for (long i = 0; i < x.size(); ++i) x.data()[i] = unif(rng);
    long mults = 0;
    CHECK((l.symmetric_forward(x, &mults) - l.forward(x)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(mults <= l.naive_mult_count());
    CHECK(mults == l.symmetric_mult_count());
  }
}

TEST_CASE("H36M-17 square layer multiplication bound") {
  JointLayout h36 = h36m17_layout(2, {0});
  ChiralLinear l = ChiralLinear::create(h36, h36);
  // 11/17 of the dense count, per the pair-count argument
  CHECK(l.symmetric_mult_count() * 17 <= l.naive_mult_count() * 11);
  CHECK(l.naive_mult_count() == 34 * 34);
}

TEST_CASE("invariance head: output invariant under input transform") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  JointLayout in = synthetic_layout(2, 1, 3, {0});
  JointLayout out = center_layout(2, 2);
  CHECK_THROWS_AS(ChiralLinear::invariance_head(in, synthetic_layout(1, 0, 2, {})),
                  ValidationError);
  CHECK_THROWS_AS(ChiralLinear::invariance_head(in, center_layout(2, 2, {0})),
                  ValidationError);

  ChiralLinear head = ChiralLinear::invariance_head(in, out);
  ChiralityTransform tin = make_transform(in);
  for (int trial = 0; trial < 30; ++trial) {
    head.init_uniform(rng);
    Eigen::MatrixXd x(2, in.size());
    for (long i = 0; i < x.size(); ++i) x.data()[i] = unif(rng);
    CHECK((head.forward(x) - head.forward(apply_transform(tin, x))).cwiseAbs().maxCoeff() <=
          1e-10);
  }

  // zero weights: constant output equal to the bias
  ChiralLinear zero = ChiralLinear::invariance_head(in, out);
  set_block(zero, "b_cp", 0.7);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(1, in.size());
  CHECK((zero.forward(x).array() - 0.7).abs().maxCoeff() == 0.0);
}

TEST_CASE("grad check through the assembled affine map") {
  std::mt19937_64 rng(31);
  JointLayout in = synthetic_layout(1, 1, 2, {0});
  JointLayout out = synthetic_layout(1, 0, 2, {1});
  ChiralLinear l = ChiralLinear::create(in, out);
  l.init_uniform(rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, in.size());

  std::vector<Tensor> params;
  for (const Tensor& t : l.wblocks) params.push_back(t);
  for (const Tensor& t : l.bblocks) params.push_back(t);
  const size_t nw = l.wblocks.size();
  double err = grad_check_params(
      [&](Tape& tape, const std::vector<Var>& vars) {
        std::vector<Var> wv(vars.begin(), vars.begin() + nw);
        std::vector<Var> bv(vars.begin() + nw, vars.end());
        Var xx = tape.leaf(Tensor::from_matrix(x), false);
        Var y = add(matmul(xx, transpose(assemble(tape, l.wpat, wv))),
                    assemble(tape, l.bpat, bv));
        return sum(tanh(y));
      },
      params);
  CHECK(err <= 1e-5);
}

TEST_CASE("tape forward matches plain forward") {
  std::mt19937_64 rng(37);
  JointLayout in = synthetic_layout(2, 1, 2, {0});
  JointLayout out = synthetic_layout(1, 2, 2, {0});
  ChiralLinear l = ChiralLinear::create(in, out);
  l.init_uniform(rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, in.size());
  Tape tape;
  BoundAffine bound = l.bind(tape);
  Var y = l.forward(tape, bound, tape.leaf(Tensor::from_matrix(x)));
  CHECK((Eigen::MatrixXd(tape.val(y).mat()) - l.forward(x)).cwiseAbs().maxCoeff() <= 1e-12);
}
