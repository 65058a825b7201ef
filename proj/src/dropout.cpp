#include "chirality/dropout.hpp"

namespace chirality {

Dropout Dropout::create(double p) {
  if (p < 0.0 || p >= 1.0)
    throw ValidationError("dropout: probability must be in [0,1)");
  return Dropout{p};
}

Eigen::MatrixXd Dropout::forward_train(const Eigen::MatrixXd& x, std::mt19937_64& rng) const {
  if (p == 0.0) return x;
  const double keep = 1.0 - p;
  std::bernoulli_distribution drop(p);
  Eigen::MatrixXd y = x;
  for (long r = 0; r < y.rows(); ++r)
    for (long c = 0; c < y.cols(); ++c) y(r, c) = drop(rng) ? 0.0 : y(r, c) / keep;
  return y;
}

Var Dropout::forward_train(Tape& tape, Var x, std::mt19937_64& rng) const {
  if (p == 0.0) return x;
  const double keep = 1.0 - p;
  std::bernoulli_distribution drop(p);
  Tensor mask = tape.val(x);
  for (double& v : mask.data) v = drop(rng) ? 0.0 : 1.0 / keep;
  return mul(x, tape.leaf(std::move(mask), false));
}

}  // namespace chirality
