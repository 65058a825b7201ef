#pragma once

#include <random>

#include "chirality/tape.hpp"

namespace chirality {

/// Inverted dropout: training masks coordinates independently (mirror pairs
/// are NOT dropped jointly) and divides by the keep probability, so eval is
/// the identity, which trivially commutes with the chirality transform.
struct Dropout {
  double p = 0.0;

  static Dropout create(double p);

  Eigen::MatrixXd forward_train(const Eigen::MatrixXd& x, std::mt19937_64& rng) const;
  Eigen::MatrixXd forward_eval(const Eigen::MatrixXd& x) const { return x; }

  Var forward_train(Tape& tape, Var x, std::mt19937_64& rng) const;
  Var forward_eval(Tape& tape, Var x) const { (void)tape; return x; }
};

}  // namespace chirality
