#pragma once

#include <string>

#include "chirality/tape.hpp"

namespace chirality {

// Only odd elementwise functions are admissible; relu and friends are
// rejected at parse time because f(-x) != -f(x) breaks equivariance.
enum class Activation { Tanh, HardTanh, SoftSign };

Activation parse_activation(const std::string& kind);
std::string activation_name(Activation a);

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& x);
Var apply_activation(Tape& tape, Activation a, Var x);

}  // namespace chirality
