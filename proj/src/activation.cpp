#include "chirality/activation.hpp"

#include <cmath>

namespace chirality {

Activation parse_activation(const std::string& kind) {
  if (kind == "tanh") return Activation::Tanh;
  if (kind == "hardtanh") return Activation::HardTanh;
  if (kind == "softsign") return Activation::SoftSign;
  throw ValidationError("activation: '" + kind +
                        "' is not an odd function; allowed: tanh, hardtanh, softsign");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::HardTanh: return "hardtanh";
    case Activation::SoftSign: return "softsign";
  }
  return "?";
}

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& x) {
  switch (a) {
    case Activation::Tanh:
      return x.array().tanh();
    case Activation::HardTanh:
      return x.array().min(1.0).max(-1.0);
    case Activation::SoftSign:
      return x.array() / (1.0 + x.array().abs());
  }
  return x;
}

Var apply_activation(Tape& tape, Activation a, Var x) {
  (void)tape;
  switch (a) {
    case Activation::Tanh: return tanh(x);
    case Activation::HardTanh: return hardtanh(x);
    case Activation::SoftSign: return softsign(x);
  }
  return x;
}

}  // namespace chirality
