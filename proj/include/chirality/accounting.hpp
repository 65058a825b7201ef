#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "chirality/layout.hpp"

namespace chirality {

struct Model;

struct Rational {
  long num = 0;
  long den = 1;
  Rational() = default;
  Rational(long n, long d);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

/// ((|Jl_in|+|Jc_in|) * (|Jl_out|+|Jc_out|)) / (|J_in| * |J_out|)
Rational param_reduction_factor(const JointLayout& in, const JointLayout& out);

/// (|Jl_in|+|Jc_in|) / |J_in|
Rational mult_reduction_factor(const JointLayout& in);

struct LayerCost {
  std::string name;
  long free_weights = 0;
  long free_biases = 0;
  long dense_weights = 0;
  long dense_biases = 0;
  long naive_mults = 0;
  long symmetric_mults = 0;
  double formula_param_factor = 1.0;
  double formula_mult_factor = 1.0;

  double weight_ratio() const {
    return dense_weights ? static_cast<double>(free_weights) / dense_weights : 1.0;
  }
  double with_bias_ratio() const {
    long d = dense_weights + dense_biases;
    return d ? static_cast<double>(free_weights + free_biases) / d : 1.0;
  }
  double mult_ratio() const {
    return naive_mults ? static_cast<double>(symmetric_mults) / naive_mults : 1.0;
  }
};

struct CostReport {
  std::vector<LayerCost> layers;

  long total_free() const;
  long total_dense() const;
  long total_naive_mults() const;
  long total_symmetric_mults() const;
  std::string table() const;
};

/// Counts free parameters and the multiplications the paired-sum matvec
/// actually executes, layer by layer. Throws naming the offending layer if a
/// measured count exceeds its dense baseline.
CostReport audit_model(const Model& model);

}  // namespace chirality
