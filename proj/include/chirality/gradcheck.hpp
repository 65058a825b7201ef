#pragma once

#include <functional>
#include <vector>

#include "chirality/tape.hpp"

namespace chirality {

/// Scalar function of one tensor, evaluated on a fresh tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Scalar function of several parameter tensors.
using MultiScalarFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Max over coordinates of |analytic - central difference| / max(1, |central
/// difference|). Throws on non-finite values.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-6);

/// Same check over every coordinate of every parameter tensor.
double grad_check_params(const MultiScalarFn& f, const std::vector<Tensor>& params,
                         double eps = 1e-6);

}  // namespace chirality
