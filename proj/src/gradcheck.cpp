#include "chirality/gradcheck.hpp"

#include <cmath>

namespace chirality {

namespace {

double check_finite(double v, const char* where) {
  if (!std::isfinite(v)) throw ValidationError(std::string("grad_check: non-finite value in ") + where);
  return v;
}

}  // namespace

double grad_check_params(const MultiScalarFn& f, const std::vector<Tensor>& params,
                         double eps) {
  // analytic gradients
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.leaf(p, true));
    Var out = f(tape, vars);
    check_finite(tape.val(out).scalar(), "forward");
    tape.backward(out);
    for (Var v : vars) {
      if (tape.has_grad(v.id))
        analytic.push_back(tape.grad(v));
      else {
        Tensor z = tape.val(v);
        z.data.assign(z.data.size(), 0.0);
        analytic.push_back(std::move(z));
      }
    }
  }

  auto eval = [&](const std::vector<Tensor>& ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : ps) vars.push_back(tape.leaf(p, false));
    return check_finite(tape.val(f(tape, vars)).scalar(), "perturbed forward");
  };

  double max_err = 0.0;
  std::vector<Tensor> work = params;
  for (size_t k = 0; k < params.size(); ++k) {
    for (size_t i = 0; i < params[k].data.size(); ++i) {
      const double orig = work[k].data[i];
      work[k].data[i] = orig + eps;
      const double fp = eval(work);
      work[k].data[i] = orig - eps;
      const double fm = eval(work);
      work[k].data[i] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double err = std::abs(analytic[k].data[i] - fd) / std::max(1.0, std::abs(fd));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  return grad_check_params(
      [&f](Tape& t, const std::vector<Var>& vs) { return f(t, vs[0]); }, {x}, eps);
}

}  // namespace chirality
