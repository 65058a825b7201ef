#include "chirality/tensor.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace chirality {

Tensor::Tensor(std::vector<long> s) : shape(std::move(s)) {
  long n = 1;
  for (long d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive shape entry");
    n *= d;
  }
  data.assign(static_cast<size_t>(n), 0.0);
}

double Tensor::scalar() const {
  if (size() != 1) throw std::invalid_argument("tensor: scalar() on size " + std::to_string(size()));
  return data[0];
}

Tensor Tensor::zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::scalar_value(double v) {
  Tensor t;
  t.data = {v};
  return t;
}

Tensor Tensor::from_vector(const std::vector<double>& v) {
  Tensor t({static_cast<long>(v.size())});
  t.data = v;
  return t;
}

Tensor Tensor::from_matrix(const Eigen::MatrixXd& m) {
  Tensor t({m.rows(), m.cols()});
  t.mat() = m;
  return t;
}

Tensor Tensor::uniform(std::vector<long> shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data) v = dist(rng);
  return t;
}

Tensor Tensor::gaussian(std::vector<long> shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data) v = dist(rng);
  return t;
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

std::string shape_string(const Tensor& t) {
  std::string s = "[";
  for (size_t i = 0; i < t.shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(t.shape[i]);
  return s + "]";
}

}  // namespace chirality
