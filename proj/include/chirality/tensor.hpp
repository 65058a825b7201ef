#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace chirality {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrixXd>;
using ConstMatMap = Eigen::Map<const RowMatrixXd>;

/// Dense row-major tensor of 64-bit floats. Rank 1 or 2 in practice;
/// sequences are handled as vectors of 2-D frames.
struct Tensor {
  std::vector<long> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<long> s);

  long size() const { return static_cast<long>(data.size()); }
  long rank() const { return static_cast<long>(shape.size()); }
  long rows() const { return rank() == 2 ? shape[0] : 1; }
  long cols() const { return rank() == 0 ? 1 : shape.back(); }

  // 2-D view; rank-1 tensors map as a single row, scalars as 1x1.
  MatMap mat() { return MatMap(data.data(), rows(), cols()); }
  ConstMatMap mat() const { return ConstMatMap(data.data(), rows(), cols()); }

  double scalar() const;

  static Tensor zeros(std::vector<long> shape);
  static Tensor scalar_value(double v);
  static Tensor from_vector(const std::vector<double>& v);
  static Tensor from_matrix(const Eigen::MatrixXd& m);
  static Tensor uniform(std::vector<long> shape, double lo, double hi, std::mt19937_64& rng);
  static Tensor gaussian(std::vector<long> shape, double stddev, std::mt19937_64& rng);
};

bool same_shape(const Tensor& a, const Tensor& b);
std::string shape_string(const Tensor& t);

}  // namespace chirality
