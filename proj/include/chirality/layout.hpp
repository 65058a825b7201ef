#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chirality {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Joint layout for one tensor side: ordered left/right/center joint tuples,
/// the per-joint dimensionality, and the set of coordinates negated by a
/// mirror flip. Left and right tuples pair positionally.
///
/// Flattened index convention: joints in order left, right, center; within
/// each joint the negated coordinates come first (each group in ascending
/// dimension order).
struct JointLayout {
  std::vector<std::string> left;
  std::vector<std::string> right;
  std::vector<std::string> center;
  int dims = 0;
  std::set<int> negated_dims;

  int joint_count() const {
    return static_cast<int>(left.size() + right.size() + center.size());
  }
  int size() const { return joint_count() * dims; }
  int negated_per_joint() const { return static_cast<int>(negated_dims.size()); }
  int positive_per_joint() const { return dims - negated_per_joint(); }

  // Dimension indices in flattened within-joint order (negated first).
  std::vector<int> slot_order() const;
};

JointLayout build_layout(std::vector<std::string> left, std::vector<std::string> right,
                         std::vector<std::string> center, int dims,
                         std::set<int> negated_dims);

/// Pure-center layout helper: n synthetic joints, no mirror pairs.
JointLayout center_layout(int joints, int dims, std::set<int> negated_dims = {});

/// Synthetic layout for hidden states: n_pairs mirror pairs plus n_center
/// center joints, all with the same dims / negated set.
JointLayout synthetic_layout(int n_pairs, int n_center, int dims,
                             std::set<int> negated_dims);

/// Standard Human3.6M 17-joint skeleton (6 left, 6 right, 5 center).
JointLayout h36m17_layout(int dims, std::set<int> negated_dims);

/// Signed permutation realizing negate-then-swap. perm[i] is the destination
/// index of source coordinate i; sign applies at the destination.
struct ChiralityTransform {
  std::vector<int> perm;
  std::vector<double> sign;

  int size() const { return static_cast<int>(perm.size()); }
};

ChiralityTransform make_transform(const JointLayout& layout);

/// Swap-only variant (no negation); covariance transform for recurrent gates.
ChiralityTransform make_swap_transform(const JointLayout& layout);

/// Applies the transform along the last axis of a [rows x N] matrix.
Eigen::MatrixXd apply_transform(const ChiralityTransform& t, const Eigen::MatrixXd& x);
std::vector<double> apply_transform(const ChiralityTransform& t, const std::vector<double>& x);

/// Dense N x N signed permutation matrix; test oracle for apply_transform.
Eigen::MatrixXd transform_as_dense(const ChiralityTransform& t);

}  // namespace chirality
