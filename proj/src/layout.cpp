#include "chirality/layout.hpp"

#include <algorithm>
#include <unordered_set>

namespace chirality {

std::vector<int> JointLayout::slot_order() const {
  std::vector<int> order;
  order.reserve(dims);
  for (int d = 0; d < dims; ++d)
    if (negated_dims.count(d)) order.push_back(d);
  for (int d = 0; d < dims; ++d)
    if (!negated_dims.count(d)) order.push_back(d);
  return order;
}

JointLayout build_layout(std::vector<std::string> left, std::vector<std::string> right,
                         std::vector<std::string> center, int dims,
                         std::set<int> negated_dims) {
  if (left.size() != right.size())
    throw ValidationError("layout: left and right joint lists must have equal length (" +
                          std::to_string(left.size()) + " vs " + std::to_string(right.size()) + ")");
  if (dims <= 0) throw ValidationError("layout: dims must be positive");
  std::unordered_set<std::string> seen;
  for (const auto* list : {&left, &right, &center})
    for (const auto& id : *list)
      if (!seen.insert(id).second)
        throw ValidationError("layout: duplicate joint id '" + id + "'");
  for (int d : negated_dims)
    if (d < 0 || d >= dims)
      throw ValidationError("layout: negated dim index " + std::to_string(d) +
                            " out of range [0," + std::to_string(dims) + ")");
  JointLayout layout;
  layout.left = std::move(left);
  layout.right = std::move(right);
  layout.center = std::move(center);
  layout.dims = dims;
  layout.negated_dims = std::move(negated_dims);
  return layout;
}

JointLayout center_layout(int joints, int dims, std::set<int> negated_dims) {
  std::vector<std::string> c;
  for (int i = 0; i < joints; ++i) c.push_back("C" + std::to_string(i));
  return build_layout({}, {}, std::move(c), dims, std::move(negated_dims));
}

JointLayout synthetic_layout(int n_pairs, int n_center, int dims,
                             std::set<int> negated_dims) {
  std::vector<std::string> l, r, c;
  for (int i = 0; i < n_pairs; ++i) {
    l.push_back("L" + std::to_string(i));
    r.push_back("R" + std::to_string(i));
  }
  for (int i = 0; i < n_center; ++i) c.push_back("C" + std::to_string(i));
  return build_layout(std::move(l), std::move(r), std::move(c), dims, std::move(negated_dims));
}

JointLayout h36m17_layout(int dims, std::set<int> negated_dims) {
  return build_layout(
      {"LHip", "LKnee", "LFoot", "LShoulder", "LElbow", "LWrist"},
      {"RHip", "RKnee", "RFoot", "RShoulder", "RElbow", "RWrist"},
      {"Hip", "Spine", "Thorax", "Neck", "Head"}, dims, std::move(negated_dims));
}

ChiralityTransform make_transform(const JointLayout& layout) {
  const int n = layout.size();
  const int d = layout.dims;
  const int nl = static_cast<int>(layout.left.size());
  const int nc = static_cast<int>(layout.center.size());
  const auto order = layout.slot_order();
  ChiralityTransform t;
  t.perm.resize(n);
  t.sign.resize(n);
  auto joint_dest = [&](int j) {
    if (j < nl) return j + nl;       // left -> right slot
    if (j < 2 * nl) return j - nl;   // right -> left slot
    return j;                        // center fixed
  };
  for (int j = 0; j < layout.joint_count(); ++j) {
    const int dj = joint_dest(j);
    for (int s = 0; s < d; ++s) {
      const int src = j * d + s;
      t.perm[src] = dj * d + s;
      t.sign[src] = layout.negated_dims.count(order[s]) ? -1.0 : 1.0;
    }
  }
  (void)nc;
  return t;
}

ChiralityTransform make_swap_transform(const JointLayout& layout) {
  ChiralityTransform t = make_transform(layout);
  std::fill(t.sign.begin(), t.sign.end(), 1.0);
  return t;
}

Eigen::MatrixXd apply_transform(const ChiralityTransform& t, const Eigen::MatrixXd& x) {
  if (x.cols() != t.size())
    throw ValidationError("apply_transform: feature axis " + std::to_string(x.cols()) +
                          " != transform size " + std::to_string(t.size()));
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (int i = 0; i < t.size(); ++i) y.col(t.perm[i]) = t.sign[i] * x.col(i);
  return y;
}

std::vector<double> apply_transform(const ChiralityTransform& t, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != t.size())
    throw ValidationError("apply_transform: size mismatch");
  std::vector<double> y(x.size());
  for (int i = 0; i < t.size(); ++i) y[t.perm[i]] = t.sign[i] * x[i];
  return y;
}

Eigen::MatrixXd transform_as_dense(const ChiralityTransform& t) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(t.size(), t.size());
  for (int i = 0; i < t.size(); ++i) m(t.perm[i], i) = t.sign[i];
  return m;
}

}  // namespace chirality
