#pragma once

#include "chirality/model.hpp"

namespace chirality {

/// Supervised pose-to-pose regression dataset; rows are samples.
struct Task {
  JointLayout in_layout;
  JointLayout out_layout;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
};

/// Draws gaussian inputs and labels them with a frozen equivariant teacher.
/// `teacher` is "linear" (single affine map) or "mlp" (affine, tanh, affine
/// through a hidden copy of the input layout). Gaussian label noise with the
/// given stddev.
Task gen_task(const JointLayout& in, const JointLayout& out, const std::string& teacher,
              long samples, double noise, std::uint64_t seed);

Json task_to_json(const Task& task);
Task task_from_json(const Json& j);

/// Mean per-joint position error: Euclidean norm over each joint's coordinate
/// block, averaged over joints and samples.
double mpjpe_metric(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                    const JointLayout& layout);

/// With probability `prob`, mirror-transforms x and y jointly in place (never
/// one without the other). Returns whether the transform was applied.
bool augment_pair(Eigen::RowVectorXd& x, Eigen::RowVectorXd& y,
                  const ChiralityTransform& tin, const ChiralityTransform& tout,
                  double prob, std::mt19937_64& rng);

struct TrainResult {
  std::vector<double> losses;  // training loss after each epoch
  double final_loss = 0.0;
  int epochs_run = 0;
  long samples_used = 0;
};

/// Deterministic gradient training driven by the model's optimizer config and
/// seed. `limit_frac` < 1 trains on a seeded random subset of the task. Left
/// and right sides of a sample are mirror-swapped with probability
/// `augment_prob` each time it is drawn. Throws DivergenceError if the loss
/// leaves the finite range.
TrainResult train(Model& model, const Task& task, double limit_frac = 1.0);

enum class EvalMode { Plain, FlipAveraged };
EvalMode parse_eval_mode(const std::string& name);

/// Test-time metric. FlipAveraged averages the prediction with the
/// mirror-transformed prediction of the mirrored input; for a fully
/// equivariant model the two coincide, so a single pass suffices and the
/// multiplication count does not double. mult_count, when requested, is per
/// sample.
double evaluate(const Model& model, const Task& task, EvalMode mode,
                long* mult_count = nullptr);

/// Reference flip average that really runs both passes; for comparing against
/// the single-pass shortcut.
double flip_average_two_pass(const Model& model, const Task& task,
                             long* mult_count = nullptr);

}  // namespace chirality
