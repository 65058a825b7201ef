#pragma once

#include <optional>

#include "chirality/accounting.hpp"
#include "chirality/activation.hpp"
#include "chirality/conv1d.hpp"
#include "chirality/dropout.hpp"
#include "chirality/linear.hpp"
#include "chirality/normalization.hpp"
#include "chirality/recurrent.hpp"
#include "chirality/serialize.hpp"

namespace chirality {

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unconstrained affine layer; baseline control without the symmetry prior.
struct DenseLinear {
  Tensor W;  // [out, in]
  Tensor b;  // [out]

  static DenseLinear create(long in, long out);
  void init_uniform(std::mt19937_64& rng);
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  struct Bound {
    Var wvar, bvar, weight_t;
  };
  Bound bind(Tape& tape, bool requires_grad = true) const;
  Var forward(Tape& tape, const Bound& bound, Var x) const;
  std::vector<Tensor*> params();
};

struct OptimizerConfig {
  std::string kind = "adam";
  double lr = 0.01;
  double lr_decay = 1.0;  // per-epoch multiplicative factor
  double beta1 = 0.9;
  double beta2 = 0.9999;  // Adam betas per the training defaults
  double momentum = 0.9;  // sgd
  int epochs = 500;
  int batch_size = 0;  // 0 = full batch
};

struct Layer {
  enum class Kind { Linear, InvarianceHead, Dense, Activation, BatchNorm, Dropout, Conv1D, LSTM, GRU };
  Kind kind;
  std::optional<ChiralLinear> linear;
  std::optional<DenseLinear> dense;
  Activation act = Activation::Tanh;
  std::optional<JointLayout> elem_layout;  // activation / dropout / batchnorm
  std::optional<ChiralBatchNorm> bn;
  std::optional<Dropout> dropout;
  std::optional<ChiralConv1D> conv;
  std::optional<ChiralLSTM> lstm;
  std::optional<ChiralGRU> gru;

  std::string label(size_t index) const;
  long in_size() const;
  long out_size() const;
  bool sequential() const { return kind == Kind::Conv1D || kind == Kind::LSTM || kind == Kind::GRU; }
  bool chiral() const { return kind != Kind::Dense; }
  std::vector<Tensor*> params();
};

struct BoundModel {
  struct BoundLayer {
    std::optional<BoundAffine> affine;
    std::optional<DenseLinear::Bound> dense;
    std::optional<ChiralBatchNorm::Bound> bn;
  };
  std::vector<BoundLayer> layers;
  std::vector<Var> param_vars;  // aligned with Model::params()
};

struct Model {
  JointLayout in_layout;
  JointLayout out_layout;
  std::vector<Layer> layers;
  OptimizerConfig opt;
  double augment_prob = 0.5;
  double bn_momentum_decay = 0.99;
  std::uint64_t seed = 1;

  bool sequential() const;
  bool fully_chiral() const;
  void init_params(std::mt19937_64& rng);
  std::vector<Tensor*> params();

  /// Feed-forward eval pass (batch norm in eval mode, dropout identity).
  /// Chiral linear layers go through the paired-sum matvec; mult_count, when
  /// requested, is per sample.
  Eigen::MatrixXd forward_eval(const Eigen::MatrixXd& x, long* mult_count = nullptr) const;
  /// Same pass through materialized dense weights (no pairing trick).
  Eigen::MatrixXd forward_eval_naive(const Eigen::MatrixXd& x, long* mult_count = nullptr) const;

  BoundModel bind(Tape& tape, bool requires_grad = true);
  Var forward(Tape& tape, BoundModel& bound, Var x, bool training, std::mt19937_64* rng);
};

Model model_from_json(const Json& j);
Json model_to_json(const Model& m, bool include_params);

struct EquivarianceCheck {
  std::string layer;
  std::string property;
  double violation = 0.0;
};

/// Randomized per-layer equivariance measurements plus an end-to-end check
/// when the model is a fully chiral feed-forward stack. Layer parameters are
/// drawn fresh each trial; the model itself is left untouched.
std::vector<EquivarianceCheck> equivariance_suite(const Model& model, int trials,
                                                  std::mt19937_64& rng);

/// Max grad-check error over the free parameters of every layer.
std::vector<EquivarianceCheck> gradcheck_suite(const Model& model, double eps,
                                               std::mt19937_64& rng);

}  // namespace chirality
