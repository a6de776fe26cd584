#pragma once

#include <vector>

#include "icgnn/graph.hpp"
#include "icgnn/matrix.hpp"
#include "icgnn/rng.hpp"

namespace icgnn {

/// Two-layer graph convolution:
///   hidden = relu(Ahat * X * W1), dropped = dropout(hidden)   [train only]
///   logits = Ahat * dropped * W2, P = row_softmax(logits)
struct ModelParams {
  Matrix w1;  // F x d
  Matrix w2;  // d x C
  double dropout_rate = 0.5;
};

/// Glorot-uniform initialization from the given rng stream.
ModelParams init_params(int in_dim, int hidden_dim, int n_classes, double dropout_rate, Rng& rng);

enum class ForwardMode { train, eval };

struct ForwardOutput {
  Matrix z;       // N x d post-ReLU hidden representations
  Matrix p;       // N x C row-stochastic predictions
  // backward cache
  Matrix pre1;    // N x d pre-ReLU
  Matrix zd;      // N x d hidden after dropout (== z in eval mode)
  Matrix drop;    // N x d dropout scales (empty in eval mode)
};

/// rng is only consumed in train mode (dropout draws). Throws NumericError,
/// naming the layer, if any intermediate goes non-finite.
ForwardOutput forward(const NormalizedAdjacency& adj, const Matrix& features,
                      const ModelParams& params, ForwardMode mode, Rng* rng = nullptr);

struct Gradients {
  Matrix w1;
  Matrix w2;
};

struct LossGrad {
  double loss = 0.0;
  Gradients grads;
};

/// Soft-target cross-entropy averaged over the masked nodes:
///   loss = -(1/|mask|) sum_{i in mask} w_i sum_c targets(i,c) log p(i,c)
///        + l2/2 * (|W1|^2 + |W2|^2)
/// Targets are constants: no gradient flows into their construction. Rows of
/// `targets` on the mask must sum to 1. `row_weights` (length N) scales
/// per-node contributions; null means all ones. P is clamped at 1e-12 under
/// the log.
LossGrad loss_and_grad(const ForwardOutput& out, const Matrix& targets,
                       const std::vector<int>& mask, const std::vector<double>* row_weights,
                       const ModelParams& params, const NormalizedAdjacency& adj,
                       const Matrix& features, double l2);

/// Adaptive-moment optimizer state with decoupled weight decay.
struct OptimizerState {
  Matrix m1_w1, m2_w1, m1_w2, m2_w2;
  long step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;

  OptimizerState() = default;
  OptimizerState(const ModelParams& params, double lr_, double weight_decay_);
};

/// Returns false (and leaves params/state untouched) if any gradient entry is
/// non-finite.
bool optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& state);

/// Argmax class per masked row, ties broken by lower class id. Result aligned
/// with `mask`.
std::vector<int> predict(const ForwardOutput& out, const std::vector<int>& mask);

/// Argmax over every row.
std::vector<int> predict_all(const ForwardOutput& out);

}  // namespace icgnn
