#include "icgnn/encoder.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "icgnn/errors.hpp"
#include "icgnn/kernels.hpp"

namespace icgnn {

ModelParams init_params(int in_dim, int hidden_dim, int n_classes, double dropout_rate,
                        Rng& rng) {
  if (in_dim < 1 || hidden_dim < 1 || n_classes < 2)
    throw ConfigError("init_params: invalid dimensions");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("init_params: dropout must lie in [0,1)");
  ModelParams p;
  p.dropout_rate = dropout_rate;
  auto glorot = [&rng](std::size_t fan_in, std::size_t fan_out) {
    Matrix w(fan_in, fan_out);
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = (2.0 * rng.uniform() - 1.0) * s;
    return w;
  };
  p.w1 = glorot(static_cast<std::size_t>(in_dim), static_cast<std::size_t>(hidden_dim));
  p.w2 = glorot(static_cast<std::size_t>(hidden_dim), static_cast<std::size_t>(n_classes));
  return p;
}

namespace {

void require_finite(const Matrix& m, const char* where) {
  if (!m.all_finite()) throw NumericError(std::string("forward: non-finite value in ") + where);
}

}  // namespace

ForwardOutput forward(const NormalizedAdjacency& adj, const Matrix& features,
                      const ModelParams& params, ForwardMode mode, Rng* rng) {
  if (features.rows != static_cast<std::size_t>(adj.n))
    throw DataError("forward: feature rows do not match graph size");
  if (features.cols != params.w1.rows)
    throw DataError("forward: feature dim does not match W1");
  if (mode == ForwardMode::train && params.dropout_rate > 0.0 && rng == nullptr)
    throw ConfigError("forward: train mode with dropout needs an rng");

  ForwardOutput out;
  out.pre1 = kern::spmm(adj.csr, kern::matmul(features, params.w1));
  require_finite(out.pre1, "layer 1");

  out.z = out.pre1;
  for (double& v : out.z.data) v = v > 0.0 ? v : 0.0;

  if (mode == ForwardMode::train && params.dropout_rate > 0.0) {
    // Inverted-scaling dropout; mask drawn serially row-major for determinism.
    out.drop = Matrix(out.z.rows, out.z.cols);
    const double keep = 1.0 - params.dropout_rate;
    const double scale = 1.0 / keep;
    for (double& v : out.drop.data) v = rng->uniform() < keep ? scale : 0.0;
    out.zd = out.z;
    for (std::size_t i = 0; i < out.zd.data.size(); ++i) out.zd.data[i] *= out.drop.data[i];
  } else {
    out.zd = out.z;
  }

  Matrix logits = kern::spmm(adj.csr, kern::matmul(out.zd, params.w2));
  require_finite(logits, "layer 2");
  kern::row_softmax(logits);
  require_finite(logits, "softmax");
  out.p = std::move(logits);
  return out;
}

LossGrad loss_and_grad(const ForwardOutput& out, const Matrix& targets,
                       const std::vector<int>& mask, const std::vector<double>* row_weights,
                       const ModelParams& params, const NormalizedAdjacency& adj,
                       const Matrix& features, double l2) {
  if (mask.empty()) throw ConfigError("loss_and_grad: empty mask");
  if (!targets.same_shape(out.p)) throw DataError("loss_and_grad: target shape mismatch");
  const std::size_t n = out.p.rows;
  const std::size_t c = out.p.cols;
  const double inv_m = 1.0 / static_cast<double>(mask.size());

  double loss = 0.0;
  Matrix glogits(n, c);
  for (int id : mask) {
    const std::size_t i = static_cast<std::size_t>(id);
    const double w = row_weights ? (*row_weights)[i] : 1.0;
    const double* t = targets.row(i);
    const double* p = out.p.row(i);
    double* g = glogits.row(i);
    double ce = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      ce -= t[j] * std::log(std::max(p[j], 1e-12));
      // softmax cross-entropy: d loss / d logit = p - t (per unit row weight)
      g[j] = w * inv_m * (p[j] - t[j]);
    }
    loss += w * inv_m * ce;
  }

  // logits = Ahat * (zd * W2); Ahat is symmetric so Ahat' == Ahat.
  Matrix ag = kern::spmm(adj.csr, glogits);
  Gradients grads;
  grads.w2 = kern::matmul_transA(out.zd, ag);
  Matrix dzd = kern::matmul_transB(ag, params.w2);

  if (out.drop.data.empty()) {
    // eval-mode cache: dropout identity
  } else {
    for (std::size_t i = 0; i < dzd.data.size(); ++i) dzd.data[i] *= out.drop.data[i];
  }
  for (std::size_t i = 0; i < dzd.data.size(); ++i)
    if (out.pre1.data[i] <= 0.0) dzd.data[i] = 0.0;

  Matrix adz = kern::spmm(adj.csr, dzd);
  grads.w1 = kern::matmul_transA(features, adz);

  if (l2 != 0.0) {
    double reg = 0.0;
    for (std::size_t i = 0; i < params.w1.data.size(); ++i) {
      reg += params.w1.data[i] * params.w1.data[i];
      grads.w1.data[i] += l2 * params.w1.data[i];
    }
    for (std::size_t i = 0; i < params.w2.data.size(); ++i) {
      reg += params.w2.data[i] * params.w2.data[i];
      grads.w2.data[i] += l2 * params.w2.data[i];
    }
    loss += 0.5 * l2 * reg;
  }
  return LossGrad{loss, std::move(grads)};
}

OptimizerState::OptimizerState(const ModelParams& params, double lr_, double weight_decay_)
    : m1_w1(params.w1.rows, params.w1.cols),
      m2_w1(params.w1.rows, params.w1.cols),
      m1_w2(params.w2.rows, params.w2.cols),
      m2_w2(params.w2.rows, params.w2.cols),
      lr(lr_),
      weight_decay(weight_decay_) {}

namespace {

void adam_update(Matrix& p, const Matrix& g, Matrix& m1, Matrix& m2, const OptimizerState& s,
                 double bc1, double bc2) {
  const std::int64_t n = static_cast<std::int64_t>(p.data.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double gi = g.data[i];
    m1.data[i] = s.beta1 * m1.data[i] + (1.0 - s.beta1) * gi;
    m2.data[i] = s.beta2 * m2.data[i] + (1.0 - s.beta2) * gi * gi;
    const double mhat = m1.data[i] / bc1;
    const double vhat = m2.data[i] / bc2;
    p.data[i] -= s.lr * (mhat / (std::sqrt(vhat) + s.eps) + s.weight_decay * p.data[i]);
  }
}

}  // namespace

bool optimizer_step(ModelParams& params, const Gradients& grads, OptimizerState& state) {
  if (!params.w1.same_shape(grads.w1) || !params.w2.same_shape(grads.w2))
    throw DataError("optimizer_step: gradient shape mismatch");
  if (!grads.w1.all_finite() || !grads.w2.all_finite()) return false;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  adam_update(params.w1, grads.w1, state.m1_w1, state.m2_w1, state, bc1, bc2);
  adam_update(params.w2, grads.w2, state.m1_w2, state.m2_w2, state, bc1, bc2);
  return true;
}

std::vector<int> predict(const ForwardOutput& out, const std::vector<int>& mask) {
  std::vector<int> pred;
  pred.reserve(mask.size());
  for (int id : mask) {
    const double* row = out.p.row(static_cast<std::size_t>(id));
    int best = 0;
    for (std::size_t j = 1; j < out.p.cols; ++j)
      if (row[j] > row[best]) best = static_cast<int>(j);
    pred.push_back(best);
  }
  return pred;
}

std::vector<int> predict_all(const ForwardOutput& out) {
  std::vector<int> mask(out.p.rows);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = static_cast<int>(i);
  return predict(out, mask);
}

}  // namespace icgnn
