#include "icgnn/label_refinery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "icgnn/errors.hpp"
#include "icgnn/kernels.hpp"

namespace icgnn {

NeighborSample select_neighbors(const RowStochasticDiffusion& tn, int node, int m,
                                bool stochastic, Rng* rng) {
  if (m < 1) throw ConfigError("select_neighbors: m must be >= 1");
  const int n = static_cast<int>(tn.m.cols);
  const double* row = tn.m.row(static_cast<std::size_t>(node));
  NeighborSample out;
  if (!stochastic) {
    out.indices = kern::top_m(row, n, m);
  } else {
    if (rng == nullptr) throw ConfigError("select_neighbors: stochastic selection needs an rng");
    std::vector<double> prob(row, row + n);
    double total = 1.0;
    const int take = std::min(m, n);
    for (int t = 0; t < take && total > 1e-15; ++t) {
      double u = rng->uniform() * total;
      int pick = -1;
      for (int j = 0; j < n; ++j) {
        if (prob[j] <= 0.0) continue;
        u -= prob[j];
        pick = j;
        if (u <= 0.0) break;
      }
      if (pick < 0) break;
      out.indices.push_back(pick);
      total -= prob[pick];
      prob[pick] = 0.0;
    }
  }
  out.weights.reserve(out.indices.size());
  for (int j : out.indices) out.weights.push_back(row[j]);
  return out;
}

std::vector<double> neighbor_aggregate(const NeighborSample& sample, const Matrix& influence,
                                       const Matrix& p, int node) {
  const std::size_t c = p.cols;
  std::vector<double> acc(c, 0.0);
  for (int k : sample.indices) {
    const double w = influence(static_cast<std::size_t>(k), static_cast<std::size_t>(node));
    const double* pk = p.row(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < c; ++j) acc[j] += w * pk[j];
  }
  double mx = acc[0];
  for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, acc[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    acc[j] = std::exp(acc[j] - mx);
    s += acc[j];
  }
  for (std::size_t j = 0; j < c; ++j) acc[j] /= s;
  return acc;
}

Matrix correct_labels(const Matrix& y_onehot, const CleanConfidence& beta,
                      const Matrix& h_labeled) {
  if (!y_onehot.same_shape(h_labeled))
    throw DataError("correct_labels: label/aggregate shape mismatch");
  if (beta.beta.size() != y_onehot.rows)
    throw DataError("correct_labels: confidence length mismatch");
  Matrix out(y_onehot.rows, y_onehot.cols);
  for (std::size_t i = 0; i < out.rows; ++i) {
    const double b = beta.beta[i];
    if (!(b >= 0.0 && b <= 1.0))
      throw NumericError("correct_labels: confidence outside [0,1] at row " + std::to_string(i));
    for (std::size_t j = 0; j < out.cols; ++j)
      out(i, j) = b * y_onehot(i, j) + (1.0 - b) * h_labeled(i, j);
  }
  return out;
}

Matrix aggregate_rows(const RowStochasticDiffusion& tn, const Matrix& influence, const Matrix& p,
                      const std::vector<int>& ids, int m, bool stochastic, Rng* rng,
                      const std::vector<NeighborSample>* premade) {
  Matrix out(ids.size(), p.cols);
  if (stochastic || premade == nullptr) {
    std::vector<NeighborSample> samples(ids.size());
    if (stochastic) {
      for (std::size_t i = 0; i < ids.size(); ++i)
        samples[i] = select_neighbors(tn, ids[i], m, true, rng);
    } else {
      const std::int64_t n = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < n; ++i)
        samples[static_cast<std::size_t>(i)] = select_neighbors(tn, ids[static_cast<std::size_t>(i)], m);
    }
    const std::int64_t n = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const auto row = neighbor_aggregate(samples[static_cast<std::size_t>(i)], influence, p,
                                          ids[static_cast<std::size_t>(i)]);
      std::copy(row.begin(), row.end(), out.row(static_cast<std::size_t>(i)));
    }
  } else {
    const std::int64_t n = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      const int id = ids[static_cast<std::size_t>(i)];
      const auto row = neighbor_aggregate((*premade)[static_cast<std::size_t>(id)], influence, p, id);
      std::copy(row.begin(), row.end(), out.row(static_cast<std::size_t>(i)));
    }
  }
  return out;
}

Matrix pseudo_labels(const RowStochasticDiffusion& tn, const Matrix& influence, const Matrix& p,
                     const std::vector<int>& unlabeled_ids, int m, bool stochastic, Rng* rng,
                     const std::vector<NeighborSample>* premade) {
  return aggregate_rows(tn, influence, p, unlabeled_ids, m, stochastic, rng, premade);
}

std::vector<int> TargetMatrix::mask() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < origin.size(); ++i)
    if (origin[i] != TargetOrigin::excluded) ids.push_back(static_cast<int>(i));
  return ids;
}

TargetMatrix assemble_targets(int n_nodes, const std::vector<int>& labeled_ids,
                              const Matrix& corrected, const std::vector<int>& pseudo_ids,
                              const Matrix& pseudo, const std::vector<int>& excluded_ids) {
  if (labeled_ids.empty()) throw DataError("assemble_targets: no labeled nodes");
  if (corrected.rows != labeled_ids.size() || pseudo.rows != pseudo_ids.size())
    throw DataError("assemble_targets: row-count mismatch");

  TargetMatrix out;
  out.rows = Matrix(static_cast<std::size_t>(n_nodes), corrected.cols);
  out.origin.assign(static_cast<std::size_t>(n_nodes), TargetOrigin::excluded);
  std::vector<bool> covered(static_cast<std::size_t>(n_nodes), false);
  auto claim = [&covered, n_nodes](int id) {
    if (id < 0 || id >= n_nodes)
      throw DataError("assemble_targets: node id out of range: " + std::to_string(id));
    if (covered[static_cast<std::size_t>(id)])
      throw DataError("assemble_targets: node covered twice: " + std::to_string(id));
    covered[static_cast<std::size_t>(id)] = true;
  };

  for (std::size_t i = 0; i < labeled_ids.size(); ++i) {
    const int id = labeled_ids[i];
    claim(id);
    out.origin[static_cast<std::size_t>(id)] = TargetOrigin::corrected_labeled;
    std::copy(corrected.row(i), corrected.row(i) + corrected.cols,
              out.rows.row(static_cast<std::size_t>(id)));
  }
  for (std::size_t i = 0; i < pseudo_ids.size(); ++i) {
    const int id = pseudo_ids[i];
    claim(id);
    out.origin[static_cast<std::size_t>(id)] = TargetOrigin::pseudo_unlabeled;
    std::copy(pseudo.row(i), pseudo.row(i) + pseudo.cols,
              out.rows.row(static_cast<std::size_t>(id)));
  }
  for (int id : excluded_ids) claim(id);

  for (int i = 0; i < n_nodes; ++i)
    if (!covered[static_cast<std::size_t>(i)])
      throw DataError("assemble_targets: node not covered: " + std::to_string(i));
  return out;
}

}  // namespace icgnn
