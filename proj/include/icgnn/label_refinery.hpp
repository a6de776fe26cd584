#pragma once

#include <vector>

#include "icgnn/diffusion.hpp"
#include "icgnn/matrix.hpp"
#include "icgnn/noise_indicator.hpp"
#include "icgnn/rng.hpp"

namespace icgnn {

/// Neighbor set for one node: indices picked from its (row-normalized)
/// diffusion row, with the corresponding row probabilities.
struct NeighborSample {
  std::vector<int> indices;
  std::vector<double> weights;
};

/// Deterministic variant (default): the m largest-probability indices of row
/// `node`, ties broken by lower index; self is allowed. Stochastic variant:
/// m distinct draws without replacement from the row distribution. m larger
/// than the row takes everything.
NeighborSample select_neighbors(const RowStochasticDiffusion& tn, int node, int m,
                                bool stochastic = false, Rng* rng = nullptr);

/// Aggregated neighbor prediction for `node`:
/// softmax( sum_{k in sample} influence(k, node) * p_k ), using the raw
/// (unnormalized) diffusion entries as weights.
std::vector<double> neighbor_aggregate(const NeighborSample& sample, const Matrix& influence,
                                       const Matrix& p, int node);

/// Confidence-weighted convex mix, one row per labeled node:
/// corrected_i = beta_i * y_i + (1 - beta_i) * h_i.
Matrix correct_labels(const Matrix& y_onehot, const CleanConfidence& beta, const Matrix& h_labeled);

/// Aggregated rows (one per id in `ids`), the pseudo-label targets for
/// unlabeled nodes. Precomputed samples may be passed; otherwise selection
/// runs per node (serially when stochastic, so rng draws are reproducible).
Matrix aggregate_rows(const RowStochasticDiffusion& tn, const Matrix& influence, const Matrix& p,
                      const std::vector<int>& ids, int m, bool stochastic = false,
                      Rng* rng = nullptr, const std::vector<NeighborSample>* premade = nullptr);

Matrix pseudo_labels(const RowStochasticDiffusion& tn, const Matrix& influence, const Matrix& p,
                     const std::vector<int>& unlabeled_ids, int m, bool stochastic = false,
                     Rng* rng = nullptr, const std::vector<NeighborSample>* premade = nullptr);

enum class TargetOrigin { corrected_labeled, pseudo_unlabeled, excluded };

/// Per-node soft training targets with row provenance. Excluded rows carry no
/// loss.
struct TargetMatrix {
  Matrix rows;
  std::vector<TargetOrigin> origin;

  std::vector<int> mask() const;  // ids of non-excluded rows
};

/// Stitches corrected labeled rows, pseudo rows, and excluded ids into a full
/// N-row target matrix. Every node must be covered exactly once; zero labeled
/// nodes is an error.
TargetMatrix assemble_targets(int n_nodes, const std::vector<int>& labeled_ids,
                              const Matrix& corrected, const std::vector<int>& pseudo_ids,
                              const Matrix& pseudo, const std::vector<int>& excluded_ids = {});

}  // namespace icgnn
