#pragma once

#include <array>
#include <vector>

#include "icgnn/matrix.hpp"

namespace icgnn {

enum class IcsLevel { structure, attribute, fused };

/// Per-labeled-node influence contradiction scores: the diffusion-weighted
/// influence a node receives from nodes annotated with *other* classes. High
/// score = the annotation disagrees with the node's neighborhood.
struct IcsVector {
  std::vector<double> values;
  IcsLevel level = IcsLevel::structure;
};

/// Partition of labeled positions 0..L-1 by annotated class; a set may be empty.
struct ClassIndexSets {
  std::vector<std::vector<int>> sets;

  int n_classes() const { return static_cast<int>(sets.size()); }
  int total() const;
  /// label_of[i] = class of labeled position i.
  std::vector<int> labels() const;
};

/// Two-component 1-D Gaussian mixture fitted by EM.
struct GmmModel {
  std::array<double, 2> weight{0.5, 0.5};
  std::array<double, 2> mean{0.0, 0.0};
  std::array<double, 2> variance{1.0, 1.0};
  std::vector<double> log_likelihood;  // one entry per EM iteration
  bool degenerate = false;

  /// Posterior probability of component q at value x under current parameters.
  double posterior(double x, int q) const;
};

/// Posterior probability of membership in the low-mean (clean) component,
/// one entry per labeled node, each in [0,1].
struct CleanConfidence {
  std::vector<double> beta;
};

ClassIndexSets class_index_sets(const std::vector<int>& noisy_labels, int n_classes);

/// influence is the full N x N diffusion matrix; labeled_ids maps labeled
/// position -> global node id. Score for labeled position i:
/// sum over classes j != y_i of (1/|C_j|) * sum_{k in C_j} influence(g(k), g(i));
/// empty classes contribute 0.
IcsVector structure_ics(const Matrix& influence, const ClassIndexSets& sets,
                        const std::vector<int>& labeled_ids);

/// Same score over an L x L diffusion matrix indexed by labeled position.
IcsVector attribute_ics(const Matrix& influence, const ClassIndexSets& sets);

/// (1-alpha) * structure + alpha * attribute, elementwise.
IcsVector fuse_ics(const IcsVector& s, const IcsVector& a, double alpha);

/// EM fit with deterministic initialization (means at the 25th/75th
/// percentiles, equal weights, pooled variance). Stops when the log-likelihood
/// improves by less than 1e-6 or after max_iters iterations. All-identical
/// input yields a degenerate model with both components at that value.
GmmModel fit_gmm(const IcsVector& ics, int max_iters = 10);

/// Posterior of the smaller-mean component at each score; degenerate model
/// gives confidence 1 everywhere.
CleanConfidence clean_confidence(const GmmModel& model, const IcsVector& ics);

constexpr double kGmmVarianceFloor = 1e-8;

}  // namespace icgnn
