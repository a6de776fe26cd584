#pragma once

#include <utility>
#include <vector>

#include "icgnn/matrix.hpp"

namespace icgnn {

/// Undirected graph with dense node features. Each edge is stored once as
/// (min, max); no self-loops, no duplicates.
struct Graph {
  int n_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  Matrix features;  // n_nodes x F
  int n_classes = 0;

  int feature_dim() const { return static_cast<int>(features.cols); }

  /// Throws DataError if any structural invariant is violated.
  void validate() const;
};

/// Symmetrically normalized adjacency with self-loops:
/// entry (i,j) = 1/sqrt(deg_i * deg_j) where deg counts the self-loop.
struct NormalizedAdjacency {
  int n = 0;
  CsrMatrix csr;

  /// Dense materialization; refuses above the cap (the dense diffusion solve
  /// is only meant for desk-scale graphs).
  Matrix dense(int cap = 20000) const;
};

/// KNN graph over node representations: binary, symmetric (union of the two
/// directed picks), zero diagonal.
struct AffinityGraph {
  int n = 0;
  int k = 0;
  std::vector<std::pair<int, int>> edges;

  Matrix dense() const;
};

NormalizedAdjacency normalize_adjacency(const Graph& graph);
NormalizedAdjacency normalize_adjacency(int n_nodes, const std::vector<std::pair<int, int>>& edges);
NormalizedAdjacency normalize_adjacency(const AffinityGraph& affinity);

/// Row-normalized adjacency with self-loops (each row of A+I divided by its
/// degree). Used where a plain local-neighborhood operator replaces the
/// diffusion matrix.
Matrix row_normalized_adjacency(int n_nodes, const std::vector<std::pair<int, int>>& edges);

/// K nearest neighbors per row under cosine similarity, ties broken by lower
/// index, symmetrized by union. Zero-norm rows have similarity 0 to everything.
AffinityGraph build_knn_affinity(const Matrix& representations, int k);

}  // namespace icgnn
