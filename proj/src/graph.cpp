#include "icgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include "icgnn/errors.hpp"

namespace icgnn {

void Graph::validate() const {
  if (n_nodes <= 0) throw DataError("graph: n_nodes must be positive");
  if (n_classes < 2) throw DataError("graph: need at least 2 classes");
  if (features.rows != static_cast<std::size_t>(n_nodes))
    throw DataError("graph: feature row count " + std::to_string(features.rows) +
                    " does not match n_nodes " + std::to_string(n_nodes));
  if (features.cols < 1) throw DataError("graph: need at least 1 feature");
  std::set<std::pair<int, int>> seen;
  for (const auto& [a, b] : edges) {
    if (a == b) throw DataError("graph: self-loop at node " + std::to_string(a));
    if (a < 0 || a >= n_nodes || b < 0 || b >= n_nodes)
      throw DataError("graph: edge endpoint out of range (" + std::to_string(a) + "," +
                      std::to_string(b) + ")");
    const auto key = std::minmax(a, b);
    if (!seen.insert(key).second)
      throw DataError("graph: duplicate edge (" + std::to_string(key.first) + "," +
                      std::to_string(key.second) + ")");
  }
}

Matrix NormalizedAdjacency::dense(int cap) const {
  if (n > cap)
    throw ConfigError("normalized adjacency: " + std::to_string(n) +
                      " nodes exceeds dense cap " + std::to_string(cap));
  return csr.dense();
}

Matrix AffinityGraph::dense() const {
  Matrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  for (const auto& [a, b] : edges) {
    m(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) = 1.0;
    m(static_cast<std::size_t>(b), static_cast<std::size_t>(a)) = 1.0;
  }
  return m;
}

namespace {

std::vector<std::vector<int>> adjacency_lists(int n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

}  // namespace

NormalizedAdjacency normalize_adjacency(int n_nodes, const std::vector<std::pair<int, int>>& edges) {
  if (n_nodes <= 0) throw DataError("normalize_adjacency: empty graph");
  const auto adj = adjacency_lists(n_nodes, edges);
  std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i)
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size() + 1));

  NormalizedAdjacency out;
  out.n = n_nodes;
  out.csr.n_rows = out.csr.n_cols = static_cast<std::size_t>(n_nodes);
  out.csr.indptr.resize(static_cast<std::size_t>(n_nodes) + 1, 0);
  for (int i = 0; i < n_nodes; ++i)
    out.csr.indptr[i + 1] = out.csr.indptr[i] + static_cast<std::int64_t>(adj[i].size()) + 1;
  out.csr.indices.resize(static_cast<std::size_t>(out.csr.indptr.back()));
  out.csr.values.resize(out.csr.indices.size());
  for (int i = 0; i < n_nodes; ++i) {
    std::int64_t p = out.csr.indptr[i];
    bool self_done = false;
    auto emit = [&](int j) {
      out.csr.indices[p] = j;
      out.csr.values[p] = inv_sqrt_deg[i] * inv_sqrt_deg[j];
      ++p;
    };
    for (int j : adj[i]) {
      if (!self_done && j > i) {
        emit(i);
        self_done = true;
      }
      emit(j);
    }
    if (!self_done) emit(i);
  }
  return out;
}

NormalizedAdjacency normalize_adjacency(const Graph& graph) {
  return normalize_adjacency(graph.n_nodes, graph.edges);
}

NormalizedAdjacency normalize_adjacency(const AffinityGraph& affinity) {
  return normalize_adjacency(affinity.n, affinity.edges);
}

Matrix row_normalized_adjacency(int n_nodes, const std::vector<std::pair<int, int>>& edges) {
  if (n_nodes <= 0) throw DataError("row_normalized_adjacency: empty graph");
  const auto adj = adjacency_lists(n_nodes, edges);
  Matrix m(static_cast<std::size_t>(n_nodes), static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    const double w = 1.0 / static_cast<double>(adj[i].size() + 1);
    m(i, i) = w;
    for (int j : adj[i]) m(i, j) = w;
  }
  return m;
}

AffinityGraph build_knn_affinity(const Matrix& representations, int k) {
  const int l = static_cast<int>(representations.rows);
  if (k < 1) throw ConfigError("build_knn_affinity: k must be >= 1");
  if (k >= l)
    throw ConfigError("build_knn_affinity: k = " + std::to_string(k) +
                      " must be smaller than the number of rows " + std::to_string(l));
  if (!representations.all_finite())
    throw DataError("build_knn_affinity: non-finite representation value");

  std::vector<double> norm(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) {
    const double* r = representations.row(static_cast<std::size_t>(i));
    double s = 0.0;
    for (std::size_t j = 0; j < representations.cols; ++j) s += r[j] * r[j];
    norm[i] = std::sqrt(s);
  }

  std::vector<std::vector<int>> picks(static_cast<std::size_t>(l));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < l; ++i) {
    const double* ri = representations.row(static_cast<std::size_t>(i));
    std::vector<double> sim(static_cast<std::size_t>(l), 0.0);
    for (int j = 0; j < l; ++j) {
      if (j == i || norm[i] == 0.0 || norm[j] == 0.0) continue;
      const double* rj = representations.row(static_cast<std::size_t>(j));
      double dot = 0.0;
      for (std::size_t d = 0; d < representations.cols; ++d) dot += ri[d] * rj[d];
      sim[j] = dot / (norm[i] * norm[j]);
    }
    std::vector<int> cand;
    cand.reserve(static_cast<std::size_t>(l) - 1);
    for (int j = 0; j < l; ++j)
      if (j != i) cand.push_back(j);
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), [&sim](int a, int b) {
      if (sim[a] != sim[b]) return sim[a] > sim[b];
      return a < b;
    });
    cand.resize(static_cast<std::size_t>(k));
    picks[i] = std::move(cand);
  }

  std::set<std::pair<int, int>> undirected;
  for (int i = 0; i < l; ++i)
    for (int j : picks[i]) undirected.insert(std::minmax(i, j));

  AffinityGraph out;
  out.n = l;
  out.k = k;
  out.edges.assign(undirected.begin(), undirected.end());
  return out;
}

}  // namespace icgnn
