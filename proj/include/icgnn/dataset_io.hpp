#pragma once

#include <string>
#include <vector>

#include "icgnn/graph.hpp"

namespace icgnn {

struct Dataset {
  Graph graph;
  std::vector<int> labels;  // ground-truth clean labels, one per node
  std::string name;
};

/// Reads a dataset directory:
///   edges.txt     one "i j" pair per line, 0-based, each undirected edge once
///   features.csv  one row of F comma-separated reals per node
///   labels.txt    one integer class id per node
///   meta.txt      n_nodes=<N> / n_classes=<C> / n_features=<F>
/// Throws DataError naming the offending file and line.
Dataset load_dataset(const std::string& dir);

void write_dataset(const std::string& dir, const Graph& graph, const std::vector<int>& labels);

/// Writes `content` to `path` via a temp file + rename.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace icgnn
