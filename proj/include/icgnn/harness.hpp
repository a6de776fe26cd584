#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "icgnn/dataset_io.hpp"
#include "icgnn/diffusion.hpp"
#include "icgnn/graph.hpp"
#include "icgnn/label_refinery.hpp"
#include "icgnn/rng.hpp"

namespace icgnn {

struct NoiseSpec {
  std::string kind = "uniform";  // uniform | pair
  double rate = 0.2;
  std::uint64_t seed = 0;  // used only by the standalone inject-noise command
};

inline const std::vector<std::string> kAblationModes = {
    "full", "no_s_ics", "no_a_ics", "no_nc", "no_pl", "adjacency_instead_of_T", "gcn_only"};

struct ExperimentConfig {
  double epsilon = 0.85;
  int knn_k = 5;
  double alpha = 0.5;
  int hidden_dim = 64;
  double dropout = 0.5;
  double lr = 0.01;
  double weight_decay = 5e-4;
  int max_epochs = 200;
  int gmm_iters = 10;
  int neighbor_m = 32;
  int warmup_epochs = 0;
  double label_rate = 0.05;
  NoiseSpec noise;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string ablation = "full";
  bool stochastic_neighbors = false;
  bool select_last_epoch = false;  // default: best-validation model selection
  double pseudo_weight = 1.0;
  int dense_cap = 20000;
  int workers = 1;

  void validate() const;  // throws ConfigError

  /// Flat key=value form, one entry per field (seeds comma-joined).
  std::map<std::string, std::string> to_kv() const;
};

/// Parses a flat "key = value" config file ('#' comments). Unknown keys are
/// rejected.
ExperimentConfig parse_config_file(const std::string& path, ExperimentConfig base = {});

/// Applies key=value overrides on top of a config (same keys as the file).
ExperimentConfig apply_overrides(ExperimentConfig base,
                                 const std::vector<std::pair<std::string, std::string>>& kv);

/// Disjoint node sets: test / validation / labeled training / leftover pool.
/// Unlabeled nodes for pseudo-labeling are all non-labeled nodes.
struct NodeSplit {
  std::vector<int> labeled;
  std::vector<int> validation;
  std::vector<int> test;
  std::vector<int> pool;  // unlabeled training nodes

  std::vector<int> unlabeled(int n_nodes) const;
};

/// 80% test, 10% validation, label_rate*N labeled drawn from the remaining
/// pool. Requires every class to appear among the labeled nodes; retries the
/// draw up to 100 times, then throws.
NodeSplit split_nodes(int n_nodes, double label_rate, Rng rng, const std::vector<int>& clean_labels,
                      int n_classes);

using FlipMask = std::vector<bool>;

struct NoisyLabels {
  std::vector<int> labels;
  FlipMask flipped;
};

/// With probability p the label is replaced by a uniform draw over the other
/// C-1 classes.
NoisyLabels inject_uniform_noise(const std::vector<int>& clean, int n_classes, double p, Rng& rng);

/// With probability p, class c becomes (c+1) mod C.
NoisyLabels inject_pair_noise(const std::vector<int>& clean, int n_classes, double p, Rng& rng);

NoisyLabels inject_noise(const NoiseSpec& spec, const std::vector<int>& clean, int n_classes,
                         Rng& rng);

/// Stochastic block model with one block per class. Features are Gaussian
/// around per-class means with pairwise distance mean_shift.
Dataset generate_sbm(const std::vector<int>& block_sizes, double p_in, double p_out,
                     int feature_dim, double mean_shift, Rng& rng);

struct DetectionMetrics {
  double auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// AUC of ranking by (1 - beta) against the flip mask (ties count half), and
/// precision/recall of the rule "noisy if beta < 0.5". Throws if the mask is
/// all-true or all-false.
DetectionMetrics detection_metrics(const std::vector<double>& beta, const FlipMask& mask);

/// Fraction of masked nodes where pred == truth. pred/truth are full-length
/// per-node vectors.
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                const std::vector<int>& mask);

/// Everything derived from the graph alone (shared across seeds/runs):
/// the normalized adjacency, the influence matrix (diffusion, or the
/// row-normalized A+I variant), its row-normalized form, and per-node
/// deterministic neighbor picks.
struct PipelineContext {
  NormalizedAdjacency adj;
  Matrix influence;
  RowStochasticDiffusion influence_rows;
  std::vector<NeighborSample> neighbors;
  double ppr_residual = 0.0;
};

PipelineContext build_context(const Graph& graph, const ExperimentConfig& config);

struct SeedResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double test_accuracy = 0.0;
  double best_val_accuracy = 0.0;
  std::optional<DetectionMetrics> detection;
  std::vector<double> loss_trace;
  std::vector<double> val_trace;
  double wall_seconds = 0.0;
};

struct ExperimentReport {
  std::string dataset;
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation over seeds

  std::string to_json() const;
  /// One row per seed; excludes wall-clock so identical runs are
  /// byte-identical.
  std::string summary_csv() const;
};

ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data,
                                const PipelineContext* shared_context = nullptr);

/// One detection pass (epoch-0 state): split, inject noise, score, fit, emit.
struct DetectionRow {
  int node_id;
  double structure;
  double attribute;
  double fused;
  double beta;
};

std::vector<DetectionRow> run_detection(const ExperimentConfig& config, const Dataset& data);

std::string format_double(double v);

}  // namespace icgnn
