#include "icgnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "icgnn/encoder.hpp"
#include "icgnn/errors.hpp"
#include "icgnn/kernels.hpp"

namespace icgnn {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (!(epsilon > 0.0 && epsilon < 1.0)) bad("epsilon must lie in (0,1)");
  if (knn_k < 1) bad("knn_k must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) bad("alpha must lie in [0,1]");
  if (hidden_dim < 1) bad("hidden_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad("dropout must lie in [0,1)");
  if (!(lr > 0.0)) bad("lr must be positive");
  if (weight_decay < 0.0) bad("weight_decay must be >= 0");
  if (max_epochs < 1) bad("max_epochs must be >= 1");
  if (gmm_iters < 1) bad("gmm_iters must be >= 1");
  if (neighbor_m < 1) bad("neighbor_m must be >= 1");
  if (warmup_epochs < 0) bad("warmup_epochs must be >= 0");
  if (!(label_rate > 0.0 && label_rate <= 0.10))
    bad("label_rate must lie in (0, 0.10] (training labels come from the 10% split)");
  if (noise.kind != "uniform" && noise.kind != "pair")
    bad("noise_kind must be 'uniform' or 'pair'");
  if (!(noise.rate >= 0.0 && noise.rate < 1.0)) bad("noise_rate must lie in [0,1)");
  if (seeds.empty()) bad("seeds must be non-empty");
  if (std::find(kAblationModes.begin(), kAblationModes.end(), ablation) == kAblationModes.end())
    bad("unknown ablation '" + ablation + "'");
  if (pseudo_weight < 0.0) bad("pseudo_weight must be >= 0");
  if (dense_cap < 1) bad("dense_cap must be >= 1");
  if (workers < 1) bad("workers must be >= 1");
}

std::map<std::string, std::string> ExperimentConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["epsilon"] = format_double(epsilon);
  kv["knn_k"] = std::to_string(knn_k);
  kv["alpha"] = format_double(alpha);
  kv["hidden_dim"] = std::to_string(hidden_dim);
  kv["dropout"] = format_double(dropout);
  kv["lr"] = format_double(lr);
  kv["weight_decay"] = format_double(weight_decay);
  kv["max_epochs"] = std::to_string(max_epochs);
  kv["gmm_iters"] = std::to_string(gmm_iters);
  kv["neighbor_m"] = std::to_string(neighbor_m);
  kv["warmup_epochs"] = std::to_string(warmup_epochs);
  kv["label_rate"] = format_double(label_rate);
  kv["noise_kind"] = noise.kind;
  kv["noise_rate"] = format_double(noise.rate);
  kv["noise_seed"] = std::to_string(noise.seed);
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(seeds[i]);
  }
  kv["seeds"] = s;
  kv["ablation"] = ablation;
  kv["stochastic_neighbors"] = stochastic_neighbors ? "true" : "false";
  kv["select_last_epoch"] = select_last_epoch ? "true" : "false";
  kv["pseudo_weight"] = format_double(pseudo_weight);
  kv["dense_cap"] = std::to_string(dense_cap);
  kv["workers"] = std::to_string(workers);
  return kv;
}

namespace {

double parse_double_value(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

long parse_int_value(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

bool parse_bool_value(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const std::string tok = v.substr(start, comma == std::string::npos ? std::string::npos
                                                                       : comma - start);
    seeds.push_back(static_cast<std::uint64_t>(parse_int_value(key, tok)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (seeds.empty()) throw ConfigError("config: key '" + key + "' expects at least one seed");
  return seeds;
}

void set_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "epsilon") c.epsilon = parse_double_value(key, value);
  else if (key == "knn_k") c.knn_k = static_cast<int>(parse_int_value(key, value));
  else if (key == "alpha") c.alpha = parse_double_value(key, value);
  else if (key == "hidden_dim") c.hidden_dim = static_cast<int>(parse_int_value(key, value));
  else if (key == "dropout") c.dropout = parse_double_value(key, value);
  else if (key == "lr") c.lr = parse_double_value(key, value);
  else if (key == "weight_decay") c.weight_decay = parse_double_value(key, value);
  else if (key == "max_epochs") c.max_epochs = static_cast<int>(parse_int_value(key, value));
  else if (key == "gmm_iters") c.gmm_iters = static_cast<int>(parse_int_value(key, value));
  else if (key == "neighbor_m") c.neighbor_m = static_cast<int>(parse_int_value(key, value));
  else if (key == "warmup_epochs") c.warmup_epochs = static_cast<int>(parse_int_value(key, value));
  else if (key == "label_rate") c.label_rate = parse_double_value(key, value);
  else if (key == "noise_kind") c.noise.kind = value;
  else if (key == "noise_rate") c.noise.rate = parse_double_value(key, value);
  else if (key == "noise_seed") c.noise.seed = static_cast<std::uint64_t>(parse_int_value(key, value));
  else if (key == "seeds") c.seeds = parse_seed_list(key, value);
  else if (key == "ablation") c.ablation = value;
  else if (key == "stochastic_neighbors") c.stochastic_neighbors = parse_bool_value(key, value);
  else if (key == "select_last_epoch") c.select_last_epoch = parse_bool_value(key, value);
  else if (key == "pseudo_weight") c.pseudo_weight = parse_double_value(key, value);
  else if (key == "dense_cap") c.dense_cap = static_cast<int>(parse_int_value(key, value));
  else if (key == "workers") c.workers = static_cast<int>(parse_int_value(key, value));
  else throw ConfigError("config: unknown key '" + key + "'");
}

std::string trim_copy(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

}  // namespace

ExperimentConfig parse_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim_copy(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    set_config_key(base, trim_copy(t.substr(0, eq)), trim_copy(t.substr(eq + 1)));
  }
  return base;
}

ExperimentConfig apply_overrides(ExperimentConfig base,
                                 const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) set_config_key(base, k, v);
  return base;
}

// ---------------------------------------------------------------------------
// Splits and noise
// ---------------------------------------------------------------------------

std::vector<int> NodeSplit::unlabeled(int n_nodes) const {
  std::vector<bool> is_labeled(static_cast<std::size_t>(n_nodes), false);
  for (int id : labeled) is_labeled[static_cast<std::size_t>(id)] = true;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n_nodes) - labeled.size());
  for (int i = 0; i < n_nodes; ++i)
    if (!is_labeled[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

NodeSplit split_nodes(int n_nodes, double label_rate, Rng rng, const std::vector<int>& clean_labels,
                      int n_classes) {
  if (!(label_rate > 0.0 && label_rate <= 0.10))
    throw ConfigError("split_nodes: label_rate must lie in (0, 0.10]");
  if (static_cast<int>(clean_labels.size()) != n_nodes)
    throw DataError("split_nodes: label count mismatch");
  const int n_test = static_cast<int>(0.8 * n_nodes + 1e-9);
  const int n_val = static_cast<int>(0.1 * n_nodes + 1e-9);
  const int n_labeled = static_cast<int>(label_rate * n_nodes + 1e-9);
  if (n_labeled < n_classes)
    throw ConfigError("split_nodes: " + std::to_string(n_labeled) +
                      " labeled nodes cannot cover " + std::to_string(n_classes) + " classes");

  std::vector<int> perm(static_cast<std::size_t>(n_nodes));
  std::iota(perm.begin(), perm.end(), 0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    rng.shuffle(perm);
    NodeSplit s;
    s.test.assign(perm.begin(), perm.begin() + n_test);
    s.validation.assign(perm.begin() + n_test, perm.begin() + n_test + n_val);
    s.labeled.assign(perm.begin() + n_test + n_val, perm.begin() + n_test + n_val + n_labeled);
    s.pool.assign(perm.begin() + n_test + n_val + n_labeled, perm.end());
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (int id : s.labeled) seen[static_cast<std::size_t>(clean_labels[static_cast<std::size_t>(id)])] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) continue;
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.validation.begin(), s.validation.end());
    std::sort(s.labeled.begin(), s.labeled.end());
    std::sort(s.pool.begin(), s.pool.end());
    return s;
  }
  throw DataError("split_nodes: could not draw a labeled set covering every class in 100 tries");
}

NoisyLabels inject_uniform_noise(const std::vector<int>& clean, int n_classes, double p, Rng& rng) {
  if (n_classes < 2) throw ConfigError("inject_uniform_noise: need at least 2 classes");
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("inject_uniform_noise: rate must lie in [0,1)");
  NoisyLabels out;
  out.labels = clean;
  out.flipped.assign(clean.size(), false);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (rng.uniform() >= p) continue;
    const int offset = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_classes - 1)));
    const int other = offset >= clean[i] ? offset + 1 : offset;
    out.labels[i] = other;
    out.flipped[i] = true;
  }
  return out;
}

NoisyLabels inject_pair_noise(const std::vector<int>& clean, int n_classes, double p, Rng& rng) {
  if (n_classes < 2) throw ConfigError("inject_pair_noise: need at least 2 classes");
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("inject_pair_noise: rate must lie in [0,1)");
  NoisyLabels out;
  out.labels = clean;
  out.flipped.assign(clean.size(), false);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (rng.uniform() >= p) continue;
    out.labels[i] = (clean[i] + 1) % n_classes;
    out.flipped[i] = true;
  }
  return out;
}

NoisyLabels inject_noise(const NoiseSpec& spec, const std::vector<int>& clean, int n_classes,
                         Rng& rng) {
  if (spec.kind == "uniform") return inject_uniform_noise(clean, n_classes, spec.rate, rng);
  if (spec.kind == "pair") return inject_pair_noise(clean, n_classes, spec.rate, rng);
  throw ConfigError("inject_noise: unknown noise kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

Dataset generate_sbm(const std::vector<int>& block_sizes, double p_in, double p_out,
                     int feature_dim, double mean_shift, Rng& rng) {
  const int c = static_cast<int>(block_sizes.size());
  if (c < 2) throw ConfigError("generate_sbm: need at least 2 blocks");
  if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
    throw ConfigError("generate_sbm: probabilities must lie in [0,1]");
  if (feature_dim < c)
    throw ConfigError("generate_sbm: feature_dim must be >= number of blocks");
  for (int b : block_sizes)
    if (b < 1) throw ConfigError("generate_sbm: block sizes must be positive");

  Dataset ds;
  ds.name = "sbm";
  int n = 0;
  for (int b : block_sizes) n += b;
  ds.graph.n_nodes = n;
  ds.graph.n_classes = c;
  ds.labels.reserve(static_cast<std::size_t>(n));
  for (int b = 0; b < c; ++b)
    for (int i = 0; i < block_sizes[static_cast<std::size_t>(b)]; ++i) ds.labels.push_back(b);

  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double p = ds.labels[static_cast<std::size_t>(i)] == ds.labels[static_cast<std::size_t>(j)]
                           ? p_in
                           : p_out;
      if (rng.uniform() < p) ds.graph.edges.emplace_back(i, j);
    }

  // Class mean c sits at (mean_shift / sqrt(2)) * e_c, so any two class means
  // are exactly mean_shift apart.
  ds.graph.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(feature_dim));
  const double coord = mean_shift / std::sqrt(2.0);
  for (int i = 0; i < n; ++i) {
    double* row = ds.graph.features.row(static_cast<std::size_t>(i));
    for (int j = 0; j < feature_dim; ++j) row[j] = rng.normal();
    row[ds.labels[static_cast<std::size_t>(i)]] += coord;
  }
  ds.graph.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

DetectionMetrics detection_metrics(const std::vector<double>& beta, const FlipMask& mask) {
  if (beta.size() != mask.size()) throw DataError("detection_metrics: length mismatch");
  const std::size_t n = beta.size();
  std::size_t n_pos = 0;
  for (bool b : mask) n_pos += b ? 1 : 0;
  if (n_pos == 0 || n_pos == n)
    throw DataError("detection_metrics: flip mask must contain both flipped and clean nodes");

  // Rank by score = 1 - beta with midranks for ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&beta](std::size_t a, std::size_t b) {
    return (1.0 - beta[a]) < (1.0 - beta[b]);
  });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && beta[order[j + 1]] == beta[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (mask[k]) sum_pos += rank[k];
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n - n_pos);
  DetectionMetrics m;
  m.auc = (sum_pos - np * (np + 1.0) / 2.0) / (np * nn);

  std::size_t declared = 0, tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (beta[k] < 0.5) {
      ++declared;
      if (mask[k]) ++tp;
    }
  }
  m.precision = declared == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(declared);
  m.recall = static_cast<double>(tp) / np;
  return m;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth,
                const std::vector<int>& mask) {
  if (pred.size() != truth.size()) throw DataError("accuracy: length mismatch");
  if (mask.empty()) throw ConfigError("accuracy: empty mask");
  std::size_t hit = 0;
  for (int id : mask) {
    const std::size_t i = static_cast<std::size_t>(id);
    if (i >= pred.size()) throw DataError("accuracy: mask id out of range");
    if (pred[i] == truth[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(mask.size());
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

PipelineContext build_context(const Graph& graph, const ExperimentConfig& config) {
  PipelineContext ctx;
  ctx.adj = normalize_adjacency(graph);
  if (config.ablation == "adjacency_instead_of_T") {
    ctx.influence = row_normalized_adjacency(graph.n_nodes, graph.edges);
    ctx.ppr_residual = 0.0;
  } else {
    DiffusionMatrix t = ppr_diffusion(ctx.adj, config.epsilon, DiffusionSource::structure,
                                      config.dense_cap);
    ctx.ppr_residual = t.residual;
    ctx.influence = std::move(t.m);
  }
  ctx.influence_rows = row_normalize(ctx.influence);
  if (!config.stochastic_neighbors) {
    ctx.neighbors.resize(static_cast<std::size_t>(graph.n_nodes));
    const std::int64_t n = graph.n_nodes;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
      ctx.neighbors[static_cast<std::size_t>(i)] =
          select_neighbors(ctx.influence_rows, static_cast<int>(i), config.neighbor_m);
  }
  return ctx;
}

namespace {

Matrix one_hot_rows(const std::vector<int>& labels, int n_classes) {
  Matrix m(labels.size(), static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i)
    m(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return m;
}

Matrix gather_rows(const Matrix& src, const std::vector<int>& ids) {
  Matrix out(ids.size(), src.cols);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(src.row(static_cast<std::size_t>(ids[i])),
              src.row(static_cast<std::size_t>(ids[i])) + src.cols, out.row(i));
  return out;
}

double resolved_alpha(const ExperimentConfig& config) {
  if (config.ablation == "no_s_ics") return 1.0;
  if (config.ablation == "no_a_ics") return 0.0;
  return config.alpha;
}

SeedResult run_seed(const ExperimentConfig& config, const Dataset& data,
                    const PipelineContext& ctx, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  SeedResult res;
  res.seed = seed;

  const Graph& g = data.graph;
  const int n = g.n_nodes;
  const int c = g.n_classes;

  Rng master(seed);
  const NodeSplit split =
      split_nodes(n, config.label_rate, master.stream("split"), data.labels, c);
  const std::vector<int> unlabeled = split.unlabeled(n);

  std::vector<int> clean_labeled;
  clean_labeled.reserve(split.labeled.size());
  for (int id : split.labeled) clean_labeled.push_back(data.labels[static_cast<std::size_t>(id)]);
  Rng noise_rng = master.stream("noise");
  const NoisyLabels noisy = inject_noise(config.noise, clean_labeled, c, noise_rng);

  const Matrix y_onehot = one_hot_rows(noisy.labels, c);
  const ClassIndexSets sets = class_index_sets(noisy.labels, c);
  const IcsVector s_ics = structure_ics(ctx.influence, sets, split.labeled);

  const double alpha = resolved_alpha(config);
  const bool gcn_only = config.ablation == "gcn_only";
  const bool correction_on = config.ablation != "no_nc" && !gcn_only;
  const bool pseudo_on = config.ablation != "no_pl" && !gcn_only;

  Rng init_rng = master.stream("init");
  ModelParams params =
      init_params(g.feature_dim(), config.hidden_dim, c, config.dropout, init_rng);
  OptimizerState opt(params, config.lr, config.weight_decay);
  Rng drop_rng = master.stream("dropout");
  Rng nbr_rng = master.stream("neighbors");

  std::vector<double> row_weights(static_cast<std::size_t>(n), 1.0);
  for (int id : unlabeled) row_weights[static_cast<std::size_t>(id)] = config.pseudo_weight;

  const Matrix empty_rows(0, static_cast<std::size_t>(c));
  const std::vector<int> no_ids;

  double best_val = -1.0;
  ModelParams best_params = params;
  CleanConfidence last_beta;

  try {
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
      const ForwardOutput eval_out = forward(ctx.adj, g.features, params, ForwardMode::eval);
      const std::vector<int> pred = predict_all(eval_out);
      const double val_acc = accuracy(pred, data.labels, split.validation);
      if (val_acc > best_val) {
        best_val = val_acc;
        best_params = params;
      }

      TargetMatrix targets;
      const bool plain = gcn_only || epoch < config.warmup_epochs;
      if (plain) {
        targets = assemble_targets(n, split.labeled, y_onehot, no_ids, empty_rows, unlabeled);
      } else {
        IcsVector fused;
        if (alpha == 0.0) {
          fused = s_ics;
          fused.level = IcsLevel::fused;
        } else {
          const Matrix z_labeled = gather_rows(eval_out.z, split.labeled);
          const AffinityGraph affinity = build_knn_affinity(z_labeled, config.knn_k);
          const DiffusionMatrix r =
              ppr_diffusion(normalize_adjacency(affinity), config.epsilon,
                            DiffusionSource::attribute, config.dense_cap);
          const IcsVector a_ics = attribute_ics(r.m, sets);
          fused = fuse_ics(s_ics, a_ics, alpha);
        }
        const GmmModel gmm = fit_gmm(fused, config.gmm_iters);
        const CleanConfidence beta = clean_confidence(gmm, fused);
        last_beta = beta;

        Matrix corrected;
        if (correction_on) {
          const Matrix h_labeled = aggregate_rows(
              ctx.influence_rows, ctx.influence, eval_out.p, split.labeled, config.neighbor_m,
              config.stochastic_neighbors, &nbr_rng,
              config.stochastic_neighbors ? nullptr : &ctx.neighbors);
          corrected = correct_labels(y_onehot, beta, h_labeled);
        } else {
          corrected = y_onehot;
        }

        if (pseudo_on) {
          const Matrix pseudo = pseudo_labels(
              ctx.influence_rows, ctx.influence, eval_out.p, unlabeled, config.neighbor_m,
              config.stochastic_neighbors, &nbr_rng,
              config.stochastic_neighbors ? nullptr : &ctx.neighbors);
          targets = assemble_targets(n, split.labeled, corrected, unlabeled, pseudo);
        } else {
          targets = assemble_targets(n, split.labeled, corrected, no_ids, empty_rows, unlabeled);
        }
      }

      const ForwardOutput train_out =
          forward(ctx.adj, g.features, params, ForwardMode::train, &drop_rng);
      const LossGrad lg = loss_and_grad(train_out, targets.rows, targets.mask(), &row_weights,
                                        params, ctx.adj, g.features, 0.0);
      if (!std::isfinite(lg.loss)) throw NumericError("training loss is not finite");
      if (!optimizer_step(params, lg.grads, opt))
        std::fprintf(stderr, "seed %llu epoch %d: non-finite gradient, step skipped\n",
                     static_cast<unsigned long long>(seed), epoch);
      res.loss_trace.push_back(lg.loss);
      res.val_trace.push_back(val_acc);
    }

    {
      const ForwardOutput eval_out = forward(ctx.adj, g.features, params, ForwardMode::eval);
      const double val_acc = accuracy(predict_all(eval_out), data.labels, split.validation);
      if (val_acc > best_val) {
        best_val = val_acc;
        best_params = params;
      }
    }

    const ModelParams& chosen = config.select_last_epoch ? params : best_params;
    const ForwardOutput final_out = forward(ctx.adj, g.features, chosen, ForwardMode::eval);
    res.test_accuracy = accuracy(predict_all(final_out), data.labels, split.test);
    res.best_val_accuracy = best_val;

    if (!last_beta.beta.empty()) {
      bool any = false, all = true;
      for (bool b : noisy.flipped) {
        any = any || b;
        all = all && b;
      }
      if (any && !all) res.detection = detection_metrics(last_beta.beta, noisy.flipped);
    }
  } catch (const NumericError& e) {
    res.failed = true;
    res.failure = e.what();
  }

  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const Dataset& data,
                                const PipelineContext* shared_context) {
  config.validate();
  data.graph.validate();

  ExperimentReport report;
  report.dataset = data.name;
  report.config = config;

  PipelineContext local;
  const PipelineContext* ctx = shared_context;
  if (ctx == nullptr) {
    local = build_context(data.graph, config);
    ctx = &local;
  }

  for (std::uint64_t seed : config.seeds) report.seeds.push_back(run_seed(config, data, *ctx, seed));

  std::vector<double> accs;
  for (const auto& s : report.seeds)
    if (!s.failed) accs.push_back(s.test_accuracy);
  if (!accs.empty()) {
    report.mean_accuracy =
        std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
    double sq = 0.0;
    for (double a : accs) sq += (a - report.mean_accuracy) * (a - report.mean_accuracy);
    report.std_accuracy =
        accs.size() > 1 ? std::sqrt(sq / static_cast<double>(accs.size() - 1)) : 0.0;
  } else {
    report.mean_accuracy = std::nan("");
    report.std_accuracy = std::nan("");
  }
  return report;
}

std::vector<DetectionRow> run_detection(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  data.graph.validate();
  const Graph& g = data.graph;
  const int c = g.n_classes;

  const PipelineContext ctx = build_context(g, config);
  const std::uint64_t seed = config.seeds.front();
  Rng master(seed);
  const NodeSplit split =
      split_nodes(g.n_nodes, config.label_rate, master.stream("split"), data.labels, c);
  std::vector<int> clean_labeled;
  for (int id : split.labeled) clean_labeled.push_back(data.labels[static_cast<std::size_t>(id)]);
  Rng noise_rng = master.stream("noise");
  const NoisyLabels noisy = inject_noise(config.noise, clean_labeled, c, noise_rng);
  const ClassIndexSets sets = class_index_sets(noisy.labels, c);

  const IcsVector s_ics = structure_ics(ctx.influence, sets, split.labeled);

  Rng init_rng = master.stream("init");
  const ModelParams params =
      init_params(g.feature_dim(), config.hidden_dim, c, config.dropout, init_rng);
  const ForwardOutput eval_out = forward(ctx.adj, g.features, params, ForwardMode::eval);
  const Matrix z_labeled = gather_rows(eval_out.z, split.labeled);
  const AffinityGraph affinity = build_knn_affinity(z_labeled, config.knn_k);
  const DiffusionMatrix r = ppr_diffusion(normalize_adjacency(affinity), config.epsilon,
                                          DiffusionSource::attribute, config.dense_cap);
  const IcsVector a_ics = attribute_ics(r.m, sets);
  const IcsVector fused = fuse_ics(s_ics, a_ics, resolved_alpha(config));
  const GmmModel gmm = fit_gmm(fused, config.gmm_iters);
  const CleanConfidence beta = clean_confidence(gmm, fused);

  std::vector<DetectionRow> rows;
  rows.reserve(split.labeled.size());
  for (std::size_t i = 0; i < split.labeled.size(); ++i)
    rows.push_back(DetectionRow{split.labeled[i], s_ics.values[i], a_ics.values[i],
                                fused.values[i], beta.beta[i]});
  return rows;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

std::string ExperimentReport::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  nlohmann::ordered_json jc;
  jc["epsilon"] = config.epsilon;
  jc["knn_k"] = config.knn_k;
  jc["alpha"] = config.alpha;
  jc["hidden_dim"] = config.hidden_dim;
  jc["dropout"] = config.dropout;
  jc["lr"] = config.lr;
  jc["weight_decay"] = config.weight_decay;
  jc["max_epochs"] = config.max_epochs;
  jc["gmm_iters"] = config.gmm_iters;
  jc["neighbor_m"] = config.neighbor_m;
  jc["warmup_epochs"] = config.warmup_epochs;
  jc["label_rate"] = config.label_rate;
  jc["noise_kind"] = config.noise.kind;
  jc["noise_rate"] = config.noise.rate;
  jc["seeds"] = config.seeds;
  jc["ablation"] = config.ablation;
  jc["stochastic_neighbors"] = config.stochastic_neighbors;
  jc["select_last_epoch"] = config.select_last_epoch;
  jc["pseudo_weight"] = config.pseudo_weight;
  jc["dense_cap"] = config.dense_cap;
  jc["workers"] = config.workers;
  j["config"] = std::move(jc);

  nlohmann::ordered_json js = nlohmann::ordered_json::array();
  for (const auto& s : seeds) {
    nlohmann::ordered_json e;
    e["seed"] = s.seed;
    e["failed"] = s.failed;
    if (s.failed) e["failure"] = s.failure;
    e["test_accuracy"] = s.test_accuracy;
    e["best_val_accuracy"] = s.best_val_accuracy;
    if (s.detection) {
      e["detection"] = {{"auc", s.detection->auc},
                        {"precision", s.detection->precision},
                        {"recall", s.detection->recall}};
    } else {
      e["detection"] = nullptr;
    }
    e["loss_trace"] = s.loss_trace;
    e["val_trace"] = s.val_trace;
    e["wall_seconds"] = s.wall_seconds;
    js.push_back(std::move(e));
  }
  j["seeds"] = std::move(js);
  j["mean_accuracy"] = mean_accuracy;
  j["std_accuracy"] = std_accuracy;
  return j.dump(2) + "\n";
}

std::string ExperimentReport::summary_csv() const {
  std::string out =
      "dataset,ablation,noise_kind,noise_rate,label_rate,seed,test_accuracy,"
      "best_val_accuracy,detection_auc,detection_precision,detection_recall,failed\n";
  for (const auto& s : seeds) {
    out += dataset + "," + config.ablation + "," + config.noise.kind + "," +
           format_double(config.noise.rate) + "," + format_double(config.label_rate) + "," +
           std::to_string(s.seed) + ",";
    if (s.failed) {
      out += ",,,,,true\n";
      continue;
    }
    out += format_double(s.test_accuracy) + "," + format_double(s.best_val_accuracy) + ",";
    if (s.detection) {
      out += format_double(s.detection->auc) + "," + format_double(s.detection->precision) + "," +
             format_double(s.detection->recall);
    } else {
      out += ",,";
    }
    out += ",false\n";
  }
  return out;
}

}  // namespace icgnn
