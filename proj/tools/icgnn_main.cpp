#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "icgnn/dataset_io.hpp"
#include "icgnn/errors.hpp"
#include "icgnn/harness.hpp"

namespace fs = std::filesystem;
using namespace icgnn;

namespace {

// Every config key is reachable as a --key flag; flags beat the config file,
// which beats built-in defaults.
const std::vector<std::string> kConfigKeys = {
    "epsilon",       "knn_k",       "alpha",        "hidden_dim",
    "dropout",       "lr",          "weight_decay", "max_epochs",
    "gmm_iters",     "neighbor_m",  "warmup_epochs", "label_rate",
    "noise_kind",    "noise_rate",  "noise_seed",   "seeds",
    "ablation",      "stochastic_neighbors",        "select_last_epoch",
    "pseudo_weight", "dense_cap",   "workers"};

struct CommonOpts {
  std::string data_dir;
  std::string out_dir = "out";
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "flat 'key = value' config file");
  for (const std::string& key : kConfigKeys) {
    cmd->add_option_function<std::string>(
        "--" + key, [&opts, key](const std::string& v) { opts.overrides[key] = v; },
        "override config key " + key);
  }
  cmd->add_option_function<std::string>(
      "--seed", [&opts](const std::string& v) { opts.overrides["seeds"] = v; },
      "single-seed shorthand for --seeds");
}

ExperimentConfig resolve_config(const CommonOpts& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = parse_config_file(opts.config_path, cfg);
  std::vector<std::pair<std::string, std::string>> kv(opts.overrides.begin(),
                                                      opts.overrides.end());
  cfg = apply_overrides(cfg, kv);
  cfg.validate();
  return cfg;
}

Dataset load_required(const CommonOpts& opts) {
  if (opts.data_dir.empty()) throw ConfigError("--data is required");
  return load_dataset(opts.data_dir);
}

void run_indexed(int workers, int n, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, omp_get_max_threads() / workers));
#endif
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int count = std::min(workers, n);
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w)
    pool.emplace_back([&next, n, &fn] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string tok =
        s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("expected a comma-separated list of numbers, got '" + s + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    out.push_back(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void cmd_train(const CommonOpts& opts) {
  const ExperimentConfig cfg = resolve_config(opts);
  const Dataset data = load_required(opts);
  const ExperimentReport report = run_experiment(cfg, data);
  fs::create_directories(opts.out_dir);
  atomic_write((fs::path(opts.out_dir) / "report.json").string(), report.to_json());
  atomic_write((fs::path(opts.out_dir) / "summary.csv").string(), report.summary_csv());
  std::printf("%s %s: mean accuracy %s +- %s over %zu seeds\n", data.name.c_str(),
              cfg.ablation.c_str(), format_double(report.mean_accuracy).c_str(),
              format_double(report.std_accuracy).c_str(), report.seeds.size());
}

void cmd_detect(const CommonOpts& opts) {
  const ExperimentConfig cfg = resolve_config(opts);
  const Dataset data = load_required(opts);
  const auto rows = run_detection(cfg, data);
  std::string csv = "node_id,structure_ics,attribute_ics,fused_ics,beta\n";
  for (const auto& r : rows)
    csv += std::to_string(r.node_id) + "," + format_double(r.structure) + "," +
           format_double(r.attribute) + "," + format_double(r.fused) + "," +
           format_double(r.beta) + "\n";
  fs::create_directories(opts.out_dir);
  atomic_write((fs::path(opts.out_dir) / "detect.csv").string(), csv);
  std::printf("wrote %zu detection rows to %s/detect.csv\n", rows.size(), opts.out_dir.c_str());
}

void cmd_inject_noise(const CommonOpts& opts) {
  const ExperimentConfig cfg = resolve_config(opts);
  const Dataset data = load_required(opts);
  const std::uint64_t seed = cfg.noise.seed != 0 ? cfg.noise.seed : cfg.seeds.front();
  Rng rng = Rng(seed).stream("noise");
  const NoisyLabels noisy = inject_noise(cfg.noise, data.labels, data.graph.n_classes, rng);
  std::string labels_txt, mask_txt;
  for (std::size_t i = 0; i < noisy.labels.size(); ++i) {
    labels_txt += std::to_string(noisy.labels[i]) + "\n";
    mask_txt += (noisy.flipped[i] ? "1" : "0") + std::string("\n");
  }
  fs::create_directories(opts.out_dir);
  atomic_write((fs::path(opts.out_dir) / "noisy_labels.txt").string(), labels_txt);
  atomic_write((fs::path(opts.out_dir) / "flip_mask.txt").string(), mask_txt);
  std::size_t flips = 0;
  for (bool b : noisy.flipped) flips += b ? 1 : 0;
  std::printf("flipped %zu of %zu labels (%s noise, rate %s)\n", flips, noisy.labels.size(),
              cfg.noise.kind.c_str(), format_double(cfg.noise.rate).c_str());
}

const std::vector<std::string> kAblateVariants = {
    "full", "no_s_ics", "no_a_ics", "no_nc", "no_pl", "adjacency_instead_of_T"};

void cmd_ablate(const CommonOpts& opts) {
  const ExperimentConfig base = resolve_config(opts);
  const Dataset data = load_required(opts);

  ExperimentConfig diff_cfg = base;
  diff_cfg.ablation = "full";
  const PipelineContext ctx_diffusion = build_context(data.graph, diff_cfg);
  ExperimentConfig adj_cfg = base;
  adj_cfg.ablation = "adjacency_instead_of_T";
  const PipelineContext ctx_adjacency = build_context(data.graph, adj_cfg);

  std::vector<ExperimentReport> reports(kAblateVariants.size());
  run_indexed(base.workers, static_cast<int>(kAblateVariants.size()), [&](int i) {
    ExperimentConfig cfg = base;
    cfg.ablation = kAblateVariants[static_cast<std::size_t>(i)];
    const PipelineContext* ctx =
        cfg.ablation == "adjacency_instead_of_T" ? &ctx_adjacency : &ctx_diffusion;
    reports[static_cast<std::size_t>(i)] = run_experiment(cfg, data, ctx);
  });

  std::string csv = "variant,n_seeds,mean_accuracy,std_accuracy\n";
  fs::create_directories(opts.out_dir);
  for (std::size_t i = 0; i < kAblateVariants.size(); ++i) {
    const auto& r = reports[i];
    csv += kAblateVariants[i] + "," + std::to_string(r.seeds.size()) + "," +
           format_double(r.mean_accuracy) + "," + format_double(r.std_accuracy) + "\n";
    atomic_write((fs::path(opts.out_dir) / ("report_" + kAblateVariants[i] + ".json")).string(),
                 r.to_json());
    std::printf("%-24s %s +- %s\n", kAblateVariants[i].c_str(),
                format_double(r.mean_accuracy).c_str(), format_double(r.std_accuracy).c_str());
  }
  atomic_write((fs::path(opts.out_dir) / "ablate.csv").string(), csv);
}

void cmd_sweep(const CommonOpts& opts, const std::string& noise_rates_s,
               const std::string& label_rates_s, const std::string& variants_s) {
  const ExperimentConfig base = resolve_config(opts);
  const Dataset data = load_required(opts);
  const std::vector<double> noise_rates = parse_double_list(noise_rates_s);
  const std::vector<double> label_rates =
      label_rates_s.empty() ? std::vector<double>{base.label_rate} : parse_double_list(label_rates_s);
  const std::vector<std::string> variants = split_list(variants_s);

  struct Cell {
    ExperimentConfig cfg;
    ExperimentReport report;
  };
  std::vector<Cell> cells;
  for (double nr : noise_rates)
    for (double lr : label_rates)
      for (const std::string& v : variants) {
        Cell cell;
        cell.cfg = base;
        cell.cfg.noise.rate = nr;
        cell.cfg.label_rate = lr;
        cell.cfg.ablation = v;
        cell.cfg.validate();
        cells.push_back(std::move(cell));
      }

  ExperimentConfig diff_cfg = base;
  diff_cfg.ablation = "full";
  const PipelineContext ctx_diffusion = build_context(data.graph, diff_cfg);
  const bool any_adjacency =
      std::find(variants.begin(), variants.end(), "adjacency_instead_of_T") != variants.end();
  PipelineContext ctx_adjacency;
  if (any_adjacency) {
    ExperimentConfig adj_cfg = base;
    adj_cfg.ablation = "adjacency_instead_of_T";
    ctx_adjacency = build_context(data.graph, adj_cfg);
  }

  run_indexed(base.workers, static_cast<int>(cells.size()), [&](int i) {
    Cell& cell = cells[static_cast<std::size_t>(i)];
    const PipelineContext* ctx =
        cell.cfg.ablation == "adjacency_instead_of_T" ? &ctx_adjacency : &ctx_diffusion;
    cell.report = run_experiment(cell.cfg, data, ctx);
  });

  std::string csv;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string block = cells[i].report.summary_csv();
    if (i == 0) {
      csv = block;
    } else {
      csv += block.substr(block.find('\n') + 1);  // drop repeated header
    }
  }
  fs::create_directories(opts.out_dir);
  atomic_write((fs::path(opts.out_dir) / "sweep.csv").string(), csv);
  std::printf("wrote %zu runs to %s/sweep.csv\n", cells.size(), opts.out_dir.c_str());
}

void cmd_gen_sbm(const std::string& out_dir, const std::string& blocks_s, double p_in,
                 double p_out, int feature_dim, double mean_shift, std::uint64_t seed) {
  std::vector<int> blocks;
  for (double b : parse_double_list(blocks_s)) blocks.push_back(static_cast<int>(b));
  Rng rng = Rng(seed).stream("sbm");
  const Dataset ds = generate_sbm(blocks, p_in, p_out, feature_dim, mean_shift, rng);
  write_dataset(out_dir, ds.graph, ds.labels);
  std::printf("wrote %d nodes / %zu edges / %d classes to %s\n", ds.graph.n_nodes,
              ds.graph.edges.size(), ds.graph.n_classes, out_dir.c_str());
}

void cmd_validate(const CommonOpts& opts) {
  if (opts.data_dir.empty()) throw ConfigError("--data is required");
  const Dataset ds = load_dataset(opts.data_dir);
  std::printf("ok: %d nodes, %zu edges, %d features, %d classes\n", ds.graph.n_nodes,
              ds.graph.edges.size(), ds.graph.feature_dim(), ds.graph.n_classes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisy-label-robust graph classifier: detection, correction, training"};
  app.require_subcommand(1);

  CommonOpts train_o, detect_o, inject_o, ablate_o, sweep_o, validate_o;
  std::string sweep_noise_rates = "0.1,0.2,0.3,0.4";
  std::string sweep_label_rates;
  std::string sweep_variants = "full,gcn_only";

  auto* train = app.add_subcommand("train", "run the training pipeline and write reports");
  train->add_option("--data", train_o.data_dir, "dataset directory")->required();
  train->add_option("--out", train_o.out_dir, "output directory");
  add_config_flags(train, train_o);
  train->callback([&train_o] { cmd_train(train_o); });

  auto* detect = app.add_subcommand("detect", "score labeled nodes and emit clean-confidence CSV");
  detect->add_option("--data", detect_o.data_dir, "dataset directory")->required();
  detect->add_option("--out", detect_o.out_dir, "output directory");
  add_config_flags(detect, detect_o);
  detect->callback([&detect_o] { cmd_detect(detect_o); });

  auto* inject = app.add_subcommand("inject-noise", "corrupt a label file and write the flip mask");
  inject->add_option("--data", inject_o.data_dir, "dataset directory")->required();
  inject->add_option("--out", inject_o.out_dir, "output directory");
  add_config_flags(inject, inject_o);
  inject->callback([&inject_o] { cmd_inject_noise(inject_o); });

  auto* ablate = app.add_subcommand("ablate", "run all pipeline variants and tabulate accuracy");
  ablate->add_option("--data", ablate_o.data_dir, "dataset directory")->required();
  ablate->add_option("--out", ablate_o.out_dir, "output directory");
  add_config_flags(ablate, ablate_o);
  ablate->callback([&ablate_o] { cmd_ablate(ablate_o); });

  auto* sweep = app.add_subcommand("sweep", "grid over noise/label rates, one CSV row per run");
  sweep->add_option("--data", sweep_o.data_dir, "dataset directory")->required();
  sweep->add_option("--out", sweep_o.out_dir, "output directory");
  sweep->add_option("--noise-rates", sweep_noise_rates, "comma list of noise rates");
  sweep->add_option("--label-rates", sweep_label_rates, "comma list of label rates");
  sweep->add_option("--variants", sweep_variants, "comma list of pipeline variants");
  add_config_flags(sweep, sweep_o);
  sweep->callback([&] { cmd_sweep(sweep_o, sweep_noise_rates, sweep_label_rates, sweep_variants); });

  std::string sbm_out = "out/sbm";
  std::string sbm_blocks = "50,50";
  double sbm_p_in = 0.2, sbm_p_out = 0.02, sbm_mean_shift = 2.0;
  int sbm_feature_dim = 8;
  std::uint64_t sbm_seed = 1;
  auto* gen = app.add_subcommand("gen-sbm", "write a synthetic block-model dataset directory");
  gen->add_option("--out", sbm_out, "output dataset directory");
  gen->add_option("--blocks", sbm_blocks, "comma list of block sizes (one block per class)");
  gen->add_option("--p-in", sbm_p_in, "intra-block edge probability");
  gen->add_option("--p-out", sbm_p_out, "inter-block edge probability");
  gen->add_option("--feature-dim", sbm_feature_dim, "feature dimension (>= block count)");
  gen->add_option("--mean-shift", sbm_mean_shift, "distance between class feature means");
  gen->add_option("--seed", sbm_seed, "generator seed");
  gen->callback([&] {
    cmd_gen_sbm(sbm_out, sbm_blocks, sbm_p_in, sbm_p_out, sbm_feature_dim, sbm_mean_shift, sbm_seed);
  });

  auto* validate = app.add_subcommand("validate-data", "check a dataset directory against the format");
  validate->add_option("--data", validate_o.data_dir, "dataset directory")->required();
  validate->callback([&validate_o] { cmd_validate(validate_o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
