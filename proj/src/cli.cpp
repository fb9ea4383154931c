#include "dirlink/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "dirlink/analysis.hpp"
#include "dirlink/config.hpp"
#include "dirlink/error.hpp"
#include "dirlink/io.hpp"
#include "dirlink/rng.hpp"
#include "dirlink/splits.hpp"
#include "dirlink/training.hpp"

namespace dirlink {

namespace {

namespace fs = std::filesystem;

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Dataset {
  DirectedGraph graph;
  std::optional<FeatureMatrix> features;
};

Dataset load_dataset(const std::string& edges, const std::string& feature_file) {
  if (edges.empty()) throw DataError("no dataset given (use --dataset)");
  std::optional<FeatureMatrix> feats;
  if (!feature_file.empty()) feats = load_features(feature_file);
  Preprocessed p = preprocess(load_edge_list(edges), feats);
  return {std::move(p.graph), std::move(p.features)};
}

FeatureMatrix features_for(const ExperimentConfig& cfg, const SplitBundle& b,
                           const std::optional<FeatureMatrix>& original) {
  FeatureInit init;
  init.mode = cfg.features;
  init.dim = cfg.random_dim;
  init.seed = b.seed();
  return init_features(init, b.train_graph(), original);
}

void print_metrics(std::ostream& out, const MetricsReport& r) {
  const auto v = as_vector(r);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << kMetricNames[i] << '=' << fixed(v[i]);
  out << '\n';
}

/// Flags shared by the experiment subcommands; unset flags leave the config alone.
struct ExperimentFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds, out, dataset, feature_file, features, model, decoder, loss, k, lr, wd, negatives;
  std::optional<std::size_t> workers, max_epochs, patience;

  void attach(CLI::App* app, bool grid) {
    app->add_option("--config", config, "Experiment config file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Single split seed");
    app->add_option("--seeds", seeds, "Comma-separated split seeds");
    app->add_option("--out", out, "Output directory");
    app->add_option("--dataset", dataset, "Edge list");
    app->add_option("--feature-file", feature_file, "Node feature file (for --features original)");
    app->add_option("--features", features, "original | degrees | random");
    app->add_option("--model", model, grid ? "Encoder list" : "sdgae | digae | mlp");
    app->add_option("--decoder", decoder, "inner | mlp_hadamard | mlp_concat | lr_concat");
    app->add_option("--loss", loss, "bce | ce");
    app->add_option("--k", k, "SDGAE propagation steps");
    app->add_option("--lr", lr, "Learning rate");
    app->add_option("--wd", wd, "Weight decay");
    app->add_option("--negatives", negatives, "per_run | per_epoch");
    app->add_option("--max-epochs", max_epochs, "Epoch limit");
    app->add_option("--patience", patience, "Early-stopping patience");
    app->add_option("--workers", workers, "Parallel runs");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_config(config);
    auto set = [&](const char* key, const std::string& v) {
      if (!v.empty()) set_value(cfg, key, v);
    };
    set("dataset", dataset);
    set("feature_file", feature_file);
    set("features", features);
    set("model", model);
    set("decoder", decoder);
    set("loss", loss);
    set("k", k);
    set("lr", lr);
    set("wd", wd);
    set("negatives", negatives);
    set("seeds", seeds);
    set("out", out);
    if (seed) cfg.seeds = {*seed};
    if (workers) cfg.workers = *workers;
    if (max_epochs) cfg.max_epochs = *max_epochs;
    if (patience) cfg.patience = *patience;
    return cfg;
  }
};

void write_history(const fs::path& path, const RunResult& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch\tloss\tval_auc\n";
  for (const auto& h : r.history) out << h.epoch << '\t' << fixed(h.loss, 6) << '\t' << fixed(h.val_score) << '\n';
}

int cmd_preprocess(const std::string& edges, const std::string& feature_file, const std::string& out_dir,
                   std::ostream& out) {
  DirectedGraph::BuildStats stats;
  std::optional<FeatureMatrix> feats;
  if (!feature_file.empty()) feats = load_features(feature_file);
  const DirectedGraph raw = load_edge_list(edges, std::nullopt, &stats);
  const Preprocessed p = preprocess(raw, feats);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_edge_list(dir / "edges.txt", p.graph.edges());
  if (p.features) write_features(dir / "features.txt", *p.features);
  {
    std::ofstream ids(dir / "node_ids.txt");
    ids << "# new_id original_id\n";
    for (std::size_t i = 0; i < p.original_id.size(); ++i) ids << i << ' ' << p.original_id[i] << '\n';
  }
  const GraphStats s = graph_stats(p.graph);
  std::ofstream sf(dir / "stats.txt");
  sf << "nodes " << s.nodes << "\nedges " << s.edges << "\navg_degree " << fixed(s.avg_degree)
     << "\npercent_directed " << fixed(s.percent_directed) << '\n';
  out << "nodes=" << s.nodes << " edges=" << s.edges << " avg_degree=" << fixed(s.avg_degree, 2)
      << " percent_directed=" << fixed(s.percent_directed, 2) << " duplicates_dropped=" << stats.duplicates
      << " self_loops_dropped=" << stats.self_loops << '\n';
  return kExitOk;
}

int cmd_split(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(cfg.dataset, cfg.feature_file);
  int code = kExitOk;
  for (std::uint64_t seed : cfg.seeds) {
    const SplitBundle b = split_edges(d.graph, seed);
    const auto problems = audit_split(d.graph, b);
    const fs::path dir = fs::path(cfg.out) / ("seed_" + std::to_string(seed));
    save_split(dir, b);
    out << dir.string() << ": train=" << b.train_graph().num_edges()
        << " val=" << b.held_out_size(Holdout::val_pos) << " test=" << b.held_out_size(Holdout::test_pos)
        << (problems.empty() ? " audit=ok" : " audit=FAILED") << '\n';
    for (const auto& p : problems) err << "  " << p << '\n';
    if (!problems.empty()) code = kExitRun;
  }
  return code;
}

TrainConfig single_config(const ExperimentConfig& cfg) {
  const auto grid = expand_grid(cfg);
  if (grid.size() != 1)
    throw std::invalid_argument("train expects exactly one configuration; the settings expand to " +
                                std::to_string(grid.size()) + " (use grid)");
  return grid.front();
}

int cmd_train(const ExperimentConfig& cfg, const std::string& split_dir, std::ostream& out) {
  TrainConfig tc = single_config(cfg);
  if (cfg.seeds.size() != 1 && split_dir.empty())
    throw std::invalid_argument("train runs one split; pass --seed N or --split DIR");
  std::optional<FeatureMatrix> original;
  SplitBundle bundle;
  if (!split_dir.empty()) {
    bundle = load_split(split_dir);
    if (!cfg.feature_file.empty()) original = load_features(cfg.feature_file);
  } else {
    Dataset d = load_dataset(cfg.dataset, cfg.feature_file);
    bundle = split_edges(d.graph, cfg.seeds.front());
    original = std::move(d.features);
  }
  const FeatureMatrix x = features_for(cfg, bundle, original);
  tc.model.in_dim = x.cols();
  tc.seed = derive_seed({config_hash(tc), bundle.seed()});
  const RunResult r = run_split(tc, bundle, x);

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  r.model.save(dir / "model.ckpt");
  write_history(dir / "history.tsv", r);
  GridResult g;
  g.configs = {tc};
  RunRecord rec;
  rec.split_seed = bundle.seed();
  rec.run_seed = tc.seed;
  rec.test = r.test;
  rec.best_val = r.best_val;
  rec.epochs = r.history.size();
  rec.seconds = r.seconds;
  g.runs = {rec};
  write_runs_tsv(dir / "runs.tsv", g, cfg.dataset.empty() ? split_dir : cfg.dataset);
  out << config_label(tc) << " seed=" << bundle.seed() << " epochs=" << r.history.size()
      << " best_epoch=" << r.best_epoch << " val_auc=" << fixed(r.best_val) << '\n';
  print_metrics(out, r.test);
  return kExitOk;
}

int cmd_grid(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(cfg.dataset, cfg.feature_file);
  std::vector<SplitBundle> bundles;
  std::vector<FeatureMatrix> feats;
  for (std::uint64_t seed : cfg.seeds) {
    bundles.push_back(split_edges(d.graph, seed));
    feats.push_back(features_for(cfg, bundles.back(), d.features));
  }
  std::vector<TrainConfig> configs = expand_grid(cfg);
  for (auto& c : configs) c.model.in_dim = feats.front().cols();
  const GridResult g = grid_run(configs, bundles, feats, cfg.workers);
  const fs::path dir(cfg.out);
  write_runs_tsv(dir / "runs.tsv", g, cfg.dataset);
  write_summary_tsv(dir / "summary.tsv", g, cfg.dataset);
  {
    std::ofstream cf(dir / "config.txt");
    cf << serialize(cfg);
  }
  std::size_t failed = 0;
  for (const auto& r : g.runs) {
    if (r.status == RunStatus::failed) {
      ++failed;
      err << "run failed: " << config_label(g.configs[r.config]) << " seed=" << r.split_seed << ": " << r.error
          << '\n';
    }
  }
  for (const auto& s : g.summaries) {
    out << (s.selected ? "* " : "  ") << config_label(g.configs[s.config]) << " auc="
        << fixed(s.metrics[4].mean, 2) << "+-" << fixed(s.metrics[4].std, 2) << " hits100="
        << fixed(s.metrics[2].mean, 2) << "+-" << fixed(s.metrics[2].std, 2) << " runs=" << s.runs - s.failed
        << '/' << s.runs << '\n';
  }
  out << "wrote " << (dir / "runs.tsv").string() << " and " << (dir / "summary.tsv").string() << '\n';
  return failed ? kExitRun : kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& split_dir,
             std::ostream& out) {
  if (checkpoint.empty() || split_dir.empty()) throw std::invalid_argument("eval needs --checkpoint and --split");
  const Model model = Model::load(checkpoint);
  const SplitBundle bundle = load_split(split_dir);
  std::optional<FeatureMatrix> original;
  if (!cfg.feature_file.empty()) original = load_features(cfg.feature_file);
  const FeatureMatrix x = features_for(cfg, bundle, original);
  const GraphContext ctx = make_context(model.spec(), bundle.train_graph());
  print_metrics(out, evaluate(model, ctx, x, bundle));
  return kExitOk;
}

int cmd_reconstruct(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& split_dir,
                    std::optional<std::size_t> m_prime, std::ostream& out) {
  if (checkpoint.empty() || split_dir.empty())
    throw std::invalid_argument("reconstruct needs --checkpoint and --split");
  const Model model = Model::load(checkpoint);
  const SplitBundle bundle = load_split(split_dir);
  std::optional<FeatureMatrix> original;
  if (!cfg.feature_file.empty()) original = load_features(cfg.feature_file);
  const FeatureMatrix x = features_for(cfg, bundle, original);
  const DirectedGraph& g = bundle.train_graph();
  const GraphContext ctx = make_context(model.spec(), g);
  const std::size_t m = m_prime.value_or(g.num_edges());
  const auto edges = reconstruct_topm(model, ctx, x, m);

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  write_edge_list(dir / "reconstructed.txt", edges);
  write_histograms(dir / "reconstructed", degree_histograms(edges, g.num_nodes()));
  write_histograms(dir / "train", degree_histograms(g.edges(), g.num_nodes()));
  std::size_t recovered = 0;
  for (const auto& e : edges) recovered += g.has_edge(e.src, e.dst);
  out << "reconstructed " << edges.size() << " edges; " << recovered << " are training edges ("
      << fixed(edges.empty() ? 0.0 : 100.0 * static_cast<double>(recovered) / static_cast<double>(edges.size()), 2)
      << "%)\n";
  return kExitOk;
}

int cmd_check(const std::string& dataset, const std::string& mode, const std::string& decoder, std::size_t dim,
              std::size_t attempts, std::uint64_t seed, std::ostream& out) {
  const DirectedGraph g = load_edge_list(dataset);
  ExpressivenessOptions opt;
  opt.seed = seed;
  const auto cert = check_expressiveness(g, parse_mode(mode), parse_decoder(decoder), dim, attempts, opt);
  out << "verdict: " << to_string(cert.verdict) << '\n' << "reason: " << cert.reason << '\n';
  if (!cert.cycle.empty()) {
    out << "cycle:";
    for (auto u : cert.cycle) out << ' ' << u;
    out << "\nsummed coefficients:";
    for (auto c : cert.summed_coefficients) out << ' ' << c;
    out << " > " << cert.summed_rhs << '\n';
  }
  if (cert.witness) {
    const Witness& w = *cert.witness;
    out << "margin: " << fixed(cert.margin) << '\n';
    auto dump = [&](const char* name, const Matrix& m) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        out << name << '[' << r << "] =";
        for (double v : m.row(r)) out << ' ' << fixed(v);
        out << '\n';
      }
    };
    dump(w.mode == EmbeddingMode::single ? "h" : "s", w.s);
    if (w.mode == EmbeddingMode::dual) dump("t", w.t);
    for (std::size_t i = 0; i < w.head.size(); ++i) {
      dump(("W" + std::to_string(i)).c_str(), w.head[i].first);
      dump(("b" + std::to_string(i)).c_str(), w.head[i].second);
    }
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Directed link prediction benchmark tools", "dirlink"};
  app.require_subcommand(1);

  auto* pre = app.add_subcommand("preprocess", "Clean an edge list and keep its largest weakly connected component");
  std::string pre_edges, pre_feats, pre_out;
  pre->add_option("--dataset", pre_edges, "Raw edge list")->required();
  pre->add_option("--feature-file", pre_feats, "Raw node features");
  pre->add_option("--out", pre_out, "Output directory")->required();

  ExperimentFlags split_flags, train_flags, grid_flags, eval_flags, rec_flags;
  auto* split = app.add_subcommand("split", "Write train/validation/test splits, one directory per seed");
  split_flags.attach(split, false);

  auto* train = app.add_subcommand("train", "Train and evaluate one model on one split");
  train_flags.attach(train, false);
  std::string train_split;
  train->add_option("--split", train_split, "Saved split directory (instead of --dataset/--seed)");

  auto* grid = app.add_subcommand("grid", "Train every configuration on every split seed");
  grid_flags.attach(grid, true);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a saved split");
  eval_flags.attach(eval, false);
  std::string eval_ckpt, eval_split;
  eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  eval->add_option("--split", eval_split, "Saved split directory")->required();

  auto* rec = app.add_subcommand("reconstruct", "Top-m reconstruction and degree histograms");
  rec_flags.attach(rec, false);
  std::string rec_ckpt, rec_split;
  std::optional<std::size_t> rec_m;
  rec->add_option("--checkpoint", rec_ckpt, "Model checkpoint")->required();
  rec->add_option("--split", rec_split, "Saved split directory")->required();
  rec->add_option("--m", rec_m, "Edges to keep (default: training edge count)");

  auto* chk = app.add_subcommand("check-expressiveness", "Feasibility certificate for orienting every edge");
  std::string chk_graph, chk_mode = "single", chk_decoder = "lr_concat";
  std::size_t chk_dim = 2, chk_attempts = 50;
  std::uint64_t chk_seed = 0;
  chk->add_option("--dataset", chk_graph, "Edge list (at most 10 nodes)")->required();
  chk->add_option("--mode", chk_mode, "single | dual");
  chk->add_option("--decoder", chk_decoder, "inner | mlp_hadamard | mlp_concat | lr_concat");
  chk->add_option("--dim", chk_dim, "Embedding dimension");
  chk->add_option("--attempts", chk_attempts, "Search restarts");
  chk->add_option("--seed", chk_seed, "Search seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*pre) return cmd_preprocess(pre_edges, pre_feats, pre_out, out);
    if (*split) return cmd_split(split_flags.resolve(), out, err);
    if (*train) return cmd_train(train_flags.resolve(), train_split, out);
    if (*grid) return cmd_grid(grid_flags.resolve(), out, err);
    if (*eval) return cmd_eval(eval_flags.resolve(), eval_ckpt, eval_split, out);
    if (*rec) return cmd_reconstruct(rec_flags.resolve(), rec_ckpt, rec_split, rec_m, out);
    if (*chk) return cmd_check(chk_graph, chk_mode, chk_decoder, chk_dim, chk_attempts, chk_seed, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRun;
  }
  return kExitUsage;
}

}  // namespace dirlink
