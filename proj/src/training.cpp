#include "dirlink/training.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dirlink/error.hpp"
#include "dirlink/optim.hpp"
#include "dirlink/rng.hpp"

namespace dirlink {

const char* to_string(LossKind k) { return k == LossKind::bce ? "bce" : "ce"; }

LossKind parse_loss(const std::string& s) {
  if (s == "bce") return LossKind::bce;
  if (s == "ce") return LossKind::ce;
  throw std::invalid_argument("unknown loss '" + s + "' (expected bce or ce)");
}

const char* to_string(NegativeStrategy s) {
  return s == NegativeStrategy::per_run ? "per_run" : "per_epoch";
}

NegativeStrategy parse_negatives(const std::string& s) {
  if (s == "per_run") return NegativeStrategy::per_run;
  if (s == "per_epoch") return NegativeStrategy::per_epoch;
  throw std::invalid_argument("unknown negative strategy '" + s + "' (expected per_run or per_epoch)");
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string config_label(const TrainConfig& c) {
  const ModelSpec& m = c.model;
  std::string s = std::string(to_string(m.encoder)) + "-" + to_string(m.decoder) + "-" + to_string(c.loss);
  switch (m.encoder) {
    case EncoderKind::sdgae:
      s += "-k" + std::to_string(m.k) + "-mlp" + std::to_string(m.mlp_layers);
      break;
    case EncoderKind::digae:
      s += "-l" + std::to_string(m.digae_layers) + "-a" + fmt(m.alpha) + "-b" + fmt(m.beta);
      break;
    case EncoderKind::mlp:
      s += "-mlp" + std::to_string(m.mlp_layers);
      break;
  }
  s += "-h" + std::to_string(m.hidden) + "-e" + std::to_string(m.embedding);
  if (m.decoder != DecoderKind::inner && m.decoder != DecoderKind::lr_concat)
    s += "-dh" + std::to_string(m.decoder_hidden);
  s += "-lr" + fmt(c.lr) + "-wd" + fmt(c.wd) + "-" + to_string(c.negatives) + "-ep" +
       std::to_string(c.max_epochs) + "-p" + std::to_string(c.patience);
  return s;
}

std::uint64_t config_hash(const TrainConfig& c) {
  // FNV-1a over the label; the input dimension is part of the model identity.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::string key = config_label(c) + "-in" + std::to_string(c.model.in_dim);
  for (unsigned char ch : key) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ValidationFn validation_auc(const SplitBundle& bundle) {
  return [&bundle](const Model& model, const Matrix& s, const Matrix& t) {
    const auto pos = model.score_pairs(s, t, bundle.held_out(Holdout::val_pos));
    const auto neg = model.score_pairs(s, t, bundle.held_out(Holdout::val_neg));
    return auc(pos, neg);
  };
}

RunResult train(const TrainConfig& cfg, const DirectedGraph& train_graph,
                const FeatureMatrix& features, const ValidationFn& validate) {
  if (cfg.patience >= cfg.max_epochs)
    throw std::invalid_argument("patience must be smaller than max_epochs");
  if (features.rows() != train_graph.num_nodes())
    throw DataError("feature matrix has " + std::to_string(features.rows()) + " rows for " +
                    std::to_string(train_graph.num_nodes()) + " nodes");
  if (train_graph.num_edges() == 0) throw DataError("training graph has no edges");
  if (!validate) throw std::invalid_argument("train: validation callback is required");

  const auto start = std::chrono::steady_clock::now();
  TrainConfig c = cfg;
  c.model.in_dim = features.cols();
  c.model.logits = cfg.loss == LossKind::ce ? 2 : 1;

  RunResult result;
  result.model = Model(c.model, derive_seed({cfg.seed, 0x77u}));
  const GraphContext ctx = make_context(c.model, train_graph);
  AdamState adam;
  adam.options.lr = c.lr;
  adam.options.weight_decay = c.wd;

  const auto pos = train_graph.edges();
  const std::size_t m = pos.size();
  std::vector<Edge> pairs(pos.begin(), pos.end());
  std::vector<int> labels(2 * m, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(m), 1);
  auto load_negatives = [&](std::size_t epoch) {
    auto neg = sample_train_negatives(train_graph, m, cfg.seed, cfg.negatives, epoch);
    pairs.resize(m);
    pairs.insert(pairs.end(), neg.begin(), neg.end());
  };
  load_negatives(0);

  std::vector<Matrix> best = result.model.parameters();
  double best_val = -1.0;
  std::size_t best_epoch = 0;
  std::vector<Matrix> grads;

  for (std::size_t epoch = 0; epoch < c.max_epochs; ++epoch) {
    if (cfg.negatives == NegativeStrategy::per_epoch && epoch > 0) load_negatives(epoch);

    Tape tape;
    const Model::Bound bound = result.model.bind(tape);
    const EncoderOutput enc = result.model.encode(bound, ctx, tape.constant_view(features));
    const Tensor logits = decode(bound.decoder, enc, pairs);
    const Tensor loss = c.loss == LossKind::bce ? bce_with_logits(logits, labels)
                                                : ce_pairwise(logits, labels);
    const double loss_value = loss.value()(0, 0);
    if (!std::isfinite(loss_value))
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " (" + config_label(c) + ")");

    const double val = validate(result.model, enc.s.value(), enc.t.value());
    result.history.push_back({epoch, loss_value, val});
    if (val > best_val) {
      best_val = val;
      best_epoch = epoch;
      best = result.model.parameters();
    } else if (epoch - best_epoch >= c.patience) {
      break;
    }

    tape.backward(loss);
    grads.clear();
    for (const Tensor& p : bound.all) grads.push_back(p.grad());
    adam_step(adam, result.model.parameters(), grads);
  }

  result.model.parameters() = std::move(best);
  result.best_epoch = best_epoch;
  result.best_val = best_val;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

MetricsReport evaluate(const Model& model, const GraphContext& ctx, const FeatureMatrix& features,
                       const SplitBundle& bundle) {
  const auto [s, t] = model.embed(ctx, features);
  const auto pos = model.score_pairs(s, t, bundle.held_out(Holdout::test_pos));
  const auto neg = model.score_pairs(s, t, bundle.held_out(Holdout::test_neg));
  return compute_metrics(pos, neg);
}

RunResult run_split(const TrainConfig& cfg, const SplitBundle& bundle, const FeatureMatrix& features) {
  RunResult r = train(cfg, bundle.train_graph(), features, validation_auc(bundle));
  const GraphContext ctx = make_context(r.model.spec(), bundle.train_graph());
  r.test = evaluate(r.model, ctx, features, bundle);
  return r;
}

// ---------------------------------------------------------------------- grid

GridResult grid_run(const std::vector<TrainConfig>& configs, const std::vector<SplitBundle>& bundles,
                    const std::vector<FeatureMatrix>& features, std::size_t workers) {
  if (configs.empty() || bundles.empty()) throw std::invalid_argument("grid_run: need configs and bundles");
  if (features.size() != bundles.size())
    throw std::invalid_argument("grid_run: one feature matrix per bundle is required");
  GridResult grid;
  grid.configs = configs;
  grid.runs.resize(configs.size() * bundles.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < grid.runs.size();) {
      RunRecord& rec = grid.runs[job];
      rec.config = job / bundles.size();
      rec.bundle = job % bundles.size();
      const SplitBundle& b = bundles[rec.bundle];
      TrainConfig cfg = configs[rec.config];
      rec.split_seed = b.seed();
      rec.run_seed = derive_seed({config_hash(cfg), b.seed()});
      cfg.seed = rec.run_seed;
      try {
        const RunResult r = run_split(cfg, b, features[rec.bundle]);
        rec.test = r.test;
        rec.best_val = r.best_val;
        rec.epochs = r.history.size();
        rec.seconds = r.seconds;
      } catch (const std::exception& e) {
        rec.status = RunStatus::failed;
        rec.error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, grid.runs.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t c = 0; c < configs.size(); ++c) {
    ConfigSummary s;
    s.config = c;
    std::vector<std::vector<double>> columns(std::size(kMetricNames));
    std::vector<double> vals;
    for (std::size_t b = 0; b < bundles.size(); ++b) {
      const RunRecord& r = grid.runs[c * bundles.size() + b];
      ++s.runs;
      if (r.status == RunStatus::failed) {
        ++s.failed;
        continue;
      }
      const auto v = as_vector(r.test);
      for (std::size_t i = 0; i < v.size(); ++i) columns[i].push_back(v[i]);
      vals.push_back(r.best_val);
    }
    for (const auto& col : columns) s.metrics.push_back(summarize(col));
    s.val = summarize(vals);
    grid.summaries.push_back(std::move(s));
  }

  // Selection per encoder family on mean validation score; ties keep the earlier config.
  for (EncoderKind family : {EncoderKind::sdgae, EncoderKind::digae, EncoderKind::mlp}) {
    ConfigSummary* best = nullptr;
    for (auto& s : grid.summaries) {
      if (configs[s.config].model.encoder != family || s.failed == s.runs) continue;
      if (!best || s.val.mean > best->val.mean) best = &s;
    }
    if (best) best->selected = true;
  }
  return grid;
}

namespace {

std::ofstream open_tsv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_runs_tsv(const std::filesystem::path& path, const GridResult& grid, const std::string& dataset) {
  auto out = open_tsv(path);
  out << "config_id\tdataset\tseed";
  for (const char* name : kMetricNames) out << '\t' << name;
  out << "\tepochs\tseconds\tstatus\n";
  for (const auto& r : grid.runs) {
    out << config_label(grid.configs[r.config]) << '\t' << dataset << '\t' << r.split_seed;
    if (r.status == RunStatus::ok) {
      for (double v : as_vector(r.test)) out << '\t' << fmt_fixed(v, 4);
      out << '\t' << r.epochs << '\t' << fmt_fixed(r.seconds, 3) << "\tok\n";
    } else {
      for (std::size_t i = 0; i < std::size(kMetricNames); ++i) out << "\tnan";
      out << "\t0\t" << fmt_fixed(r.seconds, 3) << "\tfailed: ";
      for (char ch : r.error) out << (ch == '\t' || ch == '\n' ? ' ' : ch);
      out << '\n';
    }
  }
}

void write_summary_tsv(const std::filesystem::path& path, const GridResult& grid,
                       const std::string& dataset) {
  auto out = open_tsv(path);
  out << "config_id\tdataset\truns\tfailed";
  for (const char* name : kMetricNames) out << '\t' << name << "_mean\t" << name << "_std";
  out << "\tval_auc_mean\tselected\n";
  for (const auto& s : grid.summaries) {
    out << config_label(grid.configs[s.config]) << '\t' << dataset << '\t' << s.runs << '\t' << s.failed;
    for (const auto& m : s.metrics) out << '\t' << fmt_fixed(m.mean, 4) << '\t' << fmt_fixed(m.std, 4);
    out << '\t' << fmt_fixed(s.val.mean, 4) << '\t' << (s.selected ? "yes" : "no") << '\n';
  }
}

}  // namespace dirlink
