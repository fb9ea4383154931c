#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dirlink/metrics.hpp"
#include "dirlink/models.hpp"
#include "dirlink/splits.hpp"

namespace dirlink {

enum class LossKind { bce, ce };

const char* to_string(LossKind k);
LossKind parse_loss(const std::string& s);
const char* to_string(NegativeStrategy s);
NegativeStrategy parse_negatives(const std::string& s);

struct TrainConfig {
  ModelSpec model;
  LossKind loss = LossKind::bce;
  double lr = 0.01;
  double wd = 0.0;
  std::size_t max_epochs = 2000;
  std::size_t patience = 200;
  NegativeStrategy negatives = NegativeStrategy::per_run;
  std::uint64_t seed = 0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Short stable identifier of every hyperparameter except the seed.
std::string config_label(const TrainConfig& cfg);
std::uint64_t config_hash(const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double val_score = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Scores the model on held-out validation pairs given full-graph embeddings
/// (source, target). Larger is better.
using ValidationFn = std::function<double(const Model&, const Matrix& s, const Matrix& t)>;

/// Validation AUC on the bundle's val_pos / val_neg lists.
ValidationFn validation_auc(const SplitBundle& bundle);

struct RunResult {
  Model model;  // parameters from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val = 0;
  MetricsReport test;
  double seconds = 0;
};

/// Full-batch training on the training graph only. Each epoch: forward on the
/// training positives plus as many sampled non-edges, loss, backward, Adam.
/// The validation score of epoch e is taken on the epoch-e parameters (before
/// that epoch's update). Stops after `patience` epochs without improvement.
/// Throws TrainingError on a non-finite loss.
RunResult train(const TrainConfig& cfg, const DirectedGraph& train_graph,
                const FeatureMatrix& features, const ValidationFn& validate);

/// Test metrics from test_pos / test_neg.
MetricsReport evaluate(const Model& model, const GraphContext& ctx, const FeatureMatrix& features,
                       const SplitBundle& bundle);

/// Train with validation AUC, then evaluate on the test lists.
RunResult run_split(const TrainConfig& cfg, const SplitBundle& bundle, const FeatureMatrix& features);

// ---------------------------------------------------------------------- grid

enum class RunStatus { ok, failed };

struct RunRecord {
  std::size_t config = 0;
  std::size_t bundle = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t run_seed = 0;
  RunStatus status = RunStatus::ok;
  std::string error;
  MetricsReport test;
  double best_val = 0;
  std::size_t epochs = 0;
  double seconds = 0;
};

struct ConfigSummary {
  std::size_t config = 0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::vector<Summary> metrics;  // kMetricNames order, over successful runs
  Summary val;
  bool selected = false;  // best mean validation within its encoder family
};

struct GridResult {
  std::vector<TrainConfig> configs;
  std::vector<RunRecord> runs;  // config-major, bundle-minor
  std::vector<ConfigSummary> summaries;
};

/// Trains every config on every bundle with per-run seed derive(config, split).
/// `features[i]` belongs to `bundles[i]`. Output does not depend on `workers`.
GridResult grid_run(const std::vector<TrainConfig>& configs, const std::vector<SplitBundle>& bundles,
                    const std::vector<FeatureMatrix>& features, std::size_t workers = 1);

void write_runs_tsv(const std::filesystem::path& path, const GridResult& grid, const std::string& dataset);
void write_summary_tsv(const std::filesystem::path& path, const GridResult& grid,
                       const std::string& dataset);

}  // namespace dirlink
