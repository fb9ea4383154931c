#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dirlink/error.hpp"
#include "dirlink/io.hpp"
#include "dirlink/training.hpp"
#include "oracles.hpp"

using namespace dirlink;

namespace {

TrainConfig small_config(EncoderKind enc = EncoderKind::sdgae) {
  TrainConfig c;
  c.model.encoder = enc;
  c.model.hidden = 8;
  c.model.embedding = 8;
  c.model.decoder_hidden = 8;
  c.model.k = 2;
  c.max_epochs = 60;
  c.patience = 20;
  c.seed = 3;
  return c;
}

struct Fixture {
  DirectedGraph full;
  SplitBundle bundle;
  FeatureMatrix x;
};

Fixture fixture(std::uint64_t seed = 1) {
  Fixture f;
  f.full = DirectedGraph(40, oracle::random_connected_edges(40, 160, 8));
  f.bundle = split_edges(f.full, seed);
  f.x = init_features({FeatureMode::random, 6, seed}, f.bundle.train_graph(), std::nullopt);
  return f;
}

const ValidationFn kConstantValidation = [](const Model&, const Matrix&, const Matrix&) { return 0.5; };

}  // namespace

TEST(Train, LossDecreasesOnRingWithChord) {
  const DirectedGraph g(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}});
  const Matrix x = oracle::random_matrix(4, 3, 1);
  TrainConfig c = small_config();
  c.lr = 0.01;
  c.max_epochs = 20;
  c.patience = 19;
  // Validation improves forever so training runs the full budget.
  std::size_t calls = 0;
  const auto r = train(c, g, x, [&](const Model&, const Matrix&, const Matrix&) { return double(calls++); });
  ASSERT_EQ(r.history.size(), 20u);
  for (std::size_t e = 1; e < r.history.size(); ++e) EXPECT_LT(r.history[e].loss, r.history[e - 1].loss) << e;
}

TEST(Train, PatienceStopsAfterFixedNumberOfEpochs) {
  auto f = fixture();
  TrainConfig c = small_config();
  c.patience = 7;
  const auto r = train(c, f.bundle.train_graph(), f.x, kConstantValidation);
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_EQ(r.history.size(), 8u);  // epochs 0..7
  EXPECT_THROW(train(TrainConfig{.max_epochs = 5, .patience = 5}, f.bundle.train_graph(), f.x, kConstantValidation),
               std::invalid_argument);
}

TEST(Train, BestSnapshotIsTheScoredModel) {
  auto f = fixture();
  const auto r = train(small_config(), f.bundle.train_graph(), f.x, validation_auc(f.bundle));
  const auto ctx = make_context(r.model.spec(), f.bundle.train_graph());
  const auto pos = r.model.score(ctx, f.x, f.bundle.held_out(Holdout::val_pos));
  const auto neg = r.model.score(ctx, f.x, f.bundle.held_out(Holdout::val_neg));
  EXPECT_DOUBLE_EQ(auc(pos, neg), r.best_val);
  EXPECT_DOUBLE_EQ(r.history[r.best_epoch].val_score, r.best_val);
}

TEST(Train, Deterministic) {
  auto f = fixture();
  for (auto loss : {LossKind::bce, LossKind::ce}) {
    TrainConfig c = small_config();
    c.loss = loss;
    const auto a = run_split(c, f.bundle, f.x);
    const auto b = run_split(c, f.bundle, f.x);
    EXPECT_EQ(a.history, b.history);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.test, b.test);
  }
}

TEST(Train, NegativeStrategiesDiffer) {
  auto f = fixture();
  TrainConfig c = small_config();
  const auto a = run_split(c, f.bundle, f.x);
  c.negatives = NegativeStrategy::per_epoch;
  const auto b = run_split(c, f.bundle, f.x);
  EXPECT_NE(a.history, b.history);
}

TEST(Train, NeverTouchesTestEdges) {
  auto f = fixture();
  std::vector<Holdout> accessed;
  f.bundle.set_access_probe([&](Holdout h) { accessed.push_back(h); });
  (void)train(small_config(), f.bundle.train_graph(), f.x, kConstantValidation);
  EXPECT_TRUE(accessed.empty());
  (void)train(small_config(), f.bundle.train_graph(), f.x, validation_auc(f.bundle));
  for (Holdout h : accessed) EXPECT_TRUE(h == Holdout::val_pos || h == Holdout::val_neg) << to_string(h);
  EXPECT_FALSE(accessed.empty());
  f.bundle.set_access_probe({});
}

TEST(Train, NonFiniteFeaturesAbort) {
  auto f = fixture();
  f.x(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train(small_config(), f.bundle.train_graph(), f.x, kConstantValidation), TrainingError);
}

TEST(Train, FeatureRowMismatchIsDataError) {
  auto f = fixture();
  EXPECT_THROW(train(small_config(), f.bundle.train_graph(), Matrix(3, 2), kConstantValidation), DataError);
}

TEST(ConfigLabel, DistinguishesHyperparametersButNotSeed) {
  TrainConfig a = small_config(), b = small_config();
  b.seed = 99;
  EXPECT_EQ(config_label(a), config_label(b));
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.lr = 0.005;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Grid, IdenticalBundlesGiveZeroStd) {
  auto f = fixture();
  const auto g = grid_run({small_config()}, {f.bundle, f.bundle, f.bundle}, {f.x, f.x, f.x});
  ASSERT_EQ(g.summaries.size(), 1u);
  for (const auto& m : g.summaries[0].metrics) EXPECT_EQ(m.std, 0.0);
  EXPECT_TRUE(g.summaries[0].selected);
}

TEST(Grid, DominantConfigIsSelected) {
  // The block-structured fixture has signal to learn, unlike a random graph.
  const auto full = load_edge_list(std::string(DIRLINK_DATA_DIR) + "/synthetic200.txt");
  std::vector<SplitBundle> bundles;
  std::vector<FeatureMatrix> feats;
  for (std::uint64_t seed : {0, 1}) {
    bundles.push_back(split_edges(full, seed));
    feats.push_back(init_features({FeatureMode::random, 16, seed}, bundles.back().train_graph(), std::nullopt));
  }
  TrainConfig good = small_config();
  good.max_epochs = 150;
  good.patience = 50;
  TrainConfig frozen = good;
  frozen.lr = 0.0;  // never leaves its initialization
  const auto g = grid_run({frozen, good}, bundles, feats);
  for (std::size_t b = 0; b < 2; ++b) ASSERT_GT(g.runs[2 + b].best_val, g.runs[b].best_val);
  EXPECT_FALSE(g.summaries[0].selected);
  EXPECT_TRUE(g.summaries[1].selected);
}

TEST(Grid, FailedRunsAreFlaggedAndExcluded) {
  auto f = fixture();
  const auto g = grid_run({small_config()}, {f.bundle, f.bundle}, {f.x, Matrix(2, 2)});
  EXPECT_EQ(g.runs[0].status, RunStatus::ok);
  EXPECT_EQ(g.runs[1].status, RunStatus::failed);
  EXPECT_FALSE(g.runs[1].error.empty());
  EXPECT_EQ(g.summaries[0].failed, 1u);
  EXPECT_EQ(g.summaries[0].metrics[4].mean, g.runs[0].test.auc);

  const auto path = std::filesystem::temp_directory_path() / "dirlink_test_runs.tsv";
  write_runs_tsv(path, g, "toy");
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_NE(ss.str().find("failed"), std::string::npos);
  EXPECT_NE(ss.str().find("config_id\tdataset\tseed"), std::string::npos);
}

TEST(Grid, WorkerCountDoesNotChangeResults) {
  auto f = fixture();
  const auto b2 = split_edges(f.full, 5);
  const auto x2 = init_features({FeatureMode::random, 6, 5}, b2.train_graph(), std::nullopt);
  const std::vector<TrainConfig> configs{small_config(), small_config(EncoderKind::mlp)};
  const auto a = grid_run(configs, {f.bundle, b2}, {f.x, x2}, 1);
  const auto b = grid_run(configs, {f.bundle, b2}, {f.x, x2}, 3);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].test, b.runs[i].test);
    EXPECT_EQ(a.runs[i].run_seed, b.runs[i].run_seed);
    EXPECT_EQ(a.runs[i].epochs, b.runs[i].epochs);
  }
}
