#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dirlink/cli.hpp"
#include "dirlink/config.hpp"
#include "dirlink/error.hpp"

using namespace dirlink;
namespace fs = std::filesystem;

namespace {

const std::string kData = DIRLINK_DATA_DIR;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dirlink_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParseSectionsListsAndComments) {
  const auto cfg = parse_config(
      "# grid\n[data]\ndataset = g.txt\nfeatures = random\n[model]\nmodel = sdgae, mlp\nk = 1,3\n"
      "[training]\nlr = 0.01, 0.005\nnegatives = per_epoch\n[run]\nseeds = 4,5\nworkers = 2\n");
  EXPECT_EQ(cfg.dataset, "g.txt");
  EXPECT_EQ(cfg.features, FeatureMode::random);
  EXPECT_EQ(cfg.models, (std::vector<EncoderKind>{EncoderKind::sdgae, EncoderKind::mlp}));
  EXPECT_EQ(cfg.k, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(cfg.negatives, NegativeStrategy::per_epoch);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5}));
  // sdgae expands over k and lr (4); mlp has no k (2).
  EXPECT_EQ(expand_grid(cfg).size(), 6u);
}

TEST(Config, RoundTrip) {
  ExperimentConfig cfg;
  cfg.dataset = "data/x.txt";
  cfg.models = {EncoderKind::digae, EncoderKind::sdgae};
  cfg.alpha = {0.1, 0.3333333333333333};
  cfg.lr = {0.01, 1e-3};
  cfg.losses = {LossKind::ce};
  cfg.seeds = {7, 9, 11};
  cfg.out = "results dir";
  EXPECT_EQ(parse_config(serialize(cfg)), cfg);
  EXPECT_EQ(parse_config(serialize(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    parse_config("[model]\nk = 2\nbogus = 1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_config("[model]\nk = two\n"), ParseError);
  EXPECT_THROW(parse_config("[nowhere]\n"), ParseError);
  EXPECT_THROW(parse_config("model\n"), ParseError);
}

TEST(Config, DefaultSeedsAreTen) { EXPECT_EQ(default_seeds(), (std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9})); }

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--model", "gcn", "--dataset", kData + "/ring3.txt"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, DataErrors) {
  EXPECT_EQ(run({"preprocess", "--dataset", "/nonexistent.txt", "--out", scratch("x").string()}).code, kExitData);
  const auto bad = fs::temp_directory_path() / "dirlink_cli_bad.txt";
  std::ofstream(bad) << "0 1\nnot an edge\n";
  const auto r = run({"split", "--dataset", bad.string(), "--out", scratch("y").string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find(":2:"), std::string::npos) << r.err;
}

TEST(Cli, PreprocessIsIdempotent) {
  const auto a = scratch("pre_a");
  ASSERT_EQ(run({"preprocess", "--dataset", kData + "/graph_d.txt", "--out", a.string()}).code, kExitOk);
  EXPECT_NE(slurp(a / "stats.txt").find("edges"), std::string::npos);
  const auto b = scratch("pre_b");
  ASSERT_EQ(run({"preprocess", "--dataset", (a / "edges.txt").string(), "--out", b.string()}).code, kExitOk);
  EXPECT_EQ(slurp(a / "edges.txt"), slurp(b / "edges.txt"));
  EXPECT_EQ(slurp(a / "stats.txt"), slurp(b / "stats.txt"));
}

TEST(Cli, SplitTrainEvalReconstructSmokeRun) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = scratch("smoke");
  const std::string data = kData + "/synthetic200.txt";
  auto r = run({"split", "--dataset", data, "--seeds", "0", "--out", (dir / "splits").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("audit=ok"), std::string::npos);
  const std::string split = (dir / "splits" / "seed_0").string();

  r = run({"train", "--split", split, "--features", "random", "--k", "2", "--max-epochs", "30", "--patience", "10",
           "--out", (dir / "train").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("auc="), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "train" / "model.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "train" / "history.tsv"));

  const std::string ckpt = (dir / "train" / "model.ckpt").string();
  const auto e = run({"eval", "--checkpoint", ckpt, "--split", split, "--features", "random"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  // eval reproduces the test metrics printed by train.
  EXPECT_NE(r.out.find(e.out), std::string::npos) << r.out << "\n" << e.out;

  r = run({"reconstruct", "--checkpoint", ckpt, "--split", split, "--features", "random", "--out",
           (dir / "rec").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "rec" / "reconstructed_out.tsv"));
  EXPECT_TRUE(fs::exists(dir / "rec" / "train_in.tsv"));
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
}

TEST(Cli, GridWritesTablesAndFlagsFailures) {
  const auto dir = scratch("grid");
  auto r = run({"grid", "--dataset", kData + "/synthetic200.txt", "--seeds", "0,1", "--model", "sdgae,mlp",
                "--features", "random", "--k", "1", "--max-epochs", "10", "--patience", "3", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto runs = slurp(dir / "runs.tsv");
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 5);
  EXPECT_NE(slurp(dir / "summary.tsv").find("selected"), std::string::npos);
  EXPECT_EQ(parse_config(slurp(dir / "config.txt")).seeds, (std::vector<std::uint64_t>{0, 1}));

  // 'original' features without a feature file fail every run; the grid exits 3.
  r = run({"grid", "--dataset", kData + "/synthetic200.txt", "--seeds", "0", "--features", "original",
           "--max-epochs", "5", "--patience", "2", "--out", scratch("grid_fail").string()});
  EXPECT_NE(r.code, kExitOk);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto cfg_path = fs::temp_directory_path() / "dirlink_cli_cfg.ini";
  std::ofstream(cfg_path) << "[data]\ndataset = " << kData << "/synthetic200.txt\nfeatures = random\n"
                          << "[model]\nk = 1\n[training]\nmax_epochs = 8\npatience = 3\n[run]\nseeds = 0\n";
  const auto dir = scratch("cfg");
  const auto r = run({"train", "--config", cfg_path.string(), "--seed", "1", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("seed=1"), std::string::npos) << r.out;
}

TEST(Cli, CheckExpressiveness) {
  auto r = run({"check-expressiveness", "--dataset", kData + "/ring3.txt", "--mode", "single", "--decoder",
                "lr_concat", "--dim", "2"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("verdict: infeasible"), std::string::npos) << r.out;
  r = run({"check-expressiveness", "--dataset", kData + "/graph_d.txt", "--mode", "single", "--decoder",
           "lr_concat", "--dim", "2"});
  EXPECT_NE(r.out.find("verdict: feasible"), std::string::npos) << r.out;
  r = run({"check-expressiveness", "--dataset", kData + "/synthetic200.txt"});
  EXPECT_EQ(r.code, kExitUsage);
}
