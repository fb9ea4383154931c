#include "dirlink/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dirlink/error.hpp"
#include "dirlink/io.hpp"
#include "dirlink/rng.hpp"

namespace dirlink {

const char* to_string(Holdout h) {
  switch (h) {
    case Holdout::val_pos: return "val_pos";
    case Holdout::val_neg: return "val_neg";
    case Holdout::test_pos: return "test_pos";
    case Holdout::test_neg: return "test_neg";
  }
  return "?";
}

SplitBundle::SplitBundle(DirectedGraph train_graph, std::vector<Edge> val_pos,
                         std::vector<Edge> val_neg, std::vector<Edge> test_pos,
                         std::vector<Edge> test_neg, std::uint64_t seed, SplitRatios ratios)
    : train_graph_(std::move(train_graph)),
      val_pos_(std::move(val_pos)),
      val_neg_(std::move(val_neg)),
      test_pos_(std::move(test_pos)),
      test_neg_(std::move(test_neg)),
      seed_(seed),
      ratios_(ratios) {}

const std::vector<Edge>& SplitBundle::list(Holdout which) const noexcept {
  switch (which) {
    case Holdout::val_pos: return val_pos_;
    case Holdout::val_neg: return val_neg_;
    case Holdout::test_pos: return test_pos_;
    case Holdout::test_neg: return test_neg_;
  }
  return val_pos_;
}

std::span<const Edge> SplitBundle::held_out(Holdout which) const {
  if (probe_) probe_(which);
  return list(which);
}

std::size_t SplitBundle::held_out_size(Holdout which) const noexcept { return list(which).size(); }

std::size_t holdout_count(std::size_t m, double ratio) {
  // The epsilon keeps products such as 0.15 * 500 from landing just under an integer.
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(m) + 1e-9));
}

namespace {

std::uint64_t pair_key(const Edge& e, std::size_t n) {
  return static_cast<std::uint64_t>(e.src) * n + e.dst;
}

/// Distinct non-self-loop pairs outside `exclude`, drawn with `rng`.
std::vector<Edge> sample_non_edges(const DirectedGraph& exclude, std::size_t count,
                                   std::mt19937_64& rng) {
  const std::size_t n = exclude.num_nodes();
  const std::size_t total = n < 2 ? 0 : n * (n - 1);
  const std::size_t available = total - exclude.num_edges();
  if (count > available) {
    throw DataError("cannot sample " + std::to_string(count) + " negative pairs: only " +
                    std::to_string(available) + " non-edges exist");
  }
  std::vector<Edge> out;
  out.reserve(count);
  if (count == 0) return out;

  if (2 * count > available) {
    // Dense regime: enumerate the complement and take a random prefix.
    std::vector<Edge> pool;
    pool.reserve(available);
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = 0; v < n; ++v)
        if (u != v && !exclude.has_edge(u, v)) pool.push_back({u, v});
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
    return out;
  }

  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(2 * count);
  while (out.size() < count) {
    const Edge e{node(rng), node(rng)};
    if (e.src == e.dst || exclude.has_edge(e.src, e.dst)) continue;
    if (!seen.insert(pair_key(e, n)).second) continue;
    out.push_back(e);
  }
  return out;
}

}  // namespace

std::vector<Edge> sample_eval_negatives(const DirectedGraph& full, std::size_t count,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed({seed, 0x65u}));
  return sample_non_edges(full, count, rng);
}

std::vector<Edge> sample_train_negatives(const DirectedGraph& train_graph, std::size_t count,
                                         std::uint64_t seed, NegativeStrategy strategy,
                                         std::size_t epoch) {
  const std::uint64_t stream = strategy == NegativeStrategy::per_run
                                   ? derive_seed({seed, 0x74u})
                                   : derive_seed({seed, 0x74u, epoch + 1});
  std::mt19937_64 rng(stream);
  return sample_non_edges(train_graph, count, rng);
}

SplitBundle split_edges(const DirectedGraph& g, std::uint64_t seed, SplitRatios ratios) {
  if (!is_weakly_connected(g)) throw DataError("split_edges: graph is not weakly connected");
  const std::size_t m = g.num_edges();
  const std::size_t n_test = holdout_count(m, ratios.test);
  const std::size_t n_val = holdout_count(m, ratios.val);

  std::mt19937_64 rng(seed);
  std::vector<Edge> order(g.edges().begin(), g.edges().end());
  std::shuffle(order.begin(), order.end(), rng);

  // Spanning forest of the undirected view, grown in shuffled order.
  std::vector<std::size_t> parent(g.num_nodes());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::set<Edge> pinned;
  for (const auto& e : order) {
    const auto a = find(e.src);
    const auto b = find(e.dst);
    if (a == b) continue;
    parent[std::max(a, b)] = std::min(a, b);
    const Edge lo{std::min(e.src, e.dst), std::max(e.src, e.dst)};
    pinned.insert(g.has_edge(lo.src, lo.dst) ? lo : Edge{lo.dst, lo.src});
  }

  std::vector<Edge> removable;
  removable.reserve(m);
  for (const auto& e : order)
    if (!pinned.contains(e)) removable.push_back(e);
  if (removable.size() < n_test + n_val) {
    throw DataError("split_edges: only " + std::to_string(removable.size()) +
                    " edges can be held out without disconnecting the training graph, " +
                    std::to_string(n_test + n_val) + " requested");
  }

  std::vector<Edge> test_pos(removable.begin(), removable.begin() + n_test);
  std::vector<Edge> val_pos(removable.begin() + n_test, removable.begin() + n_test + n_val);
  std::vector<Edge> train(pinned.begin(), pinned.end());
  train.insert(train.end(), removable.begin() + n_test + n_val, removable.end());
  std::sort(test_pos.begin(), test_pos.end());
  std::sort(val_pos.begin(), val_pos.end());

  auto negatives = sample_eval_negatives(g, n_test + n_val, seed);
  std::vector<Edge> test_neg(negatives.begin(), negatives.begin() + n_test);
  std::vector<Edge> val_neg(negatives.begin() + n_test, negatives.end());

  return SplitBundle(DirectedGraph(g.num_nodes(), std::move(train)), std::move(val_pos),
                     std::move(val_neg), std::move(test_pos), std::move(test_neg), seed, ratios);
}

std::vector<std::string> audit_split(const DirectedGraph& full, const SplitBundle& bundle) {
  std::vector<std::string> issues;
  const auto val_pos = bundle.held_out(Holdout::val_pos);
  const auto test_pos = bundle.held_out(Holdout::test_pos);
  const auto val_neg = bundle.held_out(Holdout::val_neg);
  const auto test_neg = bundle.held_out(Holdout::test_neg);

  std::set<Edge> seen;
  std::size_t total = 0;
  for (auto part : {bundle.train_pos(), val_pos, test_pos}) {
    for (const auto& e : part) {
      ++total;
      if (!seen.insert(e).second) issues.push_back("positive edge appears in two parts");
      if (!full.has_edge(e.src, e.dst)) issues.push_back("positive edge not in the full graph");
    }
  }
  if (total != full.num_edges()) issues.push_back("positives do not cover the full edge set");

  const auto m = full.num_edges();
  if (test_pos.size() != holdout_count(m, bundle.ratios().test))
    issues.push_back("test size differs from floor rule");
  if (val_pos.size() != holdout_count(m, bundle.ratios().val))
    issues.push_back("validation size differs from floor rule");
  if (val_neg.size() != val_pos.size()) issues.push_back("|val_neg| != |val_pos|");
  if (test_neg.size() != test_pos.size()) issues.push_back("|test_neg| != |test_pos|");
  if (!is_weakly_connected(bundle.train_graph()))
    issues.push_back("training graph is not weakly connected");

  std::set<Edge> negs;
  for (auto part : {val_neg, test_neg}) {
    for (const auto& e : part) {
      if (e.src == e.dst) issues.push_back("negative is a self-loop");
      if (full.has_edge(e.src, e.dst)) issues.push_back("negative is an edge of the full graph");
      if (!negs.insert(e).second) issues.push_back("duplicate evaluation negative");
    }
  }
  return issues;
}

void save_split(const std::filesystem::path& dir, const SplitBundle& bundle) {
  std::filesystem::create_directories(dir);
  write_edge_list(dir / "train.txt", bundle.train_pos());
  for (auto h : {Holdout::val_pos, Holdout::val_neg, Holdout::test_pos, Holdout::test_neg})
    write_edge_list(dir / (std::string(to_string(h)) + ".txt"), bundle.held_out(h));
  std::ofstream meta(dir / "meta", std::ios::trunc);
  meta.precision(17);
  meta << "n " << bundle.num_nodes() << '\n'
       << "m " << bundle.num_edges() << '\n'
       << "seed " << bundle.seed() << '\n'
       << "ratios " << bundle.ratios().train << ' ' << bundle.ratios().val << ' '
       << bundle.ratios().test << '\n';
  if (!meta) throw DataError((dir / "meta").string() + ": write failed");
}

SplitBundle load_split(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "meta");
  if (!meta) throw ParseError((dir / "meta").string(), 0, "cannot open file");
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  bool have_n = false;
  std::string key;
  std::size_t lineno = 0;
  std::string line;
  while (std::getline(meta, line)) {
    ++lineno;
    std::istringstream fields(line);
    if (!(fields >> key)) continue;
    bool ok = true;
    if (key == "n") ok = static_cast<bool>(fields >> n), have_n = ok;
    else if (key == "m") ok = static_cast<bool>(fields >> m);
    else if (key == "seed") ok = static_cast<bool>(fields >> seed);
    else if (key == "ratios") ok = static_cast<bool>(fields >> ratios.train >> ratios.val >> ratios.test);
    if (!ok) throw ParseError((dir / "meta").string(), lineno, "malformed value for " + key);
  }
  if (!have_n) throw ParseError((dir / "meta").string(), 0, "missing node count");

  auto read = [&](const char* name) { return read_pairs(dir / (std::string(name) + ".txt")); };
  DirectedGraph train(n, read("train"));
  SplitBundle bundle(std::move(train), read("val_pos"), read("val_neg"), read("test_pos"),
                     read("test_neg"), seed, ratios);
  if (m && bundle.num_edges() != m)
    throw DataError(dir.string() + ": edge count does not match meta");
  return bundle;
}

FeatureMatrix init_features(const FeatureInit& init, const DirectedGraph& train_graph,
                            const std::optional<FeatureMatrix>& original) {
  const std::size_t n = train_graph.num_nodes();
  switch (init.mode) {
    case FeatureMode::original: {
      if (!original) throw DataError("feature mode 'original' requires a feature matrix");
      if (original->rows() != n) {
        throw DataError("feature matrix has " + std::to_string(original->rows()) +
                        " rows for " + std::to_string(n) + " nodes");
      }
      if (!original->all_finite()) throw DataError("feature matrix has non-finite entries");
      return *original;
    }
    case FeatureMode::degrees: {
      const Degrees d = degrees(train_graph, false);
      FeatureMatrix f(n, 2);
      for (std::size_t i = 0; i < n; ++i) {
        f(i, 0) = d.out[i];
        f(i, 1) = d.in[i];
      }
      return f;
    }
    case FeatureMode::random: {
      if (init.dim == 0) throw DataError("random features need dim >= 1");
      std::mt19937_64 rng(derive_seed({init.seed, 0x66u}));
      std::normal_distribution<double> normal(0.0, 1.0);
      FeatureMatrix f(n, init.dim);
      for (auto& v : f.values()) v = normal(rng);
      return f;
    }
  }
  throw DataError("unknown feature mode");
}

}  // namespace dirlink
