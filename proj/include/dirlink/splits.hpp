#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dirlink/graph.hpp"

namespace dirlink {

enum class NegativeStrategy { per_run, per_epoch };
enum class Holdout { val_pos, val_neg, test_pos, test_neg };

const char* to_string(Holdout h);

struct SplitRatios {
  double train = 0.80;
  double val = 0.05;
  double test = 0.15;
  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

/// One train/validation/test split of a directed graph.
///
/// The held-out edge lists are only reachable through held_out(), which
/// reports every access to an optional probe. Training code never receives a
/// SplitBundle; the probe exists so tests can prove that.
class SplitBundle {
 public:
  using AccessProbe = std::function<void(Holdout)>;

  SplitBundle() = default;
  SplitBundle(DirectedGraph train_graph, std::vector<Edge> val_pos, std::vector<Edge> val_neg,
              std::vector<Edge> test_pos, std::vector<Edge> test_neg, std::uint64_t seed,
              SplitRatios ratios = {});

  std::uint64_t seed() const noexcept { return seed_; }
  const SplitRatios& ratios() const noexcept { return ratios_; }
  std::size_t num_nodes() const noexcept { return train_graph_.num_nodes(); }
  /// Total positives across the three parts.
  std::size_t num_edges() const noexcept {
    return train_graph_.num_edges() + val_pos_.size() + test_pos_.size();
  }

  const DirectedGraph& train_graph() const noexcept { return train_graph_; }
  std::span<const Edge> train_pos() const noexcept { return train_graph_.edges(); }

  std::span<const Edge> held_out(Holdout which) const;
  std::size_t held_out_size(Holdout which) const noexcept;

  /// Installs (or clears, with an empty function) the access probe.
  void set_access_probe(AccessProbe probe) const { probe_ = std::move(probe); }

  friend bool operator==(const SplitBundle& a, const SplitBundle& b) {
    return a.train_graph_ == b.train_graph_ && a.val_pos_ == b.val_pos_ &&
           a.val_neg_ == b.val_neg_ && a.test_pos_ == b.test_pos_ && a.test_neg_ == b.test_neg_ &&
           a.seed_ == b.seed_ && a.ratios_ == b.ratios_;
  }

 private:
  const std::vector<Edge>& list(Holdout which) const noexcept;

  DirectedGraph train_graph_;
  std::vector<Edge> val_pos_;
  std::vector<Edge> val_neg_;
  std::vector<Edge> test_pos_;
  std::vector<Edge> test_neg_;
  std::uint64_t seed_ = 0;
  SplitRatios ratios_;
  mutable AccessProbe probe_;
};

/// Holdout sizes for m edges: floor(test*m) and floor(val*m).
std::size_t holdout_count(std::size_t m, double ratio);

/// Leak-free split that keeps the training graph weakly connected.
///
/// Edges are shuffled with `seed`; a spanning forest of the underlying
/// undirected graph is grown in shuffled order and one directed edge per
/// spanning connection is pinned into training (the lexicographically smaller
/// direction when both exist). Test, then validation edges are taken from the
/// remaining shuffled edges. Evaluation negatives are drawn jointly without
/// replacement against the full edge set.
///
/// Throws DataError if `g` is not weakly connected or if too few edges can be
/// removed without disconnecting it.
SplitBundle split_edges(const DirectedGraph& g, std::uint64_t seed, SplitRatios ratios = {});

/// `count` distinct ordered pairs (u, v), u != v, (u, v) not in `full`.
std::vector<Edge> sample_eval_negatives(const DirectedGraph& full, std::size_t count,
                                        std::uint64_t seed);

/// Training negatives: distinct pairs outside the *training* edge set only.
/// per_run ignores `epoch`; per_epoch draws a fresh stream from (seed, epoch).
std::vector<Edge> sample_train_negatives(const DirectedGraph& train_graph, std::size_t count,
                                         std::uint64_t seed, NegativeStrategy strategy,
                                         std::size_t epoch);

/// Lists violated split invariants against the full graph (empty when valid).
std::vector<std::string> audit_split(const DirectedGraph& full, const SplitBundle& bundle);

/// Directory layout: train.txt, val_pos.txt, val_neg.txt, test_pos.txt,
/// test_neg.txt and a `meta` file with n, m, seed and ratios.
void save_split(const std::filesystem::path& dir, const SplitBundle& bundle);
SplitBundle load_split(const std::filesystem::path& dir);

// ------------------------------------------------------------------ features

enum class FeatureMode { original, degrees, random };

struct FeatureInit {
  FeatureMode mode = FeatureMode::degrees;
  std::size_t dim = 64;  // random mode only
  std::uint64_t seed = 0;
};

/// original: returns `original` unchanged (DataError if absent or wrong row count);
/// degrees: columns [out_deg, in_deg] of the training graph, no self-loops;
/// random: i.i.d. standard normal entries.
FeatureMatrix init_features(const FeatureInit& init, const DirectedGraph& train_graph,
                            const std::optional<FeatureMatrix>& original);

}  // namespace dirlink
