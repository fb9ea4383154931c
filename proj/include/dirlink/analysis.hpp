#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dirlink/graph.hpp"
#include "dirlink/models.hpp"

namespace dirlink {

// ------------------------------------------------------------ reconstruction

/// Scores a batch of ordered pairs; larger means more likely an edge.
using PairScorer = std::function<std::vector<double>(std::span<const Edge>)>;

inline constexpr std::size_t kScoreChunk = 1'000'000;

/// The `m_prime` ordered pairs u != v with the highest scores, ordered by
/// (score desc, u asc, v asc). Candidates are scored in chunks of `chunk`.
/// Throws std::invalid_argument if m_prime > n(n-1).
std::vector<Edge> reconstruct_topm(const PairScorer& scorer, std::size_t n, std::size_t m_prime,
                                   std::size_t chunk = kScoreChunk);

/// Convenience: embeddings are computed once, then pairs are decoded in chunks.
std::vector<Edge> reconstruct_topm(const Model& model, const GraphContext& ctx,
                                   const FeatureMatrix& features, std::size_t m_prime,
                                   std::size_t chunk = kScoreChunk);

struct DegreeHistogram {
  std::map<std::size_t, std::size_t> out;  // degree -> node count
  std::map<std::size_t, std::size_t> in;
};

/// Ids must be < n. Nodes of degree zero are counted.
DegreeHistogram degree_histograms(std::span<const Edge> edges, std::size_t n);

/// Writes `<prefix>_out.tsv` and `<prefix>_in.tsv` with columns degree, count.
void write_histograms(const std::filesystem::path& prefix, const DegreeHistogram& h);

// ------------------------------------------------------------ expressiveness

enum class EmbeddingMode { single, dual };
enum class Verdict { feasible, infeasible, undetermined };

const char* to_string(EmbeddingMode m);
const char* to_string(Verdict v);
EmbeddingMode parse_mode(const std::string& s);

/// Embeddings plus decoder head, replayable through decode().
struct Witness {
  EmbeddingMode mode = EmbeddingMode::single;
  DecoderKind decoder = DecoderKind::lr_concat;
  Matrix s;  // n x dim
  Matrix t;  // equals s for single mode
  /// weight, bias pairs of the decoder head (empty for inner).
  std::vector<std::pair<Matrix, Matrix>> head;
};

struct ReplayResult {
  bool ok = false;
  double min_margin = 0;  // smallest y * logit - delta over all constraints
  std::size_t violations = 0;
};

/// Every (u,v) in E needs logit > delta; every (v,u) with (u,v) in E and
/// (v,u) not in E needs logit < -delta.
ReplayResult validate_witness(const DirectedGraph& g, const Witness& w, double delta);

struct FeasibilityCertificate {
  Verdict verdict = Verdict::undetermined;
  std::string reason;
  std::optional<Witness> witness;
  double margin = 0;  // from replay when feasible
  /// Infeasible by inequality summation: the cycle of asymmetric edges and the
  /// per-node coefficients of the summed pairwise-difference inequalities.
  std::vector<NodeId> cycle;
  std::vector<long> summed_coefficients;
  double summed_rhs = 0;
  std::size_t attempts_used = 0;
};

struct ExpressivenessOptions {
  double delta = 0.1;
  std::size_t max_steps = 3000;
  double lr = 0.05;
  std::size_t decoder_hidden = 16;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument for n > 10, dim < 1 or attempts < 1.
FeasibilityCertificate check_expressiveness(const DirectedGraph& g, EmbeddingMode mode,
                                            DecoderKind decoder, std::size_t dim,
                                            std::size_t attempts = 50,
                                            const ExpressivenessOptions& options = {});

}  // namespace dirlink
