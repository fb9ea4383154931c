#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dirlink/dense.hpp"
#include "dirlink/graph.hpp"
#include "dirlink/tensor.hpp"

namespace dirlink {

enum class EncoderKind { sdgae, digae, mlp };
enum class DecoderKind { inner, mlp_hadamard, mlp_concat, lr_concat };

const char* to_string(EncoderKind k);
const char* to_string(DecoderKind k);
EncoderKind parse_encoder(const std::string& s);
DecoderKind parse_decoder(const std::string& s);

struct ModelSpec {
  EncoderKind encoder = EncoderKind::sdgae;
  DecoderKind decoder = DecoderKind::inner;
  std::size_t in_dim = 0;
  std::size_t hidden = 64;
  std::size_t embedding = 64;
  std::size_t mlp_layers = 2;  // MLP encoder and the SDGAE input MLPs
  std::size_t k = 5;           // SDGAE propagation steps
  std::size_t digae_layers = 2;
  double alpha = 0.5;
  double beta = 0.5;
  std::size_t decoder_hidden = 64;
  /// 1 for a single logit (BCE), 2 for a two-class head (CE).
  std::size_t logits = 1;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Throws std::invalid_argument on inconsistent settings.
void validate(const ModelSpec& spec);

// ------------------------------------------------------- tape-bound weights

struct MlpLayer {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out, or invalid for no bias
};

/// relu between layers, linear output.
struct MlpWeights {
  std::vector<MlpLayer> layers;
};

struct SdgaeParams {
  MlpWeights mlp_s;
  MlpWeights mlp_t;
  std::vector<Tensor> gamma_s;  // K scalars (1x1)
  std::vector<Tensor> gamma_t;
};

struct DigaeParams {
  std::vector<Tensor> w_s;  // per layer
  std::vector<Tensor> w_t;
  double alpha = 0.5;
  double beta = 0.5;
};

struct DecoderParams {
  DecoderKind kind = DecoderKind::inner;
  MlpWeights head;  // unused by inner
  std::size_t logits = 1;
};

/// Source and target embeddings. Single-embedding encoders set t == s.
struct EncoderOutput {
  Tensor s;
  Tensor t;
};

Tensor mlp_forward(const MlpWeights& w, Tensor x);

/// Iterative propagation: S <- gamma_s[k] * A T + S, T <- gamma_t[k] * A^T S + T,
/// starting from the two input MLPs.
EncoderOutput sdgae_encode(const SdgaeParams& p, const CsrMatrix& a_norm, Tensor x);

/// Coefficients of the equivalent block polynomial, each of length K + 1.
std::pair<std::vector<double>, std::vector<double>> expand_coefficients(
    std::span<const double> gamma_s, std::span<const double> gamma_t);

/// Forward-only reference: evaluates the block polynomial with expanded
/// coefficients and alternating products. Returns dense (S, T).
std::pair<Matrix, Matrix> sdgae_encode_explicit(const SdgaeParams& p, const CsrMatrix& a_norm,
                                                Tensor x);

/// Layered DiGAE propagation with `n_dir` = D_out^{-beta} (A+I) D_in^{-alpha}.
EncoderOutput digae_encode(const DigaeParams& p, const CsrMatrix& n_dir, Tensor x);
/// Same layers as one GCN step on the normalized bipartite lift over stacked rows.
EncoderOutput digae_encode_bipartite(const DigaeParams& p, const DirectedGraph& g, Tensor x);

EncoderOutput mlp_encode(const MlpWeights& w, Tensor x);

/// Logits for each pair, P x logits. Throws ShapeError on out-of-range ids.
Tensor decode(const DecoderParams& p, const EncoderOutput& enc, std::span<const Edge> pairs);

/// Edge score from a logit row: the logit itself, or l1 - l0 for a two-class head.
double pair_score(std::span<const double> logit_row);

// --------------------------------------------------------------------- model

/// Graph-side constants that a model needs for propagation.
struct GraphContext {
  std::size_t n = 0;
  CsrMatrix propagation;  // normalized adjacency for SDGAE / DiGAE, empty for MLP
};

GraphContext make_context(const ModelSpec& spec, const DirectedGraph& g);

/// Learned parameters of one model, stored by name in a fixed order.
class Model {
 public:
  struct Bound {
    SdgaeParams sdgae;
    DigaeParams digae;
    MlpWeights mlp;
    DecoderParams decoder;
    std::vector<Tensor> all;  // same order as parameters()
  };

  Model() = default;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; gammas at 1.
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const noexcept { return spec_; }
  std::span<const std::string> names() const noexcept { return names_; }
  std::vector<Matrix>& parameters() noexcept { return values_; }
  const std::vector<Matrix>& parameters() const noexcept { return values_; }
  Matrix& parameter(const std::string& name);

  Bound bind(Tape& tape) const;
  EncoderOutput encode(const Bound& b, const GraphContext& ctx, Tensor x) const;

  /// Dense embeddings for the whole graph (forward only).
  std::pair<Matrix, Matrix> embed(const GraphContext& ctx, const FeatureMatrix& x) const;
  /// Scores using precomputed embeddings.
  std::vector<double> score_pairs(const Matrix& s, const Matrix& t, std::span<const Edge> pairs) const;
  std::vector<double> score(const GraphContext& ctx, const FeatureMatrix& x,
                            std::span<const Edge> pairs) const;

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  friend bool operator==(const Model&, const Model&) = default;

 private:
  void add(std::string name, Matrix value);

  ModelSpec spec_;
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

}  // namespace dirlink
