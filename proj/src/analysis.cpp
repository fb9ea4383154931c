#include "dirlink/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "dirlink/error.hpp"
#include "dirlink/optim.hpp"
#include "dirlink/rng.hpp"
#include "dirlink/tensor.hpp"

namespace dirlink {

// ------------------------------------------------------------ reconstruction

namespace {

struct Candidate {
  double score;
  NodeId u;
  NodeId v;
};

bool ranks_before(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.u != b.u) return a.u < b.u;
  return a.v < b.v;
}

}  // namespace

std::vector<Edge> reconstruct_topm(const PairScorer& scorer, std::size_t n, std::size_t m_prime,
                                   std::size_t chunk) {
  const std::size_t total = n < 2 ? 0 : n * (n - 1);
  if (m_prime > total)
    throw std::invalid_argument("reconstruct_topm: m' = " + std::to_string(m_prime) + " exceeds the " +
                                std::to_string(total) + " candidate pairs");
  if (chunk == 0) throw std::invalid_argument("reconstruct_topm: chunk must be positive");
  std::vector<Candidate> top;
  std::vector<Edge> batch;
  batch.reserve(std::min(chunk, total));

  auto flush = [&] {
    if (batch.empty()) return;
    const std::vector<double> scores = scorer(batch);
    if (scores.size() != batch.size()) throw ShapeError("reconstruct_topm: scorer returned wrong count");
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (std::isnan(scores[i])) throw DataError("reconstruct_topm: scorer returned NaN");
      top.push_back({scores[i], batch[i].src, batch[i].dst});
    }
    batch.clear();
    if (top.size() > m_prime) {
      std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(m_prime), top.end(),
                       ranks_before);
      top.resize(m_prime);
    }
  };

  if (m_prime > 0) {
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = 0; v < n; ++v) {
        if (u == v) continue;
        batch.push_back({u, v});
        if (batch.size() == chunk) flush();
      }
    }
    flush();
  }
  std::sort(top.begin(), top.end(), ranks_before);
  std::vector<Edge> out;
  out.reserve(top.size());
  for (const auto& c : top) out.push_back({c.u, c.v});
  return out;
}

std::vector<Edge> reconstruct_topm(const Model& model, const GraphContext& ctx,
                                   const FeatureMatrix& features, std::size_t m_prime, std::size_t chunk) {
  const auto [s, t] = model.embed(ctx, features);
  return reconstruct_topm([&](std::span<const Edge> pairs) { return model.score_pairs(s, t, pairs); },
                          ctx.n, m_prime, chunk);
}

DegreeHistogram degree_histograms(std::span<const Edge> edges, std::size_t n) {
  std::vector<std::size_t> out(n, 0);
  std::vector<std::size_t> in(n, 0);
  for (const auto& e : edges) {
    if (e.src >= n || e.dst >= n) throw DataError("degree_histograms: node id out of range");
    ++out[e.src];
    ++in[e.dst];
  }
  DegreeHistogram h;
  for (std::size_t u = 0; u < n; ++u) {
    ++h.out[out[u]];
    ++h.in[in[u]];
  }
  return h;
}

void write_histograms(const std::filesystem::path& prefix, const DegreeHistogram& h) {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  auto write = [](const std::filesystem::path& path, const std::map<std::size_t, std::size_t>& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "degree\tcount\n";
    for (const auto& [d, c] : m) out << d << '\t' << c << '\n';
  };
  write(prefix.string() + "_out.tsv", h.out);
  write(prefix.string() + "_in.tsv", h.in);
}

// ------------------------------------------------------------ expressiveness

const char* to_string(EmbeddingMode m) { return m == EmbeddingMode::single ? "single" : "dual"; }

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::feasible: return "feasible";
    case Verdict::infeasible: return "infeasible";
    case Verdict::undetermined: return "undetermined";
  }
  return "?";
}

EmbeddingMode parse_mode(const std::string& s) {
  if (s == "single") return EmbeddingMode::single;
  if (s == "dual") return EmbeddingMode::dual;
  throw std::invalid_argument("unknown embedding mode '" + s + "' (expected single or dual)");
}

namespace {

struct Constraints {
  std::vector<Edge> pairs;
  std::vector<double> sign;  // +1 edge, -1 reverse of an asymmetric edge
};

Constraints constraints_of(const DirectedGraph& g) {
  Constraints c;
  for (const auto& e : g.edges()) {
    c.pairs.push_back(e);
    c.sign.push_back(1.0);
  }
  for (const auto& e : g.edges()) {
    if (g.has_edge(e.dst, e.src)) continue;
    c.pairs.push_back({e.dst, e.src});
    c.sign.push_back(-1.0);
  }
  return c;
}

/// A directed cycle among edges whose reverse is absent, as a node list.
std::optional<std::vector<NodeId>> asymmetric_cycle(const DirectedGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<NodeId>> adj(n);
  for (const auto& e : g.edges())
    if (!g.has_edge(e.dst, e.src)) adj[e.src].push_back(e.dst);
  std::vector<int> color(n, 0);
  std::vector<NodeId> parent(n, 0);
  std::optional<std::vector<NodeId>> found;
  std::function<void(NodeId)> dfs = [&](NodeId u) {
    color[u] = 1;
    for (NodeId v : adj[u]) {
      if (found) return;
      if (color[v] == 0) {
        parent[v] = u;
        dfs(v);
      } else if (color[v] == 1) {
        std::vector<NodeId> cyc{v};
        for (NodeId x = u; x != v; x = parent[x]) cyc.push_back(x);
        std::reverse(cyc.begin() + 1, cyc.end());
        found = cyc;
        return;
      }
    }
    color[u] = 2;
  };
  for (NodeId u = 0; u < n && !found; ++u)
    if (color[u] == 0) dfs(u);
  return found;
}

bool has_asymmetric_edge(const DirectedGraph& g) {
  for (const auto& e : g.edges())
    if (!g.has_edge(e.dst, e.src)) return true;
  return false;
}

bool has_reciprocal_edge(const DirectedGraph& g) {
  for (const auto& e : g.edges())
    if (g.has_edge(e.dst, e.src)) return true;
  return false;
}

std::vector<std::size_t> head_dims(DecoderKind kind, std::size_t dim, std::size_t hidden) {
  switch (kind) {
    case DecoderKind::inner: return {};
    case DecoderKind::mlp_hadamard: return {dim, hidden, 1};
    case DecoderKind::mlp_concat: return {2 * dim, hidden, 1};
    case DecoderKind::lr_concat: return {2 * dim, 1};
  }
  return {};
}

/// Potential a_u = longest path from u in the (acyclic) asymmetric edge graph.
std::vector<double> longest_path_potential(const DirectedGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<double> a(n, -1.0);
  std::function<double(NodeId)> depth = [&](NodeId u) -> double {
    if (a[u] >= 0) return a[u];
    double best = 0.0;
    for (NodeId v : g.out_neighbors(u))
      if (!g.has_edge(v, u)) best = std::max(best, 1.0 + depth(v));
    return a[u] = best;
  };
  for (NodeId u = 0; u < n; ++u) depth(u);
  return a;
}

std::optional<Witness> search_witness(const DirectedGraph& g, EmbeddingMode mode, DecoderKind decoder,
                                      std::size_t dim, std::uint64_t seed,
                                      const ExpressivenessOptions& opt) {
  const std::size_t n = g.num_nodes();
  const Constraints c = constraints_of(g);
  const Matrix sign(c.sign.size(), 1, c.sign);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Matrix> params;
  auto gaussian = [&](std::size_t r, std::size_t cols) {
    Matrix m(r, cols);
    for (auto& v : m.values()) v = normal(rng);
    return m;
  };
  params.push_back(gaussian(n, dim));
  if (mode == EmbeddingMode::dual) params.push_back(gaussian(n, dim));
  const std::size_t n_embed = params.size();
  const auto dims = head_dims(decoder, dim, opt.decoder_hidden);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double b = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    std::uniform_real_distribution<double> uni(-b, b);
    Matrix w(dims[i], dims[i + 1]);
    Matrix bias(1, dims[i + 1]);
    for (auto& v : w.values()) v = uni(rng);
    for (auto& v : bias.values()) v = uni(rng);
    params.push_back(std::move(w));
    params.push_back(std::move(bias));
  }

  AdamState adam;
  adam.options.lr = opt.lr;
  std::vector<Matrix> grads;
  for (std::size_t step = 0; step < opt.max_steps; ++step) {
    Tape tape;
    std::vector<Tensor> p;
    for (const auto& m : params) p.push_back(tape.parameter(m));
    EncoderOutput enc{p[0], mode == EmbeddingMode::dual ? p[1] : p[0]};
    DecoderParams dec{decoder, {}, 1};
    for (std::size_t i = n_embed; i < p.size(); i += 2) dec.head.layers.push_back({p[i], p[i + 1]});
    const Tensor z = decode(dec, enc, c.pairs);
    const Tensor margin = hadamard(z, tape.constant_view(sign));
    double worst = margin.value()(0, 0);
    for (double v : margin.value().values()) worst = std::min(worst, v);
    if (worst > opt.delta) {
      Witness w{mode, decoder, params[0], params[n_embed - 1], {}};
      for (std::size_t i = n_embed; i < params.size(); i += 2) w.head.emplace_back(params[i], params[i + 1]);
      return w;
    }
    const Tensor loss = mean(relu(add_scalar(scale(margin, -1.0), 2.0 * opt.delta)));
    tape.backward(loss);
    grads.clear();
    for (const auto& t : p) grads.push_back(t.grad());
    adam_step(adam, params, grads);
  }
  return std::nullopt;
}

}  // namespace

ReplayResult validate_witness(const DirectedGraph& g, const Witness& w, double delta) {
  const std::size_t n = g.num_nodes();
  if (w.s.rows() != n || (w.mode == EmbeddingMode::dual && w.t.rows() != n))
    throw ShapeError("validate_witness: embeddings do not match the graph");
  const Constraints c = constraints_of(g);
  Tape tape;
  const Tensor s = tape.constant_view(w.s);
  EncoderOutput enc{s, w.mode == EmbeddingMode::dual ? tape.constant_view(w.t) : s};
  DecoderParams dec{w.decoder, {}, 1};
  for (const auto& [weight, bias] : w.head)
    dec.head.layers.push_back({tape.constant_view(weight), tape.constant_view(bias)});
  const Tensor z = decode(dec, enc, c.pairs);
  ReplayResult r;
  r.min_margin = c.pairs.empty() ? 0.0 : c.sign[0] * z.value()(0, 0) - delta;
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    const double m = c.sign[i] * z.value()(i, 0) - delta;
    r.min_margin = std::min(r.min_margin, m);
    if (!(m > 0.0)) ++r.violations;
  }
  r.ok = r.violations == 0;
  return r;
}

FeasibilityCertificate check_expressiveness(const DirectedGraph& g, EmbeddingMode mode,
                                            DecoderKind decoder, std::size_t dim, std::size_t attempts,
                                            const ExpressivenessOptions& opt) {
  const std::size_t n = g.num_nodes();
  if (n > 10) throw std::invalid_argument("check_expressiveness: graphs are limited to 10 nodes");
  if (dim < 1) throw std::invalid_argument("check_expressiveness: dim must be at least 1");
  if (attempts < 1) throw std::invalid_argument("check_expressiveness: attempts must be at least 1");

  FeasibilityCertificate cert;
  auto accept = [&](Witness w, const std::string& how) {
    const ReplayResult r = validate_witness(g, w, opt.delta);
    if (!r.ok) return false;
    cert.verdict = Verdict::feasible;
    cert.reason = how;
    cert.margin = r.min_margin + opt.delta;
    cert.witness = std::move(w);
    return true;
  };

  if (mode == EmbeddingMode::single) {
    const bool symmetric = decoder == DecoderKind::inner || decoder == DecoderKind::mlp_hadamard;
    if (symmetric && has_asymmetric_edge(g)) {
      cert.verdict = Verdict::infeasible;
      cert.reason = "decoder is symmetric under a single embedding, so logit(u,v) = logit(v,u) "
                    "cannot separate an edge from its missing reverse";
      return cert;
    }
    if (decoder == DecoderKind::lr_concat) {
      // logit(u,v) - logit(v,u) = g(u) - g(v) with g(x) = (w1 - w2) . h_x; every
      // asymmetric edge requires that difference to be positive.
      if (auto cyc = asymmetric_cycle(g)) {
        std::vector<long> coef(n, 0);
        for (std::size_t i = 0; i < cyc->size(); ++i) {
          ++coef[(*cyc)[i]];
          --coef[(*cyc)[(i + 1) % cyc->size()]];
        }
        const bool vanishes = std::all_of(coef.begin(), coef.end(), [](long c) { return c == 0; });
        if (vanishes) {
          cert.verdict = Verdict::infeasible;
          cert.reason = "summing g(u) - g(v) > 0 around an asymmetric cycle gives 0 > 0";
          cert.cycle = std::move(*cyc);
          cert.summed_coefficients = std::move(coef);
          cert.summed_rhs = 0.0;
          return cert;
        }
      }
      if (dim >= 2 && !has_reciprocal_edge(g)) {
        const auto a = longest_path_potential(g);
        Witness w{mode, decoder, Matrix(n, dim), Matrix(), {}};
        for (std::size_t u = 0; u < n; ++u) {
          w.s(u, 0) = a[u];
          w.s(u, 1) = a[u] == 0.0 ? 0.0 : -a[u];
        }
        w.t = w.s;
        Matrix weight(2 * dim, 1);
        weight(0, 0) = 1.0;
        weight(dim + 1, 0) = 1.0;
        w.head.emplace_back(std::move(weight), Matrix(1, 1));
        if (accept(std::move(w), "constructed from a topological potential of the asymmetric edges"))
          return cert;
      }
    }
  }

  for (std::size_t a = 0; a < attempts; ++a) {
    cert.attempts_used = a + 1;
    auto w = search_witness(g, mode, decoder, dim, derive_seed({opt.seed, a, 0x78u}), opt);
    if (w && accept(std::move(*w), "hinge search, restart " + std::to_string(a))) return cert;
  }
  cert.verdict = Verdict::undetermined;
  cert.reason = "no witness found in " + std::to_string(attempts) + " restarts";
  return cert;
}

}  // namespace dirlink
