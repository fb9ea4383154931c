#include "dirlink/models.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dirlink/error.hpp"

namespace dirlink {

const char* to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::sdgae: return "sdgae";
    case EncoderKind::digae: return "digae";
    case EncoderKind::mlp: return "mlp";
  }
  return "?";
}

const char* to_string(DecoderKind k) {
  switch (k) {
    case DecoderKind::inner: return "inner";
    case DecoderKind::mlp_hadamard: return "mlp_hadamard";
    case DecoderKind::mlp_concat: return "mlp_concat";
    case DecoderKind::lr_concat: return "lr_concat";
  }
  return "?";
}

EncoderKind parse_encoder(const std::string& s) {
  if (s == "sdgae") return EncoderKind::sdgae;
  if (s == "digae") return EncoderKind::digae;
  if (s == "mlp") return EncoderKind::mlp;
  throw std::invalid_argument("unknown model '" + s + "' (expected sdgae, digae or mlp)");
}

DecoderKind parse_decoder(const std::string& s) {
  if (s == "inner") return DecoderKind::inner;
  if (s == "mlp_hadamard") return DecoderKind::mlp_hadamard;
  if (s == "mlp_concat") return DecoderKind::mlp_concat;
  if (s == "lr_concat") return DecoderKind::lr_concat;
  throw std::invalid_argument("unknown decoder '" + s +
                              "' (expected inner, mlp_hadamard, mlp_concat or lr_concat)");
}

void validate(const ModelSpec& s) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("model spec: " + what); };
  if (s.in_dim == 0) fail("in_dim must be positive");
  if (s.hidden == 0 || s.embedding == 0 || s.decoder_hidden == 0) fail("widths must be positive");
  if (s.mlp_layers == 0) fail("mlp_layers must be at least 1");
  if (s.k > 8) fail("k must be at most 8");
  if (s.digae_layers == 0) fail("digae_layers must be at least 1");
  if (!(s.alpha >= 0.0 && s.alpha <= 1.0) || !(s.beta >= 0.0 && s.beta <= 1.0))
    fail("alpha and beta must lie in [0, 1]");
  if (s.logits != 1 && s.logits != 2) fail("logits must be 1 or 2");
}

// ------------------------------------------------------------------ encoders

Tensor mlp_forward(const MlpWeights& w, Tensor x) {
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    x = matmul(x, w.layers[i].weight);
    if (w.layers[i].bias.valid()) x = add_bias(x, w.layers[i].bias);
    if (i + 1 < w.layers.size()) x = relu(x);
  }
  return x;
}

EncoderOutput sdgae_encode(const SdgaeParams& p, const CsrMatrix& a_norm, Tensor x) {
  if (p.gamma_s.size() != p.gamma_t.size()) throw ShapeError("sdgae_encode: gamma lengths differ");
  if (a_norm.rows() != a_norm.cols() || a_norm.rows() != x.rows())
    throw ShapeError("sdgae_encode: adjacency is " + std::to_string(a_norm.rows()) + "x" +
                     std::to_string(a_norm.cols()) + " for " + std::to_string(x.rows()) + " nodes");
  Tensor s = mlp_forward(p.mlp_s, x);
  Tensor t = mlp_forward(p.mlp_t, x);
  for (std::size_t k = 0; k < p.gamma_s.size(); ++k) {
    Tensor next_s = add(scale(spmm_const(a_norm, t), p.gamma_s[k]), s);
    Tensor next_t = add(scale(spmm_t_const(a_norm, s), p.gamma_t[k]), t);
    s = next_s;
    t = next_t;
  }
  return {s, t};
}

std::pair<std::vector<double>, std::vector<double>> expand_coefficients(
    std::span<const double> gamma_s, std::span<const double> gamma_t) {
  if (gamma_s.size() != gamma_t.size()) throw ShapeError("expand_coefficients: gamma lengths differ");
  const std::size_t k = gamma_s.size();
  std::vector<double> ws(k + 1, 0.0);
  std::vector<double> wt(k + 1, 0.0);
  ws[0] = wt[0] = 1.0;
  for (std::size_t step = 0; step < k; ++step) {
    std::vector<double> ns = ws;
    std::vector<double> nt = wt;
    for (std::size_t j = 1; j <= step + 1; ++j) {
      ns[j] += gamma_s[step] * wt[j - 1];
      nt[j] += gamma_t[step] * ws[j - 1];
    }
    ws = std::move(ns);
    wt = std::move(nt);
  }
  return {ws, wt};
}

std::pair<Matrix, Matrix> sdgae_encode_explicit(const SdgaeParams& p, const CsrMatrix& a_norm,
                                                Tensor x) {
  std::vector<double> gs;
  std::vector<double> gt;
  for (const auto& g : p.gamma_s) gs.push_back(g.value()(0, 0));
  for (const auto& g : p.gamma_t) gt.push_back(g.value()(0, 0));
  const auto [ws, wt] = expand_coefficients(gs, gt);

  // V_0 = [S0; T0], V_{k+1} = S(A) V_k = [A V_k^T ; A^T V_k^S].
  Matrix vs = mlp_forward(p.mlp_s, x).value();
  Matrix vt = mlp_forward(p.mlp_t, x).value();
  Matrix out_s(vs.rows(), vs.cols());
  Matrix out_t(vt.rows(), vt.cols());
  for (std::size_t k = 0; k < ws.size(); ++k) {
    for (std::size_t i = 0; i < out_s.size(); ++i) {
      out_s.data()[i] += ws[k] * vs.data()[i];
      out_t.data()[i] += wt[k] * vt.data()[i];
    }
    if (k + 1 == ws.size()) break;
    Matrix next_s = spmm(a_norm, vt);
    Matrix next_t = spmm_t(a_norm, vs);
    vs = std::move(next_s);
    vt = std::move(next_t);
  }
  return {std::move(out_s), std::move(out_t)};
}

EncoderOutput digae_encode(const DigaeParams& p, const CsrMatrix& n_dir, Tensor x) {
  if (p.w_s.size() != p.w_t.size() || p.w_s.empty())
    throw ShapeError("digae_encode: need matching, nonempty weight lists");
  if (n_dir.rows() != x.rows() || n_dir.cols() != x.rows())
    throw ShapeError("digae_encode: adjacency does not match feature rows");
  Tensor s = x;
  Tensor t = x;
  for (std::size_t l = 0; l < p.w_s.size(); ++l) {
    Tensor next_s = spmm_const(n_dir, matmul(t, p.w_t[l]));
    Tensor next_t = spmm_t_const(n_dir, matmul(s, p.w_s[l]));
    if (l + 1 < p.w_s.size()) {
      next_s = relu(next_s);
      next_t = relu(next_t);
    }
    s = next_s;
    t = next_t;
  }
  return {s, t};
}

EncoderOutput digae_encode_bipartite(const DigaeParams& p, const DirectedGraph& g, Tensor x) {
  if (p.w_s.size() != p.w_t.size() || p.w_s.empty())
    throw ShapeError("digae_encode_bipartite: need matching, nonempty weight lists");
  const std::size_t n = g.num_nodes();
  if (x.rows() != n) throw ShapeError("digae_encode_bipartite: feature rows do not match graph");
  const Degrees deg = degrees(g, true);
  std::vector<double> scale_vec(2 * n);
  for (std::size_t u = 0; u < n; ++u) {
    scale_vec[u] = std::pow(deg.out[u], -p.beta);
    scale_vec[n + u] = std::pow(deg.in[u], -p.alpha);
  }
  auto block = std::make_shared<const CsrMatrix>(
      bipartite_block(adjacency(g, true)).scaled(scale_vec, scale_vec));
  Tensor s = x;
  Tensor t = x;
  for (std::size_t l = 0; l < p.w_s.size(); ++l) {
    Tensor stacked = concat_rows(matmul(s, p.w_s[l]), matmul(t, p.w_t[l]));
    Tensor y = spmm_const(block, stacked);
    if (l + 1 < p.w_s.size()) y = relu(y);
    s = slice_rows(y, 0, n);
    t = slice_rows(y, n, 2 * n);
  }
  return {s, t};
}

EncoderOutput mlp_encode(const MlpWeights& w, Tensor x) {
  Tensor h = mlp_forward(w, x);
  return {h, h};
}

// ------------------------------------------------------------------ decoders

Tensor decode(const DecoderParams& p, const EncoderOutput& enc, std::span<const Edge> pairs) {
  std::vector<NodeId> src(pairs.size());
  std::vector<NodeId> dst(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    src[i] = pairs[i].src;
    dst[i] = pairs[i].dst;
  }
  Tensor su = gather_rows(enc.s, src);
  Tensor tv = gather_rows(enc.t, dst);
  switch (p.kind) {
    case DecoderKind::inner: {
      Tensor z = row_sum(hadamard(su, tv));
      if (p.logits == 1) return z;
      return concat_cols(z.tape().constant(Matrix(pairs.size(), 1)), z);
    }
    case DecoderKind::mlp_hadamard:
      return mlp_forward(p.head, hadamard(su, tv));
    case DecoderKind::mlp_concat:
    case DecoderKind::lr_concat:
      return mlp_forward(p.head, concat_cols(su, tv));
  }
  throw ShapeError("decode: unknown decoder kind");
}

double pair_score(std::span<const double> row) {
  if (row.size() == 1) return row[0];
  if (row.size() == 2) return row[1] - row[0];
  throw ShapeError("pair_score: expected 1 or 2 logits");
}

// --------------------------------------------------------------------- model

GraphContext make_context(const ModelSpec& spec, const DirectedGraph& g) {
  GraphContext ctx;
  ctx.n = g.num_nodes();
  switch (spec.encoder) {
    case EncoderKind::sdgae: ctx.propagation = normalize_sym(g); break;
    case EncoderKind::digae: ctx.propagation = normalize_directed(g, spec.alpha, spec.beta); break;
    case EncoderKind::mlp: break;
  }
  return ctx;
}

namespace {

std::vector<std::size_t> chain(std::size_t in, std::size_t hidden, std::size_t out, std::size_t layers) {
  std::vector<std::size_t> dims{in};
  for (std::size_t i = 0; i + 1 < layers; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

std::vector<std::size_t> decoder_dims(const ModelSpec& s) {
  switch (s.decoder) {
    case DecoderKind::inner: return {};
    case DecoderKind::mlp_hadamard: return {s.embedding, s.decoder_hidden, s.logits};
    case DecoderKind::mlp_concat: return {2 * s.embedding, s.decoder_hidden, s.logits};
    case DecoderKind::lr_concat: return {2 * s.embedding, s.logits};
  }
  return {};
}

}  // namespace

void Model::add(std::string name, Matrix value) {
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(spec) {
  validate(spec_);
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = dist(rng);
    return m;
  };
  auto add_mlp = [&](const std::string& prefix, const std::vector<std::size_t>& dims) {
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      add(prefix + "." + std::to_string(i) + ".weight", uniform(dims[i], dims[i + 1], dims[i]));
      add(prefix + "." + std::to_string(i) + ".bias", uniform(1, dims[i + 1], dims[i]));
    }
  };
  const auto& s = spec_;
  switch (s.encoder) {
    case EncoderKind::sdgae: {
      const auto dims = chain(s.in_dim, s.hidden, s.embedding, s.mlp_layers);
      add_mlp("mlp_s", dims);
      add_mlp("mlp_t", dims);
      for (std::size_t k = 0; k < s.k; ++k) add("gamma_s." + std::to_string(k), Matrix(1, 1, 1.0));
      for (std::size_t k = 0; k < s.k; ++k) add("gamma_t." + std::to_string(k), Matrix(1, 1, 1.0));
      break;
    }
    case EncoderKind::digae: {
      const auto dims = chain(s.in_dim, s.hidden, s.embedding, s.digae_layers);
      for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        add("digae." + std::to_string(l) + ".w_s", uniform(dims[l], dims[l + 1], dims[l]));
        add("digae." + std::to_string(l) + ".w_t", uniform(dims[l], dims[l + 1], dims[l]));
      }
      break;
    }
    case EncoderKind::mlp:
      add_mlp("mlp", chain(s.in_dim, s.hidden, s.embedding, s.mlp_layers));
      break;
  }
  add_mlp("dec", decoder_dims(s));
}

Matrix& Model::parameter(const std::string& name) {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return values_[i];
  throw std::out_of_range("no parameter named '" + name + "'");
}

Model::Bound Model::bind(Tape& tape) const {
  Bound b;
  std::map<std::string, Tensor> by_name;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    Tensor t = tape.parameter(values_[i]);
    b.all.push_back(t);
    by_name.emplace(names_[i], t);
  }
  auto find = [&](const std::string& name) {
    auto it = by_name.find(name);
    return it == by_name.end() ? Tensor() : it->second;
  };
  auto mlp = [&](const std::string& prefix) {
    MlpWeights w;
    for (std::size_t i = 0;; ++i) {
      Tensor weight = find(prefix + "." + std::to_string(i) + ".weight");
      if (!weight.valid()) break;
      w.layers.push_back({weight, find(prefix + "." + std::to_string(i) + ".bias")});
    }
    return w;
  };
  switch (spec_.encoder) {
    case EncoderKind::sdgae:
      b.sdgae.mlp_s = mlp("mlp_s");
      b.sdgae.mlp_t = mlp("mlp_t");
      for (std::size_t k = 0; k < spec_.k; ++k) {
        b.sdgae.gamma_s.push_back(find("gamma_s." + std::to_string(k)));
        b.sdgae.gamma_t.push_back(find("gamma_t." + std::to_string(k)));
      }
      break;
    case EncoderKind::digae:
      b.digae.alpha = spec_.alpha;
      b.digae.beta = spec_.beta;
      for (std::size_t l = 0; l < spec_.digae_layers; ++l) {
        b.digae.w_s.push_back(find("digae." + std::to_string(l) + ".w_s"));
        b.digae.w_t.push_back(find("digae." + std::to_string(l) + ".w_t"));
      }
      break;
    case EncoderKind::mlp:
      b.mlp = mlp("mlp");
      break;
  }
  b.decoder.kind = spec_.decoder;
  b.decoder.logits = spec_.logits;
  b.decoder.head = mlp("dec");
  return b;
}

EncoderOutput Model::encode(const Bound& b, const GraphContext& ctx, Tensor x) const {
  if (x.rows() != ctx.n) throw ShapeError("encode: feature rows do not match graph");
  if (x.cols() != spec_.in_dim)
    throw ShapeError("encode: features have " + std::to_string(x.cols()) + " columns, model expects " +
                     std::to_string(spec_.in_dim));
  switch (spec_.encoder) {
    case EncoderKind::sdgae: return sdgae_encode(b.sdgae, ctx.propagation, x);
    case EncoderKind::digae: return digae_encode(b.digae, ctx.propagation, x);
    case EncoderKind::mlp: return mlp_encode(b.mlp, x);
  }
  throw ShapeError("encode: unknown encoder kind");
}

std::pair<Matrix, Matrix> Model::embed(const GraphContext& ctx, const FeatureMatrix& x) const {
  Tape tape;
  const Bound b = bind(tape);
  const EncoderOutput out = encode(b, ctx, tape.constant_view(x));
  return {out.s.value(), out.t.value()};
}

std::vector<double> Model::score_pairs(const Matrix& s, const Matrix& t,
                                       std::span<const Edge> pairs) const {
  Tape tape;
  const Bound b = bind(tape);
  const Tensor logits = decode(b.decoder, {tape.constant_view(s), tape.constant_view(t)}, pairs);
  std::vector<double> scores(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) scores[i] = pair_score(logits.value().row(i));
  return scores;
}

std::vector<double> Model::score(const GraphContext& ctx, const FeatureMatrix& x,
                                 std::span<const Edge> pairs) const {
  const auto [s, t] = embed(ctx, x);
  return score_pairs(s, t, pairs);
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr const char* kMagic = "dirlink-checkpoint";
constexpr int kVersion = 1;

}  // namespace

void Model::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  const auto& s = spec_;
  out << kMagic << ' ' << kVersion << '\n'
      << "encoder " << to_string(s.encoder) << '\n'
      << "decoder " << to_string(s.decoder) << '\n'
      << "in_dim " << s.in_dim << '\n'
      << "hidden " << s.hidden << '\n'
      << "embedding " << s.embedding << '\n'
      << "mlp_layers " << s.mlp_layers << '\n'
      << "k " << s.k << '\n'
      << "digae_layers " << s.digae_layers << '\n';
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", s.alpha);
  out << "alpha " << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", s.beta);
  out << "beta " << buf << '\n'
      << "decoder_hidden " << s.decoder_hidden << '\n'
      << "logits " << s.logits << '\n'
      << "params " << names_.size() << '\n';
  for (std::size_t i = 0; i < names_.size(); ++i) {
    const Matrix& m = values_[i];
    out << names_[i] << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t j = 0; j < m.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m.data()[j]);
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string p = path.string();
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic)
    throw ParseError(p, 1, "not a dirlink checkpoint");
  if (version != kVersion) throw ParseError(p, 1, "unsupported checkpoint version " + std::to_string(version));

  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key) throw ParseError(p, 0, std::string("expected '") + key + "'");
  };
  auto read_size = [&](const char* key) {
    expect(key);
    std::size_t v = 0;
    if (!(in >> v)) throw ParseError(p, 0, std::string("bad value for ") + key);
    return v;
  };
  auto read_word = [&](const char* key) {
    expect(key);
    std::string v;
    if (!(in >> v)) throw ParseError(p, 0, std::string("bad value for ") + key);
    return v;
  };
  auto read_double = [&](const char* key) {
    expect(key);
    double v = 0;
    if (!(in >> v)) throw ParseError(p, 0, std::string("bad value for ") + key);
    return v;
  };

  ModelSpec s;
  try {
    s.encoder = parse_encoder(read_word("encoder"));
    s.decoder = parse_decoder(read_word("decoder"));
  } catch (const std::invalid_argument& e) {
    throw ParseError(p, 0, e.what());
  }
  s.in_dim = read_size("in_dim");
  s.hidden = read_size("hidden");
  s.embedding = read_size("embedding");
  s.mlp_layers = read_size("mlp_layers");
  s.k = read_size("k");
  s.digae_layers = read_size("digae_layers");
  s.alpha = read_double("alpha");
  s.beta = read_double("beta");
  s.decoder_hidden = read_size("decoder_hidden");
  s.logits = read_size("logits");
  Model model;
  try {
    model = Model(s, 0);
  } catch (const std::invalid_argument& e) {
    throw ParseError(p, 0, e.what());
  }
  const std::size_t count = read_size("params");
  if (count != model.names_.size())
    throw ParseError(p, 0, "checkpoint has " + std::to_string(count) + " parameters, spec implies " +
                               std::to_string(model.names_.size()));
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    if (!(in >> name >> rows >> cols)) throw ParseError(p, 0, "truncated parameter header");
    Matrix& m = model.values_[i];
    if (name != model.names_[i] || rows != m.rows() || cols != m.cols())
      throw ParseError(p, 0, "unexpected parameter '" + name + "'");
    for (auto& v : m.values())
      if (!(in >> v)) throw ParseError(p, 0, "truncated values for '" + name + "'");
  }
  return model;
}

}  // namespace dirlink
