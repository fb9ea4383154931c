#include "dirlink/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dirlink/error.hpp"

namespace dirlink {

const char* to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::original: return "original";
    case FeatureMode::degrees: return "degrees";
    case FeatureMode::random: return "random";
  }
  return "?";
}

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "original") return FeatureMode::original;
  if (s == "degrees") return FeatureMode::degrees;
  if (s == "random") return FeatureMode::random;
  throw std::invalid_argument("unknown feature mode '" + s + "' (expected original, degrees or random)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list element in '" + s + "'");
    out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("expected a nonnegative integer, got '" + s + "'");
  return v;
}

std::size_t parse_size(const std::string& s) { return static_cast<std::size_t>(parse_u64(s)); }

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& s, F f) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) out.push_back(f(item));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + std::string(f(xs[i]));
  return out;
}

}  // namespace

void set_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "dataset") c.dataset = v;
  else if (key == "feature_file") c.feature_file = v;
  else if (key == "features") c.features = parse_feature_mode(v);
  else if (key == "random_dim") c.random_dim = parse_size(v);
  else if (key == "model") c.models = parse_list<EncoderKind>(v, parse_encoder);
  else if (key == "decoder") c.decoders = parse_list<DecoderKind>(v, parse_decoder);
  else if (key == "hidden") c.hidden = parse_size(v);
  else if (key == "embedding") c.embedding = parse_size(v);
  else if (key == "mlp_layers") c.mlp_layers = parse_list<std::size_t>(v, parse_size);
  else if (key == "k") c.k = parse_list<std::size_t>(v, parse_size);
  else if (key == "digae_layers") c.digae_layers = parse_list<std::size_t>(v, parse_size);
  else if (key == "alpha") c.alpha = parse_list<double>(v, parse_double);
  else if (key == "beta") c.beta = parse_list<double>(v, parse_double);
  else if (key == "decoder_hidden") c.decoder_hidden = parse_size(v);
  else if (key == "loss") c.losses = parse_list<LossKind>(v, parse_loss);
  else if (key == "lr") c.lr = parse_list<double>(v, parse_double);
  else if (key == "wd") c.wd = parse_list<double>(v, parse_double);
  else if (key == "max_epochs") c.max_epochs = parse_size(v);
  else if (key == "patience") c.patience = parse_size(v);
  else if (key == "negatives") c.negatives = parse_negatives(v);
  else if (key == "seeds") c.seeds = parse_list<std::uint64_t>(v, parse_u64);
  else if (key == "out") c.out = v;
  else if (key == "workers") c.workers = parse_size(v);
  else throw std::invalid_argument("unknown key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> sections = {
      {"data", {"dataset", "feature_file", "features", "random_dim"}},
      {"model", {"model", "decoder", "hidden", "embedding", "mlp_layers", "k", "digae_layers", "alpha",
                 "beta", "decoder_hidden"}},
      {"training", {"loss", "lr", "wd", "max_epochs", "patience", "negatives"}},
      {"run", {"seeds", "out", "workers"}},
  };
  ExperimentConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(origin, line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& s : sections) known = known || s.first == section;
      if (!known) throw ParseError(origin, line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(origin, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!section.empty()) {
      for (const auto& s : sections) {
        if (s.first != section) continue;
        if (std::find(s.second.begin(), s.second.end(), key) == s.second.end())
          throw ParseError(origin, line_no, "key '" + key + "' does not belong to [" + section + "]");
      }
    }
    try {
      set_value(cfg, key, line.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw ParseError(origin, line_no, e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize(const ExperimentConfig& c) {
  auto sz = [](std::size_t v) { return std::to_string(v); };
  auto u64 = [](std::uint64_t v) { return std::to_string(v); };
  std::ostringstream out;
  out << "[data]\n";
  if (!c.dataset.empty()) out << "dataset = " << c.dataset << '\n';
  if (!c.feature_file.empty()) out << "feature_file = " << c.feature_file << '\n';
  out << "features = " << to_string(c.features) << '\n'
      << "random_dim = " << c.random_dim << "\n\n"
      << "[model]\n"
      << "model = " << join(c.models, [](EncoderKind k) { return to_string(k); }) << '\n'
      << "decoder = " << join(c.decoders, [](DecoderKind k) { return to_string(k); }) << '\n'
      << "hidden = " << c.hidden << '\n'
      << "embedding = " << c.embedding << '\n'
      << "mlp_layers = " << join(c.mlp_layers, sz) << '\n'
      << "k = " << join(c.k, sz) << '\n'
      << "digae_layers = " << join(c.digae_layers, sz) << '\n'
      << "alpha = " << join(c.alpha, fmt) << '\n'
      << "beta = " << join(c.beta, fmt) << '\n'
      << "decoder_hidden = " << c.decoder_hidden << "\n\n"
      << "[training]\n"
      << "loss = " << join(c.losses, [](LossKind k) { return to_string(k); }) << '\n'
      << "lr = " << join(c.lr, fmt) << '\n'
      << "wd = " << join(c.wd, fmt) << '\n'
      << "max_epochs = " << c.max_epochs << '\n'
      << "patience = " << c.patience << '\n'
      << "negatives = " << to_string(c.negatives) << "\n\n"
      << "[run]\n"
      << "seeds = " << join(c.seeds, u64) << '\n'
      << "out = " << c.out << '\n'
      << "workers = " << c.workers << '\n';
  return out.str();
}

std::vector<TrainConfig> expand_grid(const ExperimentConfig& c) {
  std::vector<TrainConfig> out;
  for (EncoderKind enc : c.models) {
    // Propagation settings that do not apply to this encoder collapse to one value.
    const std::vector<std::size_t> ks = enc == EncoderKind::sdgae ? c.k : std::vector<std::size_t>{c.k.front()};
    const std::vector<std::size_t> mls =
        enc == EncoderKind::digae ? std::vector<std::size_t>{c.mlp_layers.front()} : c.mlp_layers;
    const bool dg = enc == EncoderKind::digae;
    const auto dls = dg ? c.digae_layers : std::vector<std::size_t>{c.digae_layers.front()};
    const auto as = dg ? c.alpha : std::vector<double>{c.alpha.front()};
    const auto bs = dg ? c.beta : std::vector<double>{c.beta.front()};
    for (DecoderKind dec : c.decoders)
      for (std::size_t ml : mls)
        for (std::size_t k : ks)
          for (std::size_t dl : dls)
            for (double a : as)
              for (double b : bs)
                for (LossKind loss : c.losses)
                  for (double lr : c.lr)
                    for (double wd : c.wd) {
                      TrainConfig t;
                      t.model.encoder = enc;
                      t.model.decoder = dec;
                      t.model.hidden = c.hidden;
                      t.model.embedding = c.embedding;
                      t.model.mlp_layers = ml;
                      t.model.k = k;
                      t.model.digae_layers = dl;
                      t.model.alpha = a;
                      t.model.beta = b;
                      t.model.decoder_hidden = c.decoder_hidden;
                      t.model.logits = loss == LossKind::ce ? 2 : 1;
                      t.loss = loss;
                      t.lr = lr;
                      t.wd = wd;
                      t.max_epochs = c.max_epochs;
                      t.patience = c.patience;
                      t.negatives = c.negatives;
                      out.push_back(t);
                    }
  }
  return out;
}

std::vector<std::uint64_t> default_seeds(std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = i;
  return out;
}

}  // namespace dirlink
