#include "dirlink/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include "dirlink/error.hpp"

namespace dirlink {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Splits on spaces/tabs.
std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& value) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  return ec == std::errc() && ptr == end;
}

bool parse_double(std::string_view tok, double& value) {
  // from_chars for double is not available in every libstdc++ in use; strtod on a copy.
  std::string copy(tok);
  char* end = nullptr;
  value = std::strtod(copy.c_str(), &end);
  return end == copy.c_str() + copy.size() && !copy.empty();
}

}  // namespace

std::vector<Edge> read_pairs(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Edge> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto toks = tokens(body);
    if (toks.size() != 2) throw ParseError(path.string(), lineno, "expected \"u v\"");
    std::uint64_t u = 0;
    std::uint64_t v = 0;
    if (!parse_number(toks[0], u) || !parse_number(toks[1], v))
      throw ParseError(path.string(), lineno, "node ids must be nonnegative integers");
    constexpr auto limit = std::numeric_limits<NodeId>::max();
    if (u >= limit || v >= limit) throw ParseError(path.string(), lineno, "node id too large");
    pairs.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
  }
  return pairs;
}

DirectedGraph load_edge_list(const std::filesystem::path& path,
                             std::optional<std::size_t> num_nodes,
                             DirectedGraph::BuildStats* stats) {
  auto pairs = read_pairs(path);
  if (pairs.empty()) throw ParseError(path.string(), 0, "edge list is empty");
  std::size_t n = 0;
  for (const auto& e : pairs) n = std::max<std::size_t>(n, std::max(e.src, e.dst) + std::size_t{1});
  if (num_nodes) {
    if (*num_nodes < n) {
      throw DataError(path.string() + ": node count " + std::to_string(*num_nodes) +
                      " smaller than largest id + 1 = " + std::to_string(n));
    }
    n = *num_nodes;
  }
  return DirectedGraph(n, std::move(pairs), stats);
}

void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges) {
  auto out = open_output(path);
  for (const auto& e : edges) out << e.src << ' ' << e.dst << '\n';
  if (!out) throw DataError(path.string() + ": write failed");
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    while (std::getline(in, line)) {
      ++lineno;
      auto body = trim(line);
      if (!body.empty() && body.front() != '#') return body;
    }
    return std::nullopt;
  };
  auto header = next_line();
  if (!header) throw ParseError(path.string(), 0, "feature file is empty");
  auto head = tokens(*header);
  std::size_t n = 0;
  std::size_t d = 0;
  if (head.size() != 2 || !parse_number(head[0], n) || !parse_number(head[1], d))
    throw ParseError(path.string(), lineno, "expected header \"n d\"");
  FeatureMatrix f(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    auto body = next_line();
    if (!body) throw ParseError(path.string(), lineno, "expected " + std::to_string(n) + " rows");
    auto toks = tokens(*body);
    if (toks.size() != d)
      throw ParseError(path.string(), lineno, "expected " + std::to_string(d) + " values");
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      if (!parse_double(toks[c], v) || !std::isfinite(v))
        throw ParseError(path.string(), lineno, "non-finite or malformed value");
      f(r, c) = v;
    }
  }
  return f;
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& features) {
  auto out = open_output(path);
  out << features.rows() << ' ' << features.cols() << '\n';
  char buf[32];
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (std::size_t c = 0; c < features.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", features(r, c));
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace dirlink
