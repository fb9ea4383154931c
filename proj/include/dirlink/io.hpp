#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dirlink/graph.hpp"

namespace dirlink {

/// Parses a "u v" per line edge list. Blank lines and lines starting with '#'
/// are skipped. Node count is 1 + the largest id unless `num_nodes` is given.
/// Duplicates collapse and self-loops are dropped; both are reported in `stats`.
/// Throws ParseError (with line number) on malformed lines or an empty file.
DirectedGraph load_edge_list(const std::filesystem::path& path,
                             std::optional<std::size_t> num_nodes = std::nullopt,
                             DirectedGraph::BuildStats* stats = nullptr);

/// Raw pair list, in file order, without deduplication.
std::vector<Edge> read_pairs(const std::filesystem::path& path);

void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges);

/// Feature file: header "n d" followed by n rows of d numbers.
FeatureMatrix load_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& features);

}  // namespace dirlink
