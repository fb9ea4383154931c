// Writes the bundled synthetic fixture: a seeded directed block model with
// strong block(u) -> block(u)+1 links, reduced to its largest weakly connected
// component.
#include <cstdlib>
#include <iostream>
#include <string>

#include "dirlink/graph.hpp"
#include "dirlink/io.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: gen_synthetic OUT [n] [seed] [blocks p_in p_fwd p_out]\n";
    return 1;
  }
  const std::size_t n = argc > 2 ? std::stoul(argv[2]) : 200;
  const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 2024;
  try {
    const std::size_t blocks = argc > 4 ? std::stoul(argv[4]) : 10;
    const double p_in = argc > 5 ? std::stod(argv[5]) : 0.01;
    const double p_fwd = argc > 6 ? std::stod(argv[6]) : 0.5;
    const double p_out = argc > 7 ? std::stod(argv[7]) : 0.002;
    const auto g = dirlink::generate_directed_sbm(n, blocks, p_in, p_fwd, p_out, seed);
    const auto p = dirlink::preprocess(g, std::nullopt);
    dirlink::write_edge_list(argv[1], p.graph.edges());
    const auto s = dirlink::graph_stats(p.graph);
    std::cout << "nodes=" << s.nodes << " edges=" << s.edges << " percent_directed=" << s.percent_directed << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
