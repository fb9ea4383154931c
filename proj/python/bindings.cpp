#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dirlink/analysis.hpp"
#include "dirlink/cli.hpp"
#include "dirlink/error.hpp"
#include "dirlink/graph.hpp"
#include "dirlink/io.hpp"
#include "dirlink/metrics.hpp"
#include "dirlink/models.hpp"
#include "dirlink/splits.hpp"
#include "dirlink/training.hpp"

namespace py = pybind11;
using namespace dirlink;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data(), m.data() + m.size(), a.mutable_data());
  return a;
}

std::vector<Edge> to_edges(const std::vector<std::pair<NodeId, NodeId>>& pairs) {
  std::vector<Edge> out;
  out.reserve(pairs.size());
  for (auto [u, v] : pairs) out.push_back({u, v});
  return out;
}

std::vector<std::pair<NodeId, NodeId>> to_pairs(std::span<const Edge> edges) {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.emplace_back(e.src, e.dst);
  return out;
}

Holdout parse_holdout(const std::string& s) {
  for (auto h : {Holdout::val_pos, Holdout::val_neg, Holdout::test_pos, Holdout::test_neg})
    if (s == to_string(h)) return h;
  throw std::invalid_argument("unknown held-out list '" + s + "'");
}

py::dict metrics_dict(const MetricsReport& r) {
  py::dict d;
  const auto v = as_vector(r);
  for (std::size_t i = 0; i < v.size(); ++i) d[kMetricNames[i]] = v[i];
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Directed link prediction: graphs, splits, encoders, training and metrics.";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::class_<DirectedGraph>(m, "DirectedGraph")
      .def(py::init([](std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) {
             return DirectedGraph(n, to_edges(edges));
           }),
           py::arg("n"), py::arg("edges"))
      .def_property_readonly("num_nodes", &DirectedGraph::num_nodes)
      .def_property_readonly("num_edges", &DirectedGraph::num_edges)
      .def("edges", [](const DirectedGraph& g) { return to_pairs(g.edges()); })
      .def("has_edge", &DirectedGraph::has_edge)
      .def("__repr__", [](const DirectedGraph& g) {
        return "DirectedGraph(n=" + std::to_string(g.num_nodes()) + ", m=" + std::to_string(g.num_edges()) + ")";
      });

  m.def("load_edge_list", [](const std::filesystem::path& p) { return load_edge_list(p); }, py::arg("path"));
  m.def("preprocess", [](const DirectedGraph& g) {
    auto p = preprocess(g, std::nullopt);
    return py::make_tuple(p.graph, p.original_id);
  });
  m.def("graph_stats", [](const DirectedGraph& g) {
    const auto s = graph_stats(g);
    py::dict d;
    d["nodes"] = s.nodes;
    d["edges"] = s.edges;
    d["avg_degree"] = s.avg_degree;
    d["percent_directed"] = s.percent_directed;
    return d;
  });
  m.def("is_weakly_connected", &is_weakly_connected);
  m.def("normalize_sym", [](const DirectedGraph& g) { return to_array(normalize_sym(g).to_dense()); },
        "Dense D_out^-1/2 (A+I) D_in^-1/2.");
  m.def("normalize_directed",
        [](const DirectedGraph& g, double alpha, double beta) {
          return to_array(normalize_directed(g, alpha, beta).to_dense());
        },
        py::arg("graph"), py::arg("alpha"), py::arg("beta"));

  py::class_<SplitBundle>(m, "SplitBundle")
      .def_property_readonly("seed", &SplitBundle::seed)
      .def_property_readonly("train_graph", &SplitBundle::train_graph)
      .def("held_out", [](const SplitBundle& b, const std::string& which) {
        return to_pairs(b.held_out(parse_holdout(which)));
      });
  m.def("split_edges", [](const DirectedGraph& g, std::uint64_t seed) { return split_edges(g, seed); },
        py::arg("graph"), py::arg("seed"));
  m.def("audit_split", &audit_split);
  m.def("random_features",
        [](const DirectedGraph& g, std::size_t dim, std::uint64_t seed) {
          return to_array(init_features({FeatureMode::random, dim, seed}, g, std::nullopt));
        },
        py::arg("graph"), py::arg("dim"), py::arg("seed"));
  m.def("degree_features", [](const DirectedGraph& g) {
    return to_array(init_features({FeatureMode::degrees, 0, 0}, g, std::nullopt));
  });

  m.def("expand_coefficients", [](const std::vector<double>& gs, const std::vector<double>& gt) {
    return expand_coefficients(gs, gt);
  });

  m.def("hits_at_k", [](const std::vector<double>& p, const std::vector<double>& n, std::size_t k) {
    return hits_at_k(p, n, k);
  });
  m.def("mrr", [](const std::vector<double>& p, const std::vector<double>& n) { return mrr(p, n); });
  m.def("auc", [](const std::vector<double>& p, const std::vector<double>& n) { return auc(p, n); });
  m.def("average_precision",
        [](const std::vector<double>& p, const std::vector<double>& n) { return average_precision(p, n); });
  m.def("compute_metrics", [](const std::vector<double>& p, const std::vector<double>& n) {
    return metrics_dict(compute_metrics(p, n));
  });

  m.def(
      "train",
      [](const SplitBundle& bundle, const Array& features, const std::string& encoder, const std::string& decoder,
         const std::string& loss, std::size_t k, double lr, std::size_t max_epochs, std::size_t patience,
         std::uint64_t seed) {
        TrainConfig cfg;
        cfg.model.encoder = parse_encoder(encoder);
        cfg.model.decoder = parse_decoder(decoder);
        cfg.model.k = k;
        cfg.loss = parse_loss(loss);
        cfg.lr = lr;
        cfg.max_epochs = max_epochs;
        cfg.patience = patience;
        cfg.seed = seed;
        const Matrix x = to_matrix(features);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_split(cfg, bundle, x);
        }
        py::dict d;
        d["test"] = metrics_dict(r.test);
        d["best_epoch"] = r.best_epoch;
        d["best_val"] = r.best_val;
        py::list losses;
        for (const auto& e : r.history) losses.append(e.loss);
        d["loss"] = losses;
        return d;
      },
      py::arg("bundle"), py::arg("features"), py::arg("encoder") = "sdgae", py::arg("decoder") = "inner",
      py::arg("loss") = "bce", py::arg("k") = 5, py::arg("lr") = 0.01, py::arg("max_epochs") = 2000,
      py::arg("patience") = 200, py::arg("seed") = 0);

  m.def(
      "check_expressiveness",
      [](const DirectedGraph& g, const std::string& mode, const std::string& decoder, std::size_t dim,
         std::size_t attempts, std::uint64_t seed) {
        ExpressivenessOptions opt;
        opt.seed = seed;
        const auto c = check_expressiveness(g, parse_mode(mode), parse_decoder(decoder), dim, attempts, opt);
        py::dict d;
        d["verdict"] = to_string(c.verdict);
        d["reason"] = c.reason;
        d["margin"] = c.margin;
        d["cycle"] = c.cycle;
        if (c.witness) {
          d["s"] = to_array(c.witness->s);
          d["t"] = to_array(c.witness->t);
        }
        return d;
      },
      py::arg("graph"), py::arg("mode") = "single", py::arg("decoder") = "lr_concat", py::arg("dim") = 2,
      py::arg("attempts") = 50, py::arg("seed") = 0);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
