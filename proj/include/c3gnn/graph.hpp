#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c3gnn/matrix.hpp"

namespace c3gnn {

// Undirected attributed graph. Edges are stored normalized (u < v), sorted
// and deduplicated; node_features has one row per node.
struct Graph {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;
    Matrix node_features;

    int feature_dim() const { return node_features.cols(); }

    std::vector<std::vector<int>> adjacency() const {
        std::vector<std::vector<int>> adj(num_nodes);
        for (const auto& [u, v] : edges) {
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        return adj;
    }
};

// Normalizes (sort endpoints, drop self-loops, dedupe) and validates.
inline Graph make_graph(int num_nodes, std::vector<std::pair<int, int>> edges,
                        Matrix node_features) {
    if (num_nodes <= 0) throw std::invalid_argument("Graph: num_nodes must be positive");
    if (node_features.rows() != num_nodes)
        throw std::invalid_argument("Graph: feature row count != num_nodes");
    std::set<std::pair<int, int>> normalized;
    for (auto [u, v] : edges) {
        if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
            throw std::invalid_argument("Graph: edge endpoint out of range");
        if (u == v) throw std::invalid_argument("Graph: self-loop");
        normalized.insert({std::min(u, v), std::max(u, v)});
    }
    Graph g;
    g.num_nodes = num_nodes;
    g.edges.assign(normalized.begin(), normalized.end());
    g.node_features = std::move(node_features);
    return g;
}

// label is 1-based, in [1, K] for the owning dataset
struct LabeledGraph {
    Graph graph;
    int label = 0;
};

struct Dataset {
    std::vector<LabeledGraph> graphs;
    int num_classes = 0;
    int feature_dim = 0;

    // counts[c] for c in 1..K (index 0 unused)
    std::vector<int> class_counts() const {
        std::vector<int> counts(num_classes + 1, 0);
        for (const auto& lg : graphs) {
            if (lg.label < 1 || lg.label > num_classes)
                throw std::invalid_argument("Dataset: label out of range");
            ++counts[lg.label];
        }
        return counts;
    }
};

inline void validate_dataset(const Dataset& ds) {
    for (const auto& lg : ds.graphs) {
        if (lg.label < 1 || lg.label > ds.num_classes)
            throw std::invalid_argument("Dataset: label out of [1, K]");
        if (lg.graph.feature_dim() != ds.feature_dim)
            throw std::invalid_argument("Dataset: inconsistent feature dimension");
    }
}

// ---------------------------------------------------------------------------
// Internal serialized dataset format: versioned line-oriented text,
// round-trip stable (doubles printed with %.17g equivalent precision).
//
//   C3GNN-DATASET 1
//   <num_graphs> <num_classes> <feature_dim>
//   per graph:
//     g <label> <num_nodes> <num_edges>
//     <num_nodes feature rows>
//     <num_edges "u v" lines>
// ---------------------------------------------------------------------------

inline void write_dataset(std::ostream& out, const Dataset& ds) {
    out << "C3GNN-DATASET 1\n";
    out << ds.graphs.size() << ' ' << ds.num_classes << ' ' << ds.feature_dim << '\n';
    out.precision(17);
    for (const auto& lg : ds.graphs) {
        out << "g " << lg.label << ' ' << lg.graph.num_nodes << ' ' << lg.graph.edges.size()
            << '\n';
        for (int i = 0; i < lg.graph.num_nodes; ++i) {
            for (int j = 0; j < ds.feature_dim; ++j) {
                if (j) out << ' ';
                out << lg.graph.node_features.at(i, j);
            }
            out << '\n';
        }
        for (const auto& [u, v] : lg.graph.edges) out << u << ' ' << v << '\n';
    }
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_dataset: cannot open " + path);
    write_dataset(f, ds);
    if (!f) throw std::runtime_error("save_dataset: write failed for " + path);
}

inline Dataset read_dataset(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "C3GNN-DATASET" || version != 1)
        throw std::runtime_error("read_dataset: bad header");
    size_t n = 0;
    Dataset ds;
    if (!(in >> n >> ds.num_classes >> ds.feature_dim))
        throw std::runtime_error("read_dataset: bad counts line");
    ds.graphs.reserve(n);
    for (size_t gi = 0; gi < n; ++gi) {
        std::string tag;
        int label, nodes;
        size_t num_edges;
        if (!(in >> tag >> label >> nodes >> num_edges) || tag != "g")
            throw std::runtime_error("read_dataset: bad graph header");
        Matrix feats(nodes, ds.feature_dim);
        for (int i = 0; i < nodes; ++i)
            for (int j = 0; j < ds.feature_dim; ++j)
                if (!(in >> feats.at(i, j)))
                    throw std::runtime_error("read_dataset: truncated features");
        std::vector<std::pair<int, int>> edges(num_edges);
        for (auto& [u, v] : edges)
            if (!(in >> u >> v)) throw std::runtime_error("read_dataset: truncated edges");
        ds.graphs.push_back({make_graph(nodes, std::move(edges), std::move(feats)), label});
    }
    validate_dataset(ds);
    return ds;
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_dataset: cannot open " + path);
    return read_dataset(f);
}

} // namespace c3gnn
