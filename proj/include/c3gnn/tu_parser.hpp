#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "c3gnn/graph.hpp"

namespace c3gnn {

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("parse_tu_dataset: missing file " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        // strip trailing CR and skip blank lines
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline std::vector<double> split_csv(const std::string& line, const std::string& path) {
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            vals.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw std::runtime_error("parse_tu_dataset: bad number '" + tok + "' in " + path);
        }
    }
    return vals;
}

} // namespace detail

// Reads a TU-style benchmark directory: <name>_A.txt (1-based comma-separated
// edge list), <name>_graph_indicator.txt, <name>_graph_labels.txt and at least
// one of <name>_node_attributes.txt / <name>_node_labels.txt. Attributes take
// precedence over labels when both exist; node labels are one-hot encoded.
// Class labels are remapped to contiguous [1, K].
inline Dataset parse_tu_dataset(const std::string& directory, const std::string& name) {
    namespace fs = std::filesystem;
    const std::string prefix = (fs::path(directory) / name).string() + "_";

    const auto indicator_lines = detail::read_lines(prefix + "graph_indicator.txt");
    const auto label_lines = detail::read_lines(prefix + "graph_labels.txt");
    const auto edge_lines = detail::read_lines(prefix + "A.txt");

    const int total_nodes = static_cast<int>(indicator_lines.size());
    const int num_graphs = static_cast<int>(label_lines.size());
    if (num_graphs == 0) throw std::runtime_error("parse_tu_dataset: no graphs");

    // node -> graph (both 0-based internally)
    std::vector<int> node_graph(total_nodes);
    std::vector<int> graph_size(num_graphs, 0);
    for (int i = 0; i < total_nodes; ++i) {
        const int g = static_cast<int>(detail::split_csv(indicator_lines[i], "indicator")[0]) - 1;
        if (g < 0 || g >= num_graphs)
            throw std::runtime_error("parse_tu_dataset: indicator references unknown graph");
        node_graph[i] = g;
        ++graph_size[g];
    }
    for (int g = 0; g < num_graphs; ++g)
        if (graph_size[g] == 0)
            throw std::runtime_error("parse_tu_dataset: graph " + std::to_string(g + 1) +
                                     " has zero nodes");

    // local node index within its graph
    std::vector<int> node_local(total_nodes);
    {
        std::vector<int> next(num_graphs, 0);
        for (int i = 0; i < total_nodes; ++i) node_local[i] = next[node_graph[i]]++;
    }

    // node features: attributes preferred, else one-hot node labels
    Matrix all_features;
    const std::string attr_path = prefix + "node_attributes.txt";
    const std::string nlabel_path = prefix + "node_labels.txt";
    if (fs::exists(attr_path)) {
        const auto lines = detail::read_lines(attr_path);
        if (static_cast<int>(lines.size()) != total_nodes)
            throw std::runtime_error("parse_tu_dataset: attribute count != node count");
        const auto first = detail::split_csv(lines[0], attr_path);
        all_features = Matrix(total_nodes, static_cast<int>(first.size()));
        for (int i = 0; i < total_nodes; ++i) {
            const auto vals = detail::split_csv(lines[i], attr_path);
            if (static_cast<int>(vals.size()) != all_features.cols())
                throw std::runtime_error("parse_tu_dataset: inconsistent attribute dimension");
            for (int j = 0; j < all_features.cols(); ++j) all_features.at(i, j) = vals[j];
        }
    } else if (fs::exists(nlabel_path)) {
        const auto lines = detail::read_lines(nlabel_path);
        if (static_cast<int>(lines.size()) != total_nodes)
            throw std::runtime_error("parse_tu_dataset: node label count != node count");
        std::vector<int> raw(total_nodes);
        std::map<int, int> remap;
        for (int i = 0; i < total_nodes; ++i) {
            raw[i] = static_cast<int>(detail::split_csv(lines[i], nlabel_path)[0]);
            remap.emplace(raw[i], 0);
        }
        int next = 0;
        for (auto& [k, v] : remap) v = next++;
        all_features = Matrix(total_nodes, next);
        for (int i = 0; i < total_nodes; ++i) all_features.at(i, remap.at(raw[i])) = 1.0;
    } else {
        throw std::runtime_error("parse_tu_dataset: neither node_attributes nor node_labels found");
    }

    // edges, checked against the indicator
    std::vector<std::vector<std::pair<int, int>>> graph_edges(num_graphs);
    for (const auto& line : edge_lines) {
        const auto vals = detail::split_csv(line, prefix + "A.txt");
        if (vals.size() != 2) throw std::runtime_error("parse_tu_dataset: malformed edge line");
        const int u = static_cast<int>(vals[0]) - 1;
        const int v = static_cast<int>(vals[1]) - 1;
        if (u < 0 || u >= total_nodes || v < 0 || v >= total_nodes)
            throw std::runtime_error("parse_tu_dataset: edge references unknown node");
        if (node_graph[u] != node_graph[v])
            throw std::runtime_error("parse_tu_dataset: cross-graph edge");
        if (u == v) continue; // self-loops dropped
        graph_edges[node_graph[u]].push_back({node_local[u], node_local[v]});
    }

    // class labels remapped to contiguous [1, K]
    std::vector<int> raw_labels(num_graphs);
    std::map<int, int> class_remap;
    for (int g = 0; g < num_graphs; ++g) {
        raw_labels[g] = static_cast<int>(detail::split_csv(label_lines[g], prefix + "graph_labels.txt")[0]);
        class_remap.emplace(raw_labels[g], 0);
    }
    int next_class = 1;
    for (auto& [k, v] : class_remap) v = next_class++;

    Dataset ds;
    ds.num_classes = next_class - 1;
    ds.feature_dim = all_features.cols();
    std::vector<Matrix> feats(num_graphs);
    for (int g = 0; g < num_graphs; ++g) feats[g] = Matrix(graph_size[g], ds.feature_dim);
    for (int i = 0; i < total_nodes; ++i)
        for (int j = 0; j < ds.feature_dim; ++j)
            feats[node_graph[i]].at(node_local[i], j) = all_features.at(i, j);

    for (int g = 0; g < num_graphs; ++g) {
        ds.graphs.push_back({make_graph(graph_size[g], std::move(graph_edges[g]),
                                        std::move(feats[g])),
                             class_remap.at(raw_labels[g])});
    }
    validate_dataset(ds);
    return ds;
}

} // namespace c3gnn
