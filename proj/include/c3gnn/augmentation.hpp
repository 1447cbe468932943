#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "c3gnn/graph.hpp"
#include "c3gnn/rng.hpp"

namespace c3gnn {

enum class AugmentationKind { NodeDropping, EdgePerturbation, AttributeMasking, Subgraph };

inline constexpr AugmentationKind kAllAugmentations[] = {
    AugmentationKind::NodeDropping, AugmentationKind::EdgePerturbation,
    AugmentationKind::AttributeMasking, AugmentationKind::Subgraph};

inline const char* augmentation_name(AugmentationKind kind) {
    switch (kind) {
        case AugmentationKind::NodeDropping: return "node_dropping";
        case AugmentationKind::EdgePerturbation: return "edge_perturbation";
        case AugmentationKind::AttributeMasking: return "attribute_masking";
        case AugmentationKind::Subgraph: return "subgraph";
    }
    return "?";
}

namespace detail {

inline Graph induced_subgraph(const Graph& g, const std::vector<int>& keep_sorted) {
    std::vector<int> remap(g.num_nodes, -1);
    for (size_t i = 0; i < keep_sorted.size(); ++i) remap[keep_sorted[i]] = static_cast<int>(i);
    Matrix feats(static_cast<int>(keep_sorted.size()), g.feature_dim());
    for (size_t i = 0; i < keep_sorted.size(); ++i)
        for (int j = 0; j < g.feature_dim(); ++j)
            feats.at(static_cast<int>(i), j) = g.node_features.at(keep_sorted[i], j);
    std::vector<std::pair<int, int>> edges;
    for (const auto& [u, v] : g.edges)
        if (remap[u] >= 0 && remap[v] >= 0) edges.push_back({remap[u], remap[v]});
    return make_graph(static_cast<int>(keep_sorted.size()), std::move(edges), std::move(feats));
}

inline Graph drop_nodes(const Graph& g, double ratio, Rng& rng) {
    const int k = static_cast<int>(std::floor(ratio * g.num_nodes));
    const auto dropped = rng.sample_without_replacement(g.num_nodes, static_cast<size_t>(k));
    std::vector<char> gone(g.num_nodes, 0);
    for (size_t d : dropped) gone[d] = 1;
    std::vector<int> keep;
    for (int v = 0; v < g.num_nodes; ++v)
        if (!gone[v]) keep.push_back(v);
    return induced_subgraph(g, keep);
}

inline Graph perturb_edges(const Graph& g, double ratio, Rng& rng) {
    const size_t k = static_cast<size_t>(std::floor(ratio * g.edges.size()));
    std::set<std::pair<int, int>> present(g.edges.begin(), g.edges.end());
    std::vector<std::pair<int, int>> absent;
    for (int u = 0; u < g.num_nodes; ++u)
        for (int v = u + 1; v < g.num_nodes; ++v)
            if (!present.count({u, v})) absent.push_back({u, v});

    // remove k and add k; k capped by the available non-edges so |E| is kept
    const size_t kk = std::min(k, absent.size());
    std::vector<std::pair<int, int>> edges = g.edges;
    const auto removed = rng.sample_without_replacement(edges.size(), kk);
    std::vector<char> gone(edges.size(), 0);
    for (size_t r : removed) gone[r] = 1;
    std::vector<std::pair<int, int>> out;
    for (size_t i = 0; i < edges.size(); ++i)
        if (!gone[i]) out.push_back(edges[i]);
    const auto added = rng.sample_without_replacement(absent.size(), kk);
    for (size_t a : added) out.push_back(absent[a]);
    return make_graph(g.num_nodes, std::move(out), g.node_features);
}

inline Graph mask_attributes(const Graph& g, double ratio, Rng& rng) {
    const int k = static_cast<int>(std::floor(ratio * g.num_nodes));
    const auto masked = rng.sample_without_replacement(g.num_nodes, static_cast<size_t>(k));
    Matrix feats = g.node_features;
    for (size_t m : masked)
        for (int j = 0; j < feats.cols(); ++j) feats.at(static_cast<int>(m), j) = 0.0;
    return make_graph(g.num_nodes, g.edges, std::move(feats));
}

// Random-walk-grown connected node set of size ceil((1-ratio)*n). The walk
// restarts from a random selected node on dead ends; if the current component
// is exhausted it jumps to a fresh unselected node.
inline Graph subgraph_sample(const Graph& g, double ratio, Rng& rng) {
    const int target = static_cast<int>(std::ceil((1.0 - ratio) * g.num_nodes));
    const auto adj = g.adjacency();
    std::vector<char> selected(g.num_nodes, 0);
    std::vector<int> chosen;
    int current = static_cast<int>(rng.uniform_index(g.num_nodes));
    selected[current] = 1;
    chosen.push_back(current);
    int stalls = 0;
    while (static_cast<int>(chosen.size()) < target) {
        std::vector<int> fresh;
        for (int nb : adj[current])
            if (!selected[nb]) fresh.push_back(nb);
        if (!fresh.empty()) {
            current = fresh[rng.uniform_index(fresh.size())];
            selected[current] = 1;
            chosen.push_back(current);
            stalls = 0;
            continue;
        }
        // dead end: restart from a random selected node
        current = chosen[rng.uniform_index(chosen.size())];
        if (++stalls > static_cast<int>(chosen.size()) + 1) {
            // component exhausted; jump to an unselected node
            std::vector<int> outside;
            for (int v = 0; v < g.num_nodes; ++v)
                if (!selected[v]) outside.push_back(v);
            current = outside[rng.uniform_index(outside.size())];
            selected[current] = 1;
            chosen.push_back(current);
            stalls = 0;
        }
    }
    std::sort(chosen.begin(), chosen.end());
    return induced_subgraph(g, chosen);
}

} // namespace detail

// Stochastic augmentation, deterministic per (graph, kind, ratio, seed).
inline Graph augment(const Graph& graph, AugmentationKind kind, double ratio, uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("augment: ratio must be in (0, 1)");
    Rng rng(seed);
    switch (kind) {
        case AugmentationKind::NodeDropping:
            if (graph.num_nodes < 2)
                throw std::invalid_argument("augment: node dropping needs >= 2 nodes");
            return detail::drop_nodes(graph, ratio, rng);
        case AugmentationKind::EdgePerturbation:
            if (graph.edges.empty())
                throw std::invalid_argument("augment: edge perturbation needs >= 1 edge");
            return detail::perturb_edges(graph, ratio, rng);
        case AugmentationKind::AttributeMasking:
            return detail::mask_attributes(graph, ratio, rng);
        case AugmentationKind::Subgraph:
            if (graph.num_nodes < 2)
                throw std::invalid_argument("augment: subgraph needs >= 2 nodes");
            return detail::subgraph_sample(graph, ratio, rng);
    }
    throw std::invalid_argument("augment: unknown kind");
}

inline AugmentationKind sample_augmentation_kind(Rng& rng) {
    return kAllAugmentations[rng.uniform_index(4)];
}

// Two independently augmented views of one graph, the contrastive positive
// pair. The kind is chosen by the caller (one kind per batch step).
inline std::pair<Graph, Graph> sample_view_pair(const Graph& graph, AugmentationKind kind,
                                                double ratio, uint64_t seed) {
    Rng rng(seed);
    const uint64_t s1 = rng.next_u64();
    const uint64_t s2 = rng.next_u64();
    return {augment(graph, kind, ratio, s1), augment(graph, kind, ratio, s2)};
}

// Kind sampled uniformly from the seed, then applied twice independently.
inline std::pair<Graph, Graph> sample_view_pair(const Graph& graph, double ratio, uint64_t seed) {
    Rng rng(seed);
    const AugmentationKind kind = sample_augmentation_kind(rng);
    const uint64_t s1 = rng.next_u64();
    const uint64_t s2 = rng.next_u64();
    return {augment(graph, kind, ratio, s1), augment(graph, kind, ratio, s2)};
}

} // namespace c3gnn
