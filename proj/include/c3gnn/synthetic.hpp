#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "c3gnn/graph.hpp"
#include "c3gnn/rng.hpp"

namespace c3gnn {

// Synthetic 4-class benchmark: class k is a graph with k hubs. Each hub owns
// a group of leaves and consecutive hubs are chained together. The degree
// one-hot is capped at 2, so hubs (degree >= 5) and "confuser" nodes
// (leaf-leaf edges give some leaves degree 2) land in the same bin: the raw
// degree histogram alone cannot count hubs, the model has to look at the
// neighborhood (a hub's neighbors are mostly leaves, a confuser's are not).
// Confuser counts and per-node noise channels vary freely within a class, so
// they are shortcuts that fail on fresh samples.

inline constexpr int kBenchmarkFeatureDim = 6; // degree one-hot (3) + 3 noise dims

namespace detail {

// Degree one-hot capped at 2 plus per-node random noise channels. The noise
// carries no class signal; it is there so memorization can hurt.
inline Matrix benchmark_features(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                                 Rng& rng) {
    std::vector<int> deg(num_nodes, 0);
    for (const auto& [u, v] : edges) {
        ++deg[u];
        ++deg[v];
    }
    Matrix feats(num_nodes, kBenchmarkFeatureDim);
    for (int v = 0; v < num_nodes; ++v) {
        feats.at(v, std::min(deg[v], 2)) = 1.0;
        for (int j = 3; j < kBenchmarkFeatureDim; ++j)
            feats.at(v, j) = rng.uniform_symmetric(1.0);
    }
    return feats;
}

inline Graph finish_motif(int n, std::vector<std::pair<int, int>> edges, Rng& rng) {
    // deduplicate before deriving degrees
    Graph tmp = make_graph(n, edges, Matrix(n, kBenchmarkFeatureDim));
    return make_graph(n, tmp.edges, benchmark_features(n, tmp.edges, rng));
}

} // namespace detail

inline Graph make_motif_graph(int cls, int variant, Rng& rng) {
    if (cls < 1 || cls > 4) throw std::invalid_argument("make_motif_graph: class out of range");
    const int hubs = cls;
    const int n = 18 + static_cast<int>(rng.uniform_index(7));

    // hand each hub a floor of 3 leaves, then spread the rest: evenly for
    // variant 0, piled onto the first hub for variant 1
    std::vector<int> owner(n, 0);
    int next = hubs;
    for (int h = 0; h < hubs; ++h)
        for (int i = 0; i < 3; ++i) owner[next++] = h;
    while (next < n) {
        const int h = variant == 0 ? static_cast<int>(rng.uniform_index(hubs))
                                   : (rng.uniform_index(3) == 0
                                          ? static_cast<int>(rng.uniform_index(hubs))
                                          : 0);
        owner[next++] = h;
    }

    std::vector<std::pair<int, int>> edges;
    for (int h = 1; h < hubs; ++h) edges.push_back({h - 1, h});
    for (int v = hubs; v < n; ++v) edges.push_back({owner[v], v});

    // leaf-leaf edges create degree-2 confusers that share the hub bin
    const int confusers = static_cast<int>(rng.uniform_index(7));
    for (int c = 0; c < confusers; ++c) {
        const int a = hubs + static_cast<int>(rng.uniform_index(n - hubs));
        const int b = hubs + static_cast<int>(rng.uniform_index(n - hubs));
        if (a != b) edges.push_back({std::min(a, b), std::max(a, b)});
    }
    return detail::finish_motif(n, std::move(edges), rng);
}

// Balanced dataset of `per_class` graphs for each of the 4 motif classes,
// alternating the two variants.
inline Dataset make_benchmark_dataset(int per_class, uint64_t seed) {
    Dataset ds;
    ds.num_classes = 4;
    ds.feature_dim = kBenchmarkFeatureDim;
    Rng rng(seed);
    for (int cls = 1; cls <= 4; ++cls) {
        Rng class_rng = rng.fork(static_cast<uint64_t>(cls));
        for (int i = 0; i < per_class; ++i)
            ds.graphs.push_back({make_motif_graph(cls, i % 2, class_rng), cls});
    }
    return ds;
}

} // namespace c3gnn
