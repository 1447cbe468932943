#include <doctest.h>

#include <set>

#include "c3gnn/augmentation.hpp"
#include "c3gnn/rng.hpp"

using namespace c3gnn;

namespace {

Graph sample_graph(int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::pair<int, int>> edges;
    for (int v = 1; v < n; ++v) edges.push_back({v - 1, v}); // path keeps it connected
    for (int u = 0; u < n; ++u)
        for (int v = u + 2; v < n; ++v)
            if (rng.uniform_real() < 0.2) edges.push_back({u, v});
    Matrix feats(n, 3);
    for (size_t i = 0; i < feats.size(); ++i) feats[i] = rng.uniform_symmetric(1.0) + 2.0;
    return make_graph(n, std::move(edges), std::move(feats));
}

bool valid_graph(const Graph& g) {
    if (g.num_nodes <= 0 || g.node_features.rows() != g.num_nodes) return false;
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : g.edges) {
        if (!(u < v) || u < 0 || v >= g.num_nodes) return false;
        if (!seen.insert({u, v}).second) return false;
    }
    return g.node_features.all_finite();
}

} // namespace

TEST_CASE("node dropping removes floor(ratio * n) nodes") {
    Graph g = sample_graph(10, 1);
    for (uint64_t seed : {0u, 1u, 2u, 3u}) {
        Graph a = augment(g, AugmentationKind::NodeDropping, 0.25, seed);
        CHECK(a.num_nodes == 8); // floor(0.25 * 10) = 2 dropped
        CHECK(valid_graph(a));
        CHECK(a.feature_dim() == 3);
    }
}

TEST_CASE("edge perturbation keeps node count, edge count and features") {
    Graph g = sample_graph(9, 2);
    const size_t m = g.edges.size();
    for (uint64_t seed : {10u, 11u, 12u}) {
        Graph a = augment(g, AugmentationKind::EdgePerturbation, 0.3, seed);
        CHECK(a.num_nodes == g.num_nodes);
        CHECK(a.edges.size() == m);
        CHECK(a.node_features == g.node_features);
        CHECK(valid_graph(a));
    }

    // near-complete graph: fewer non-edges than requested rewires, still |E| kept
    std::vector<std::pair<int, int>> dense;
    for (int u = 0; u < 5; ++u)
        for (int v = u + 1; v < 5; ++v)
            if (!(u == 0 && v == 1)) dense.push_back({u, v});
    Graph full = make_graph(5, std::move(dense), Matrix(5, 2, 1.0));
    Graph a = augment(full, AugmentationKind::EdgePerturbation, 0.9, 7);
    CHECK(a.edges.size() == full.edges.size());
}

TEST_CASE("attribute masking zeroes whole rows and nothing else") {
    Graph g = sample_graph(10, 3); // all features >= 1, so zero rows are masks
    Graph a = augment(g, AugmentationKind::AttributeMasking, 0.3, 5);
    CHECK(a.num_nodes == g.num_nodes);
    CHECK(a.edges == g.edges);

    int masked = 0;
    for (int i = 0; i < a.num_nodes; ++i) {
        bool zero = true, same = true;
        for (int j = 0; j < 3; ++j) {
            if (a.node_features.at(i, j) != 0.0) zero = false;
            if (a.node_features.at(i, j) != g.node_features.at(i, j)) same = false;
        }
        CHECK((zero || same));
        if (zero) ++masked;
    }
    CHECK(masked == 3); // floor(0.3 * 10)
}

TEST_CASE("subgraph sampling keeps ceil((1-ratio)*n) nodes and stays connected on connected input") {
    Graph g = sample_graph(12, 4);
    Graph a = augment(g, AugmentationKind::Subgraph, 0.25, 9);
    CHECK(a.num_nodes == 9); // ceil(0.75 * 12)
    CHECK(valid_graph(a));

    // input is connected (contains a path), so the walk never jumps: result connected
    std::vector<int> comp(a.num_nodes, -1);
    const auto adj = a.adjacency();
    std::vector<int> stack{0};
    comp[0] = 0;
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int nb : adj[v])
            if (comp[nb] == -1) {
                comp[nb] = 0;
                stack.push_back(nb);
            }
    }
    for (int v = 0; v < a.num_nodes; ++v) CHECK(comp[v] == 0);

    // disconnected input still reaches the target size via component jumps
    Graph two = make_graph(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}}, Matrix(6, 2, 1.0));
    Graph b = augment(two, AugmentationKind::Subgraph, 0.1, 3);
    CHECK(b.num_nodes == 6);
}

TEST_CASE("augmentations are deterministic per seed and vary across seeds") {
    Graph g = sample_graph(10, 6);
    for (AugmentationKind kind : kAllAugmentations) {
        INFO(augmentation_name(kind));
        Graph a = augment(g, kind, 0.3, 42);
        Graph b = augment(g, kind, 0.3, 42);
        CHECK(a.edges == b.edges);
        CHECK(a.node_features == b.node_features);
    }
    // across seeds, dropped node sets vary
    std::set<std::vector<std::pair<int, int>>> edge_sets;
    for (uint64_t seed = 0; seed < 8; ++seed)
        edge_sets.insert(augment(g, AugmentationKind::NodeDropping, 0.3, seed).edges);
    CHECK(edge_sets.size() > 1);
}

TEST_CASE("augment validates its inputs") {
    Graph g = sample_graph(6, 7);
    CHECK_THROWS_AS(augment(g, AugmentationKind::NodeDropping, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(augment(g, AugmentationKind::NodeDropping, 1.0, 1), std::invalid_argument);

    Graph lone = make_graph(1, {}, Matrix(1, 2, 1.0));
    CHECK_THROWS_AS(augment(lone, AugmentationKind::NodeDropping, 0.2, 1), std::invalid_argument);
    CHECK_THROWS_AS(augment(lone, AugmentationKind::EdgePerturbation, 0.2, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(augment(lone, AugmentationKind::Subgraph, 0.2, 1), std::invalid_argument);
    CHECK_NOTHROW(augment(lone, AugmentationKind::AttributeMasking, 0.2, 1));
}

TEST_CASE("sample_view_pair yields two independent views") {
    Graph g = sample_graph(10, 8);
    auto [v1, v2] = sample_view_pair(g, AugmentationKind::NodeDropping, 0.3, 77);
    CHECK(v1.num_nodes == 7);
    CHECK(v2.num_nodes == 7);

    auto [w1, w2] = sample_view_pair(g, AugmentationKind::NodeDropping, 0.3, 77);
    CHECK(v1.edges == w1.edges);
    CHECK(v2.edges == w2.edges);
    CHECK(v1.node_features == w1.node_features);

    // the kind-sampling overload is deterministic too
    auto [x1, x2] = sample_view_pair(g, 0.3, 123);
    auto [y1, y2] = sample_view_pair(g, 0.3, 123);
    CHECK(x1.edges == y1.edges);
    CHECK(x2.node_features == y2.node_features);

    // over many seeds every augmentation kind gets picked
    std::set<AugmentationKind> seen;
    Rng rng(5);
    for (int i = 0; i < 64; ++i) seen.insert(sample_augmentation_kind(rng));
    CHECK(seen.size() == 4);
}
