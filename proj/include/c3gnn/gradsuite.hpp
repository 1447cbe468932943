#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "c3gnn/contrastive.hpp"
#include "c3gnn/encoder.hpp"
#include "c3gnn/gradcheck.hpp"

namespace c3gnn {

// The standard gradient-check suite: encode∘project∘intra_loss,
// encode∘project∘inter_loss and encode∘classify∘cross_entropy on a random
// 8-graph batch, differentiated with respect to every model parameter.

struct GradSuiteResult {
    struct Entry {
        std::string name;
        double max_rel_error = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_error = 0.0;
    double seconds = 0.0;
    bool passed = false;
};

namespace detail {

// Leaf layout shared by the suite functions: per layer (w_self, w_neigh,
// bias), then projection (w1,b1,w2,b2), then classifier (w1,b1,w2,b2).
inline std::vector<Matrix> flatten_params(const EncoderParams& p) {
    std::vector<Matrix> out;
    for (const auto& l : p.layers) {
        out.push_back(l.w_self);
        out.push_back(l.w_neigh);
        out.push_back(l.bias);
    }
    for (const MlpHead* h : {&p.projection, &p.classifier}) {
        out.push_back(h->w1);
        out.push_back(h->b1);
        out.push_back(h->w2);
        out.push_back(h->b2);
    }
    return out;
}

inline EncoderVars vars_from_leaves(const EncoderDims& dims, const std::vector<Var>& in) {
    EncoderVars vars;
    vars.dims = dims;
    size_t k = 0;
    for (int l = 0; l < dims.num_layers; ++l) {
        Var a = in[k++], b = in[k++], c = in[k++];
        vars.layers.push_back({a, b, c});
    }
    vars.projection = {in[k], in[k + 1], in[k + 2], in[k + 3]};
    k += 4;
    vars.classifier = {in[k], in[k + 1], in[k + 2], in[k + 3]};
    return vars;
}

inline Graph gradsuite_graph(int n, int feature_dim, Rng& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (rng.uniform_real() < 0.4) edges.push_back({u, v});
    if (edges.empty()) edges.push_back({0, 1});
    // strictly positive features keep relu embeddings away from dead rows,
    // which the projection's row normalization rejects
    Matrix feats(n, feature_dim);
    for (size_t i = 0; i < feats.size(); ++i) feats[i] = 0.2 + rng.uniform_real();
    return make_graph(n, std::move(edges), std::move(feats));
}

} // namespace detail

inline GradSuiteResult run_gradient_suite(double step = 1e-6, double tol = 1e-4) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(31);
    const EncoderDims dims{3, 4, 4, 3, 2, 2};
    EncoderParams params = init_params(dims, 17);
    // positive biases keep every relu channel alive under the random leaves
    for (SageLayer& l : params.layers)
        for (size_t i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.3;
    for (size_t i = 0; i < params.projection.b1.size(); ++i) params.projection.b1[i] = 0.3;
    for (size_t i = 0; i < params.projection.b2.size(); ++i) params.projection.b2[i] = 0.1;

    std::vector<Graph> graphs;
    for (int i = 0; i < 8; ++i)
        graphs.push_back(
            detail::gradsuite_graph(6 + static_cast<int>(rng.uniform_index(7)), 3, rng));
    std::vector<const Graph*> ptrs;
    for (const Graph& g : graphs) ptrs.push_back(&g);

    BatchLabels labels;
    labels.tau = 0.2;
    labels.cls = {1, 1, 1, 1, 2, 2, 2, 2};
    labels.sub = {0, 0, 1, 1, 0, 0, 1, 1};
    labels.anchor.assign(8, 1);

    auto through = [&](auto head) {
        return [&, head](Tape& t, const std::vector<Var>& in) {
            EncoderVars vars = detail::vars_from_leaves(dims, in);
            return head(t, vars, encode_batch(t, vars, ptrs));
        };
    };
    const std::vector<std::pair<std::string, TensorFunction>> suite{
        {"encode.project.intra_loss", through([&](Tape& t, const EncoderVars& v, Var h) {
             return intra_loss(project(t, v, h), labels).loss;
         })},
        {"encode.project.inter_loss", through([&](Tape& t, const EncoderVars& v, Var h) {
             return inter_loss(project(t, v, h), labels).loss;
         })},
        {"encode.classify.cross_entropy", through([&](Tape& t, const EncoderVars& v, Var h) {
             return cross_entropy(classify(t, v, h), labels.cls);
         })}};

    GradSuiteResult result;
    for (const auto& [name, f] : suite) {
        const GradCheckReport r = grad_check(f, detail::flatten_params(params), step, tol);
        result.entries.push_back({name, r.max_rel_error});
        result.max_rel_error = std::max(result.max_rel_error, r.max_rel_error);
    }
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.passed = result.max_rel_error <= tol;
    return result;
}

} // namespace c3gnn
