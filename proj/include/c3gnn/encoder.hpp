#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "c3gnn/graph.hpp"
#include "c3gnn/rng.hpp"
#include "c3gnn/tape.hpp"

namespace c3gnn {

// One message-passing layer:
//   h_v = ReLU(h_v W_self + mean_{u in N(v)} h_u W_neigh + bias)
// Isolated nodes use a zero neighbor mean.
struct SageLayer {
    Matrix w_self;  // d_in x d_out
    Matrix w_neigh; // d_in x d_out
    Matrix bias;    // 1 x d_out
};

// 2-layer MLP head: ReLU between the layers, no output activation.
struct MlpHead {
    Matrix w1, b1;
    Matrix w2, b2;
};

struct EncoderDims {
    int input_dim = 0;
    int hidden_dim = 64;
    int embed_dim = 64;      // D, graph embedding
    int contrastive_dim = 32;
    int num_classes = 0;
    int num_layers = 2;
};

struct EncoderParams {
    EncoderDims dims;
    std::vector<SageLayer> layers;
    MlpHead projection; // embed_dim -> embed_dim -> contrastive_dim
    MlpHead classifier; // embed_dim -> embed_dim -> num_classes
};

// Visits every learnable matrix with a stable name; the iteration order is
// the canonical parameter order used by the optimizer and the checkpoint.
template <typename P, typename Fn>
void for_each_param(P& params, Fn&& fn) {
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const std::string p = "sage" + std::to_string(l) + ".";
        fn(p + "w_self", params.layers[l].w_self);
        fn(p + "w_neigh", params.layers[l].w_neigh);
        fn(p + "bias", params.layers[l].bias);
    }
    fn("projection.w1", params.projection.w1);
    fn("projection.b1", params.projection.b1);
    fn("projection.w2", params.projection.w2);
    fn("projection.b2", params.projection.b2);
    fn("classifier.w1", params.classifier.w1);
    fn("classifier.b1", params.classifier.b1);
    fn("classifier.w2", params.classifier.w2);
    fn("classifier.b2", params.classifier.b2);
}

namespace detail {
inline Matrix glorot(int fan_in, int fan_out, Rng& rng) {
    if (fan_in <= 0 || fan_out <= 0)
        throw std::invalid_argument("init_params: nonpositive dimension");
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform_symmetric(a);
    return m;
}
} // namespace detail

// Glorot-uniform weights, zero biases, deterministic per seed.
inline EncoderParams init_params(const EncoderDims& dims, uint64_t seed) {
    if (dims.input_dim <= 0 || dims.hidden_dim <= 0 || dims.embed_dim <= 0 ||
        dims.contrastive_dim <= 0 || dims.num_classes <= 0 || dims.num_layers <= 0)
        throw std::invalid_argument("init_params: nonpositive dimension");
    Rng rng(seed);
    EncoderParams p;
    p.dims = dims;
    int d_in = dims.input_dim;
    for (int l = 0; l < dims.num_layers; ++l) {
        const int d_out = (l == dims.num_layers - 1) ? dims.embed_dim : dims.hidden_dim;
        SageLayer layer;
        layer.w_self = detail::glorot(d_in, d_out, rng);
        layer.w_neigh = detail::glorot(d_in, d_out, rng);
        layer.bias = Matrix(1, d_out);
        p.layers.push_back(std::move(layer));
        d_in = d_out;
    }
    p.projection.w1 = detail::glorot(dims.embed_dim, dims.embed_dim, rng);
    p.projection.b1 = Matrix(1, dims.embed_dim);
    p.projection.w2 = detail::glorot(dims.embed_dim, dims.contrastive_dim, rng);
    p.projection.b2 = Matrix(1, dims.contrastive_dim);
    p.classifier.w1 = detail::glorot(dims.embed_dim, dims.embed_dim, rng);
    p.classifier.b1 = Matrix(1, dims.embed_dim);
    p.classifier.w2 = detail::glorot(dims.embed_dim, dims.num_classes, rng);
    p.classifier.b2 = Matrix(1, dims.num_classes);
    return p;
}

// Tape-resident mirror of EncoderParams; created once per tape so every
// forward pass in a step shares the same leaves.
struct EncoderVars {
    struct LayerVars {
        Var w_self, w_neigh, bias;
    };
    struct HeadVars {
        Var w1, b1, w2, b2;
    };
    EncoderDims dims;
    std::vector<LayerVars> layers;
    HeadVars projection;
    HeadVars classifier;

    std::vector<Var> all() const {
        std::vector<Var> out;
        for (const auto& l : layers) {
            out.push_back(l.w_self);
            out.push_back(l.w_neigh);
            out.push_back(l.bias);
        }
        for (const auto& h : {projection, classifier}) {
            out.push_back(h.w1);
            out.push_back(h.b1);
            out.push_back(h.w2);
            out.push_back(h.b2);
        }
        return out;
    }
};

inline EncoderVars make_vars(Tape& tape, const EncoderParams& params, bool requires_grad = true) {
    EncoderVars v;
    v.dims = params.dims;
    for (const auto& l : params.layers)
        v.layers.push_back({tape.leaf(l.w_self, requires_grad), tape.leaf(l.w_neigh, requires_grad),
                            tape.leaf(l.bias, requires_grad)});
    v.projection = {tape.leaf(params.projection.w1, requires_grad),
                    tape.leaf(params.projection.b1, requires_grad),
                    tape.leaf(params.projection.w2, requires_grad),
                    tape.leaf(params.projection.b2, requires_grad)};
    v.classifier = {tape.leaf(params.classifier.w1, requires_grad),
                    tape.leaf(params.classifier.b1, requires_grad),
                    tape.leaf(params.classifier.w2, requires_grad),
                    tape.leaf(params.classifier.b2, requires_grad)};
    return v;
}

namespace detail {
// Row-normalized neighbor-mean operator; rows of isolated nodes stay zero.
inline Matrix neighbor_mean_operator(const Graph& g) {
    Matrix op(g.num_nodes, g.num_nodes);
    std::vector<int> deg(g.num_nodes, 0);
    for (const auto& [u, v] : g.edges) {
        ++deg[u];
        ++deg[v];
    }
    for (const auto& [u, v] : g.edges) {
        op.at(u, v) = 1.0 / deg[u];
        op.at(v, u) = 1.0 / deg[v];
    }
    return op;
}

inline Var mlp_forward(const EncoderVars::HeadVars& h, Var x) {
    Var hidden = relu(add(matmul(x, h.w1), h.b1));
    return add(matmul(hidden, h.w2), h.b2);
}
} // namespace detail

// Mean-aggregation GraphSAGE forward + mean readout; returns a 1 x D row.
inline Var encode(Tape& tape, const EncoderVars& vars, const Graph& graph) {
    if (graph.num_nodes == 0) throw std::invalid_argument("encode: empty graph");
    if (graph.feature_dim() != vars.dims.input_dim)
        throw std::invalid_argument("encode: feature dimension mismatch");
    Var h = tape.constant(graph.node_features);
    Var agg_op = tape.constant(detail::neighbor_mean_operator(graph));
    for (const auto& layer : vars.layers) {
        Var self_term = matmul(h, layer.w_self);
        Var neigh_term = matmul(matmul(agg_op, h), layer.w_neigh);
        h = relu(add(add(self_term, neigh_term), layer.bias));
    }
    return mean_rows(h);
}

// Stacks per-graph embeddings into a (batch x D) matrix.
inline Var encode_batch(Tape& tape, const EncoderVars& vars, std::span<const Graph* const> graphs) {
    if (graphs.empty()) throw std::invalid_argument("encode_batch: empty batch");
    Var out = encode(tape, vars, *graphs[0]);
    for (size_t i = 1; i < graphs.size(); ++i)
        out = concat_rows(out, encode(tape, vars, *graphs[i]));
    return out;
}

// 2-layer MLP + row L2 normalization; rows of the result are unit vectors.
inline Var project(Tape&, const EncoderVars& vars, Var h_g) {
    return row_l2_normalize(detail::mlp_forward(vars.projection, h_g));
}

// K unnormalized logits per row.
inline Var classify(Tape&, const EncoderVars& vars, Var h_g) {
    return detail::mlp_forward(vars.classifier, h_g);
}

// Convenience non-differentiating paths ------------------------------------

inline std::vector<double> encode_plain(const EncoderParams& params, const Graph& graph) {
    Tape tape;
    EncoderVars vars = make_vars(tape, params, false);
    Var h = encode(tape, vars, graph);
    return tape.value(h).row(0);
}

inline std::vector<double> classify_plain(const EncoderParams& params, const Graph& graph) {
    Tape tape;
    EncoderVars vars = make_vars(tape, params, false);
    Var logits = classify(tape, vars, encode(tape, vars, graph));
    return tape.value(logits).row(0);
}

// ---------------------------------------------------------------------------
// Checkpoint format (binary, little-endian):
//   magic "C3CK", u32 version=1, u32 array count, then per array:
//   u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64 values.
// ---------------------------------------------------------------------------

namespace detail {
inline void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}
inline uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
inline void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}
inline double read_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}
} // namespace detail

inline void save_checkpoint(const std::string& path, const EncoderParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write("C3CK", 4);
    detail::write_u32(out, 1);

    // dims header so a checkpoint is self-describing
    detail::write_u32(out, static_cast<uint32_t>(params.dims.input_dim));
    detail::write_u32(out, static_cast<uint32_t>(params.dims.hidden_dim));
    detail::write_u32(out, static_cast<uint32_t>(params.dims.embed_dim));
    detail::write_u32(out, static_cast<uint32_t>(params.dims.contrastive_dim));
    detail::write_u32(out, static_cast<uint32_t>(params.dims.num_classes));
    detail::write_u32(out, static_cast<uint32_t>(params.dims.num_layers));

    uint32_t count = 0;
    for_each_param(const_cast<EncoderParams&>(params), [&](const std::string&, Matrix&) { ++count; });
    detail::write_u32(out, count);
    for_each_param(const_cast<EncoderParams&>(params), [&](const std::string& name, Matrix& m) {
        detail::write_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(out, static_cast<uint32_t>(m.rows()));
        detail::write_u32(out, static_cast<uint32_t>(m.cols()));
        for (size_t i = 0; i < m.size(); ++i) detail::write_f64(out, m[i]);
    });
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline EncoderParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "C3CK")
        throw std::runtime_error("load_checkpoint: bad magic");
    if (detail::read_u32(in) != 1) throw std::runtime_error("load_checkpoint: bad version");

    EncoderDims dims;
    dims.input_dim = static_cast<int>(detail::read_u32(in));
    dims.hidden_dim = static_cast<int>(detail::read_u32(in));
    dims.embed_dim = static_cast<int>(detail::read_u32(in));
    dims.contrastive_dim = static_cast<int>(detail::read_u32(in));
    dims.num_classes = static_cast<int>(detail::read_u32(in));
    dims.num_layers = static_cast<int>(detail::read_u32(in));

    EncoderParams params = init_params(dims, 0);
    const uint32_t count = detail::read_u32(in);
    std::map<std::string, Matrix> arrays;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = detail::read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const int rows = static_cast<int>(detail::read_u32(in));
        const int cols = static_cast<int>(detail::read_u32(in));
        Matrix m(rows, cols);
        for (size_t j = 0; j < m.size(); ++j) m[j] = detail::read_f64(in);
        arrays.emplace(std::move(name), std::move(m));
    }
    for_each_param(params, [&](const std::string& name, Matrix& m) {
        auto it = arrays.find(name);
        if (it == arrays.end())
            throw std::runtime_error("load_checkpoint: missing array " + name);
        if (!it->second.same_shape(m))
            throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
        m = std::move(it->second);
    });
    return params;
}

} // namespace c3gnn
