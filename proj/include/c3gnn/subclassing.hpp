#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c3gnn/encoder.hpp"
#include "c3gnn/graph.hpp"
#include "c3gnn/matrix.hpp"
#include "c3gnn/rng.hpp"

namespace c3gnn {

// M = max(n_K, delta): subclass size cap, where n_K is the smallest class
// count and delta guards against excessively small clusters.
inline int subclass_cap(int n_k, int delta) {
    if (n_k < 1 || delta < 1) throw std::invalid_argument("subclass_cap: nonpositive input");
    return std::max(n_k, delta);
}

struct ClassPartition {
    std::vector<int> labels; // subclass index per input point, 0-based
    std::vector<std::vector<double>> centers;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Greedy capacity-respecting assignment: points are processed in ascending
// order of distance to their nearest center with remaining capacity. Since
// (k-1)*M < N, every cluster ends nonempty.
inline std::vector<int> capped_assign(const std::vector<std::vector<double>>& points,
                                      const std::vector<std::vector<double>>& centers, int cap) {
    const size_t n = points.size();
    const size_t k = centers.size();
    std::vector<int> assign(n, -1);
    std::vector<int> remaining(k, cap);

    struct Cand {
        double dist;
        size_t point;
        size_t center;
    };
    // lazy best-candidate queue: recompute a point's best center when its
    // cached choice has filled up
    std::vector<Cand> heap;
    auto best_for = [&](size_t p) -> Cand {
        double bd = std::numeric_limits<double>::infinity();
        size_t bc = 0;
        for (size_t c = 0; c < k; ++c) {
            if (remaining[c] <= 0) continue;
            const double d = sq_dist(points[p], centers[c]);
            if (d < bd || (d == bd && c < bc)) {
                bd = d;
                bc = c;
            }
        }
        return {bd, p, bc};
    };
    auto cmp = [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist > b.dist; // min-heap by distance
        return a.point > b.point;
    };
    for (size_t p = 0; p < n; ++p) heap.push_back(best_for(p));
    std::make_heap(heap.begin(), heap.end(), cmp);
    size_t placed = 0;
    while (placed < n) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        Cand c = heap.back();
        heap.pop_back();
        if (assign[c.point] >= 0) continue;
        if (remaining[c.center] <= 0) {
            heap.push_back(best_for(c.point));
            std::push_heap(heap.begin(), heap.end(), cmp);
            continue;
        }
        assign[c.point] = static_cast<int>(c.center);
        --remaining[c.center];
        ++placed;
    }
    return assign;
}

inline std::vector<std::vector<double>> recompute_centers(
    const std::vector<std::vector<double>>& points, const std::vector<int>& assign, size_t k) {
    const size_t dim = points[0].size();
    std::vector<std::vector<double>> centers(k, std::vector<double>(dim, 0.0));
    std::vector<int> counts(k, 0);
    for (size_t p = 0; p < points.size(); ++p) {
        ++counts[assign[p]];
        for (size_t d = 0; d < dim; ++d) centers[assign[p]][d] += points[p][d];
    }
    for (size_t c = 0; c < k; ++c)
        if (counts[c] > 0)
            for (size_t d = 0; d < dim; ++d) centers[c][d] /= counts[c];
    return centers;
}

inline double total_sse(const std::vector<std::vector<double>>& points,
                        const std::vector<int>& assign,
                        const std::vector<std::vector<double>>& centers) {
    double s = 0.0;
    for (size_t p = 0; p < points.size(); ++p) s += sq_dist(points[p], centers[assign[p]]);
    return s;
}

// k-means++ seeding, deterministic per rng state
inline std::vector<std::vector<double>> kmeanspp_init(
    const std::vector<std::vector<double>>& points, size_t k, Rng& rng) {
    std::vector<std::vector<double>> centers;
    centers.push_back(points[rng.uniform_index(points.size())]);
    std::vector<double> d2(points.size());
    while (centers.size() < k) {
        double total = 0.0;
        for (size_t p = 0; p < points.size(); ++p) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, sq_dist(points[p], c));
            d2[p] = best;
            total += best;
        }
        size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_index(points.size()); // all points coincide
        } else {
            double r = rng.uniform_real() * total;
            pick = points.size() - 1;
            for (size_t p = 0; p < points.size(); ++p) {
                r -= d2[p];
                if (r <= 0.0) {
                    pick = p;
                    break;
                }
            }
        }
        centers.push_back(points[pick]);
    }
    return centers;
}

} // namespace detail

// Capped k-means over one class's embeddings with k = ceil(N_c / M). Lloyd
// iterations with greedy capacity-constrained assignment; stops when the
// assignment stabilizes, SSE would increase, or after 100 rounds. Classes
// with N_c <= M are returned as a single subclass.
inline ClassPartition partition_class(const std::vector<std::vector<double>>& embeddings, int cap,
                                      uint64_t seed) {
    if (embeddings.empty()) throw std::invalid_argument("partition_class: no points");
    if (cap < 1) throw std::invalid_argument("partition_class: cap must be >= 1");
    const size_t n = embeddings.size();
    const size_t dim = embeddings[0].size();
    for (const auto& e : embeddings)
        if (e.size() != dim) throw std::invalid_argument("partition_class: ragged embeddings");

    ClassPartition part;
    if (n <= static_cast<size_t>(cap)) {
        part.labels.assign(n, 0);
        part.centers = detail::recompute_centers(embeddings, part.labels, 1);
        return part;
    }

    const size_t k = (n + cap - 1) / cap;
    Rng rng(seed);
    auto centers = detail::kmeanspp_init(embeddings, k, rng);
    std::vector<int> assign = detail::capped_assign(embeddings, centers, cap);
    centers = detail::recompute_centers(embeddings, assign, k);
    double sse = detail::total_sse(embeddings, assign, centers);

    for (int round = 0; round < 100; ++round) {
        auto next_assign = detail::capped_assign(embeddings, centers, cap);
        if (next_assign == assign) break;
        auto next_centers = detail::recompute_centers(embeddings, next_assign, k);
        const double next_sse = detail::total_sse(embeddings, next_assign, next_centers);
        if (next_sse > sse + 1e-12) break; // keep the better previous state
        assign = std::move(next_assign);
        centers = std::move(next_centers);
        sse = next_sse;
    }
    part.labels = std::move(assign);
    part.centers = std::move(centers);
    return part;
}

// Per-training-graph (class, subclass) labels plus per-class centers in
// graph-embedding space. Immutable between refreshes.
struct SubclassAssignment {
    // graph index in the train set -> (class, subclass)
    std::vector<std::pair<int, int>> omega;
    // centers[c] for class c in 1..K
    std::map<int, std::vector<std::vector<double>>> centers;
    int epoch_stamp = -1;

    std::pair<int, int> label_of(int graph_id) const {
        if (graph_id < 0 || graph_id >= static_cast<int>(omega.size()))
            throw std::invalid_argument("SubclassAssignment: unknown graph id");
        return omega[graph_id];
    }

    int num_subclasses(int cls) const {
        auto it = centers.find(cls);
        return it == centers.end() ? 0 : static_cast<int>(it->second.size());
    }
};

// Clusters every class of the train set on current graph embeddings h_G.
inline SubclassAssignment compute_assignment(const EncoderParams& params, const Dataset& train,
                                             int cap, int epoch, uint64_t seed) {
    SubclassAssignment out;
    out.epoch_stamp = epoch;
    out.omega.assign(train.graphs.size(), {0, 0});

    std::vector<std::vector<int>> by_class(train.num_classes + 1);
    for (size_t i = 0; i < train.graphs.size(); ++i)
        by_class[train.graphs[i].label].push_back(static_cast<int>(i));

    Rng rng(seed);
    for (int c = 1; c <= train.num_classes; ++c) {
        const auto& ids = by_class[c];
        if (ids.empty()) continue;
        std::vector<std::vector<double>> embeddings;
        embeddings.reserve(ids.size());
        for (int id : ids) embeddings.push_back(encode_plain(params, train.graphs[id].graph));
        const auto part = partition_class(embeddings, cap, rng.fork(static_cast<uint64_t>(c)).next_u64());
        for (size_t j = 0; j < ids.size(); ++j) out.omega[ids[j]] = {c, part.labels[j]};
        out.centers[c] = part.centers;
    }
    return out;
}

// Algorithm schedule: refresh only when epoch is a multiple of T, otherwise
// the previous assignment is returned untouched.
inline SubclassAssignment refresh_assignments(const EncoderParams& params, const Dataset& train,
                                              int cap, int epoch, int interval,
                                              const SubclassAssignment& prev, uint64_t seed) {
    if (interval < 1) throw std::invalid_argument("refresh_assignments: T must be >= 1");
    if (epoch % interval != 0) return prev;
    return compute_assignment(params, train, cap, epoch, seed);
}

inline void save_assignment(const std::string& path, const SubclassAssignment& a) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_assignment: cannot open " + path);
    out << "# graph_id class subclass\n";
    for (size_t i = 0; i < a.omega.size(); ++i)
        out << i << ' ' << a.omega[i].first << ' ' << a.omega[i].second << '\n';
}

// ---------------------------------------------------------------------------
// Subclass mixup
// ---------------------------------------------------------------------------

struct MixupSample {
    std::vector<double> embedding;
    int cls = 0;
    int subclass = 0;
    double alpha = 0.0;
};

// alpha * z_i + (1 - alpha) * z_j; parents must share (class, subclass).
inline MixupSample mixup_interpolate(const std::vector<double>& z_i, const std::vector<double>& z_j,
                                     int cls, int subclass_i, int subclass_j, double alpha) {
    if (z_i.size() != z_j.size()) throw std::invalid_argument("mixup: dimension mismatch");
    if (subclass_i != subclass_j)
        throw std::invalid_argument("mixup: parents from different subclasses");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("mixup: alpha outside [0, 1]");
    MixupSample s;
    s.embedding.resize(z_i.size());
    for (size_t d = 0; d < z_i.size(); ++d)
        s.embedding[d] = alpha * z_i[d] + (1.0 - alpha) * z_j[d];
    s.cls = cls;
    s.subclass = subclass_i;
    s.alpha = alpha;
    return s;
}

// One planned synthetic sample: parent rows i, j in the batch and the mixing
// ratio. Shared by the plain and the differentiable mixup paths.
struct MixupPlan {
    int parent_i = 0;
    int parent_j = 0;
    double alpha = 0.0;
    int cls = 0;
    int subclass = 0;
};

// For every (class, subclass) with >= 2 members in the batch, draws one
// random member pair and alpha ~ U[0,1]. Deterministic per seed.
inline std::vector<MixupPlan> plan_mixup(const std::vector<std::pair<int, int>>& batch_labels,
                                         uint64_t seed) {
    std::map<std::pair<int, int>, std::vector<int>> groups;
    for (size_t i = 0; i < batch_labels.size(); ++i)
        groups[batch_labels[i]].push_back(static_cast<int>(i));
    Rng rng(seed);
    std::vector<MixupPlan> plans;
    for (const auto& [key, members] : groups) {
        if (members.size() < 2) continue;
        const size_t a = rng.uniform_index(members.size());
        size_t b = rng.uniform_index(members.size() - 1);
        if (b >= a) ++b;
        MixupPlan plan;
        plan.parent_i = members[a];
        plan.parent_j = members[b];
        plan.alpha = rng.uniform_real();
        plan.cls = key.first;
        plan.subclass = key.second;
        plans.push_back(plan);
    }
    return plans;
}

// Plain (non-differentiable) synthesis over already-projected embeddings;
// results are re-normalized to unit length.
inline std::vector<MixupSample> synthesize_batch_samples(
    const std::vector<std::vector<double>>& embeddings,
    const std::vector<std::pair<int, int>>& batch_labels, uint64_t seed) {
    if (embeddings.size() != batch_labels.size())
        throw std::invalid_argument("synthesize_batch_samples: label count mismatch");
    std::vector<MixupSample> out;
    for (const MixupPlan& p : plan_mixup(batch_labels, seed)) {
        MixupSample s = mixup_interpolate(embeddings[p.parent_i], embeddings[p.parent_j], p.cls,
                                          p.subclass, p.subclass, p.alpha);
        const double norm = l2_norm(s.embedding);
        if (norm < 1e-12) continue; // opposite parents cancelled out
        for (double& v : s.embedding) v /= norm;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace c3gnn
