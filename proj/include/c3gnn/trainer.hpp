#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c3gnn/augmentation.hpp"
#include "c3gnn/contrastive.hpp"
#include "c3gnn/encoder.hpp"
#include "c3gnn/graph.hpp"
#include "c3gnn/rng.hpp"
#include "c3gnn/split.hpp"
#include "c3gnn/subclassing.hpp"

namespace c3gnn {

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 32;
    int epochs = 30;
    int warmup_epochs = 5;
    int refresh_interval = 10; // T
    double tau = 0.2;
    double beta = 1.0;
    int delta = 4;
    double augmentation_ratio = 0.2;
    // ablation switches (Table-2-style variants)
    bool hscl = true;
    bool adaptive_refresh = true;
    bool mixup = true;
    // contrastive pretrain then frozen-encoder classifier fit
    bool two_stage = false;
    uint64_t seed = 0;
    EncoderDims dims; // input_dim/num_classes filled from the dataset when 0

    void validate() const {
        if (learning_rate <= 0) throw std::invalid_argument("TrainConfig: learning_rate <= 0");
        if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size < 2");
        if (epochs <= 0) throw std::invalid_argument("TrainConfig: epochs <= 0");
        if (warmup_epochs < 0 || warmup_epochs >= epochs)
            throw std::invalid_argument("TrainConfig: need 0 <= warmup_epochs < epochs");
        if (refresh_interval < 1) throw std::invalid_argument("TrainConfig: refresh_interval < 1");
        if (tau <= 0 || beta < 0 || delta < 1)
            throw std::invalid_argument("TrainConfig: bad tau/beta/delta");
        if (!(augmentation_ratio > 0 && augmentation_ratio < 1))
            throw std::invalid_argument("TrainConfig: augmentation_ratio outside (0,1)");
    }
};

// Standard Adam with bias correction; moments mirror the canonical
// for_each_param order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

inline AdamState make_adam_state(const EncoderParams& params) {
    AdamState s;
    for_each_param(const_cast<EncoderParams&>(params), [&](const std::string&, Matrix& p) {
        s.m.push_back(Matrix::zeros(p.rows(), p.cols()));
        s.v.push_back(Matrix::zeros(p.rows(), p.cols()));
    });
    return s;
}

// One Adam update over the flat parameter list. grads[k] pairs with the k-th
// parameter in canonical order.
inline void adam_step(EncoderParams& params, const std::vector<Matrix>& grads, AdamState& state,
                      double lr) {
    size_t k = 0;
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step);
    for_each_param(params, [&](const std::string& name, Matrix& p) {
        if (k >= grads.size()) throw std::invalid_argument("adam_step: missing gradient");
        const Matrix& g = grads[k];
        if (!g.same_shape(p))
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
        Matrix& m = state.m[k];
        Matrix& v = state.v[k];
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
        ++k;
    });
    if (k != grads.size()) throw std::invalid_argument("adam_step: gradient count mismatch");
}

struct EpochMetrics {
    int epoch = 0;
    double ce = 0.0;
    double intra = 0.0;
    double inter = 0.0;
    double val_top1 = 0.0;
};

struct FitResult {
    EncoderParams params;       // best-validation checkpoint
    EncoderParams final_params; // state after the last epoch (matches the
                                // last history entry's val_top1)
    std::vector<EpochMetrics> history;
    SubclassAssignment assignment; // last assignment used
    double best_val_top1 = 0.0;
    int best_epoch = -1;
};

inline double top1_accuracy(const EncoderParams& params, const Dataset& eval_set) {
    if (eval_set.graphs.empty()) throw std::invalid_argument("top1_accuracy: empty set");
    int hits = 0;
    for (const auto& lg : eval_set.graphs) {
        const auto logits = classify_plain(params, lg.graph);
        int best = 0;
        for (size_t j = 1; j < logits.size(); ++j)
            if (logits[j] > logits[best]) best = static_cast<int>(j);
        if (best + 1 == lg.label) ++hits;
    }
    return static_cast<double>(hits) / eval_set.graphs.size();
}

namespace detail {

inline std::vector<Matrix> collect_grads(Tape& tape, const EncoderVars& vars) {
    std::vector<Matrix> grads;
    for (Var v : vars.all()) grads.push_back(tape.grad(v));
    return grads;
}

// Applies the batch augmentation kind; falls back to attribute masking when a
// graph is too small for the sampled kind.
inline Graph augment_safe(const Graph& g, AugmentationKind kind, double ratio, uint64_t seed) {
    const bool ok = (kind == AugmentationKind::AttributeMasking) ||
                    (kind == AugmentationKind::EdgePerturbation && !g.edges.empty()) ||
                    ((kind == AugmentationKind::NodeDropping || kind == AugmentationKind::Subgraph) &&
                     g.num_nodes >= 2);
    return augment(g, ok ? kind : AugmentationKind::AttributeMasking, ratio, seed);
}

// CE-only step over one batch of original graphs. Returns the loss value.
inline double supervised_step(EncoderParams& params, AdamState& adam, const Dataset& train,
                              const std::vector<int>& batch_ids, double lr,
                              bool update_encoder = true) {
    Tape tape;
    EncoderVars vars = make_vars(tape, params, true);
    std::vector<const Graph*> graphs;
    std::vector<int> labels;
    for (int id : batch_ids) {
        graphs.push_back(&train.graphs[id].graph);
        labels.push_back(train.graphs[id].label);
    }
    Var h = encode_batch(tape, vars, graphs);
    Var loss = cross_entropy(classify(tape, vars, h), labels);
    tape.backward(loss);
    auto grads = collect_grads(tape, vars);
    if (!update_encoder) {
        // two-stage classifier fit: zero everything but the classifier head
        const size_t head_start = grads.size() - 4;
        for (size_t k = 0; k < head_start; ++k)
            grads[k] = Matrix::zeros(grads[k].rows(), grads[k].cols());
    }
    adam_step(params, grads, adam, lr);
    return tape.value(loss).at(0, 0);
}

struct StepMetrics {
    double ce = 0.0, intra = 0.0, inter = 0.0;
};

// Full C3GNN step: 2B augmented views + optional mixup rows feed the
// hierarchical contrastive terms; CE runs on the B source graphs.
inline StepMetrics contrastive_step(EncoderParams& params, AdamState& adam, const Dataset& train,
                                    const SubclassAssignment& assignment,
                                    const std::vector<int>& batch_ids, const TrainConfig& cfg,
                                    Rng& step_rng) {
    Tape tape;
    EncoderVars vars = make_vars(tape, params, true);

    const AugmentationKind kind = sample_augmentation_kind(step_rng);
    std::vector<Graph> views;
    BatchLabels labels;
    labels.tau = cfg.tau;
    for (int id : batch_ids) {
        const uint64_t s1 = step_rng.next_u64();
        const uint64_t s2 = step_rng.next_u64();
        Graph v1 = augment_safe(train.graphs[id].graph, kind, cfg.augmentation_ratio, s1);
        Graph v2 = augment_safe(train.graphs[id].graph, kind, cfg.augmentation_ratio, s2);
        const auto [cls, sub] = assignment.label_of(id);
        for (Graph* g : {&v1, &v2}) {
            views.push_back(std::move(*g));
            labels.cls.push_back(cls);
            labels.sub.push_back(sub);
            labels.anchor.push_back(1);
        }
    }
    std::vector<const Graph*> view_ptrs;
    for (const Graph& g : views) view_ptrs.push_back(&g);
    Var h_views = encode_batch(tape, vars, view_ptrs);
    Var z = project(tape, vars, h_views);

    if (cfg.mixup) {
        std::vector<std::pair<int, int>> pair_labels;
        for (int i = 0; i < labels.size(); ++i)
            pair_labels.push_back({labels.cls[i], labels.sub[i]});
        const auto plans = plan_mixup(pair_labels, step_rng.next_u64());
        if (!plans.empty()) {
            Matrix combine(static_cast<int>(plans.size()), labels.size());
            for (size_t p = 0; p < plans.size(); ++p) {
                combine.at(static_cast<int>(p), plans[p].parent_i) = plans[p].alpha;
                combine.at(static_cast<int>(p), plans[p].parent_j) = 1.0 - plans[p].alpha;
                labels.cls.push_back(plans[p].cls);
                labels.sub.push_back(plans[p].subclass);
                labels.anchor.push_back(0);
            }
            Var synthetic = row_l2_normalize(matmul(tape.constant(combine), z));
            z = concat_rows(z, synthetic);
        }
    }

    // supervised term over the clean originals plus the 2B augmented views:
    // the views double as data augmentation for the classifier, the originals
    // keep it anchored on the unperturbed input distribution
    std::vector<const Graph*> orig_ptrs;
    std::vector<int> class_labels;
    for (int id : batch_ids) {
        orig_ptrs.push_back(&train.graphs[id].graph);
        class_labels.push_back(train.graphs[id].label);
    }
    class_labels.insert(class_labels.end(), labels.cls.begin(),
                        labels.cls.begin() + static_cast<long>(views.size()));
    Var h_ce = concat_rows(encode_batch(tape, vars, orig_ptrs), h_views);
    Var ce = cross_entropy(classify(tape, vars, h_ce), class_labels);

    // contrastive terms averaged per contributing anchor so they stay on the
    // same scale as the mean CE regardless of batch size
    LossResult intra = intra_loss(z, labels);
    LossResult inter = inter_loss(z, labels);
    Var intra_mean = scale(intra.loss, intra.num_contributing > 0
                                           ? 1.0 / intra.num_contributing
                                           : 0.0);
    Var inter_mean = scale(inter.loss, inter.num_contributing > 0
                                           ? 1.0 / inter.num_contributing
                                           : 0.0);
    Var total = cfg.two_stage ? intra_mean : add(ce, intra_mean);
    if (cfg.beta != 0.0) total = add(total, scale(inter_mean, cfg.beta));
    tape.backward(total);
    adam_step(params, collect_grads(tape, vars), adam, cfg.learning_rate);

    StepMetrics m;
    m.ce = tape.value(ce).at(0, 0);
    m.intra = tape.value(intra_mean).at(0, 0);
    m.inter = tape.value(inter_mean).at(0, 0);
    return m;
}

} // namespace detail

// CE-only warm-up phase (Algorithm step 2): no clustering, no contrastive
// terms. Mutates params in place and returns the per-epoch mean CE values.
inline std::vector<double> warmup(const Dataset& train, EncoderParams& params, AdamState& adam,
                                  const TrainConfig& cfg, Rng& rng) {
    std::vector<double> epoch_ce;
    for (int e = 0; e < cfg.warmup_epochs; ++e) {
        std::vector<int> order(train.graphs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        double ce_sum = 0.0;
        int batches = 0;
        for (size_t start = 0; start + cfg.batch_size <= order.size();
             start += cfg.batch_size) {
            std::vector<int> batch(order.begin() + start, order.begin() + start + cfg.batch_size);
            ce_sum += detail::supervised_step(params, adam, train, batch, cfg.learning_rate);
            ++batches;
        }
        epoch_ce.push_back(batches ? ce_sum / batches : 0.0);
    }
    return epoch_ce;
}

// One post-warm-up training epoch. The caller keeps the assignment current.
inline EpochMetrics train_epoch(const Dataset& train, EncoderParams& params,
                                const SubclassAssignment& assignment, AdamState& adam,
                                const TrainConfig& cfg, int epoch, Rng rng) {
    std::vector<int> order(train.graphs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);

    EpochMetrics metrics;
    metrics.epoch = epoch;
    int batches = 0;
    for (size_t start = 0; start + cfg.batch_size <= order.size(); start += cfg.batch_size) {
        std::vector<int> batch(order.begin() + start, order.begin() + start + cfg.batch_size);
        if (!cfg.hscl) {
            metrics.ce += detail::supervised_step(params, adam, train, batch, cfg.learning_rate);
        } else {
            Rng step_rng = rng.fork(static_cast<uint64_t>(batches));
            const auto m =
                detail::contrastive_step(params, adam, train, assignment, batch, cfg, step_rng);
            metrics.ce += m.ce;
            metrics.intra += m.intra;
            metrics.inter += m.inter;
        }
        ++batches;
    }
    if (batches > 0) {
        metrics.ce /= batches;
        metrics.intra /= batches;
        metrics.inter /= batches;
    }
    return metrics;
}

// Full Algorithm-1 pipeline: init, warm-up, periodic cluster refresh,
// contrastive epochs, best-validation selection.
inline FitResult fit(const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
    cfg.validate();
    if (train.graphs.empty()) throw std::invalid_argument("fit: empty train set");

    EncoderDims dims = cfg.dims;
    if (dims.input_dim == 0) dims.input_dim = train.feature_dim;
    if (dims.num_classes == 0) dims.num_classes = train.num_classes;
    if (dims.input_dim != train.feature_dim || dims.num_classes != train.num_classes)
        throw std::invalid_argument("fit: dims inconsistent with the dataset");

    EncoderParams params = init_params(dims, cfg.seed);
    AdamState adam = make_adam_state(params);
    Rng rng(cfg.seed ^ 0x5eedULL);

    const auto counts = train.class_counts();
    int n_min = 0;
    for (int c = 1; c <= train.num_classes; ++c)
        if (counts[c] > 0 && (n_min == 0 || counts[c] < n_min)) n_min = counts[c];
    const int cap = subclass_cap(std::max(n_min, 1), cfg.delta);

    FitResult result;
    Rng warm_rng = rng.fork(1);
    const auto warm_ce = warmup(train, params, adam, cfg, warm_rng);
    for (size_t e = 0; e < warm_ce.size(); ++e) {
        EpochMetrics m;
        m.epoch = static_cast<int>(e);
        m.ce = warm_ce[e];
        m.val_top1 = top1_accuracy(params, val);
        result.history.push_back(m);
        if (m.val_top1 > result.best_val_top1 || result.best_epoch < 0) {
            result.best_val_top1 = m.val_top1;
            result.best_epoch = m.epoch;
            result.params = params;
        }
    }

    SubclassAssignment assignment;
    Rng cluster_rng = rng.fork(2);
    Rng epoch_rng = rng.fork(3);
    bool clustered = false;
    for (int epoch = cfg.warmup_epochs; epoch < cfg.epochs; ++epoch) {
        if (cfg.hscl) {
            const int rel = epoch - cfg.warmup_epochs;
            if (!clustered) {
                assignment = compute_assignment(params, train, cap, rel, cluster_rng.next_u64());
                clustered = true;
            } else if (cfg.adaptive_refresh) {
                assignment = refresh_assignments(params, train, cap, rel, cfg.refresh_interval,
                                                 assignment, cluster_rng.next_u64());
            }
        }
        EpochMetrics m = train_epoch(train, params, assignment, adam, cfg, epoch,
                                     epoch_rng.fork(static_cast<uint64_t>(epoch)));
        m.val_top1 = top1_accuracy(params, val);
        result.history.push_back(m);
        if (m.val_top1 > result.best_val_top1 || result.best_epoch < 0) {
            result.best_val_top1 = m.val_top1;
            result.best_epoch = m.epoch;
            result.params = params;
        }
    }

    if (cfg.two_stage) {
        // frozen-encoder classifier fit on top of the final contrastive
        // representation (val selection is blind while the head is untrained)
        EncoderParams tuned = params;
        Rng stage_rng = rng.fork(4);
        const int head_epochs = std::max(5, cfg.epochs / 4);
        for (int e = 0; e < head_epochs; ++e) {
            std::vector<int> order(train.graphs.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            stage_rng.shuffle(order);
            for (size_t start = 0; start + cfg.batch_size <= order.size();
                 start += cfg.batch_size) {
                std::vector<int> batch(order.begin() + start,
                                       order.begin() + start + cfg.batch_size);
                detail::supervised_step(tuned, adam, train, batch, cfg.learning_rate,
                                        /*update_encoder=*/false);
            }
        }
        result.params = tuned;
        result.best_val_top1 = top1_accuracy(tuned, val);
        params = tuned;
    }

    result.final_params = params;
    result.assignment = assignment;
    return result;
}

// Line-delimited metric history, fixed formatting so identical runs produce
// byte-identical files.
inline void save_history(const std::string& path, const std::vector<EpochMetrics>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_history: cannot open " + path);
    out.precision(17);
    out << "# epoch ce intra inter val_top1\n";
    for (const auto& m : history)
        out << m.epoch << ' ' << m.ce << ' ' << m.intra << ' ' << m.inter << ' ' << m.val_top1
            << '\n';
}

} // namespace c3gnn
