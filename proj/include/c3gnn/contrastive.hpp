#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "c3gnn/tape.hpp"

namespace c3gnn {

// Labels and anchor flags for one contrastive batch. Row i of the embedding
// matrix carries class cls[i] and subclass sub[i]; anchors are the real
// augmented views, synthetic mixup rows have anchor=false and participate
// only as candidates.
struct BatchLabels {
    std::vector<int> cls;
    std::vector<int> sub;
    std::vector<char> anchor;
    double tau = 0.2;

    int size() const { return static_cast<int>(cls.size()); }

    void validate() const {
        if (cls.size() != sub.size() || cls.size() != anchor.size())
            throw std::invalid_argument("BatchLabels: inconsistent sizes");
        if (tau <= 0.0) throw std::invalid_argument("BatchLabels: tau must be positive");
    }
};

struct IndexSets {
    std::vector<int> all;       // A(i) = everyone but i
    std::vector<int> same_cls;  // P(i)
    std::vector<int> same_sub;  // Q(i), a subset of P(i)
};

inline IndexSets index_sets(const BatchLabels& batch, int i) {
    batch.validate();
    if (i < 0 || i >= batch.size()) throw std::invalid_argument("index_sets: index out of range");
    if (!batch.anchor[i]) throw std::invalid_argument("index_sets: not an anchor");
    IndexSets s;
    for (int j = 0; j < batch.size(); ++j) {
        if (j == i) continue;
        s.all.push_back(j);
        if (batch.cls[j] == batch.cls[i]) {
            s.same_cls.push_back(j);
            if (batch.sub[j] == batch.sub[i]) s.same_sub.push_back(j);
        }
    }
    return s;
}

struct LossResult {
    Var loss;                       // scalar sum over contributing anchors
    std::vector<double> per_anchor; // indexed by batch row; 0 for skipped rows
    int num_contributing = 0;
};

namespace detail {

// Shared core of both losses. For each anchor the per-anchor term is
//   lse_i - (1/|pos_i|) * sum_{j in pos_i} s_ij
// with lse over the anchor's candidate set. Anchors without positives (and
// non-anchor rows) are masked out of both the value and the gradient.
inline LossResult pairwise_loss(Var z, const BatchLabels& batch, bool exclude_same_subclass) {
    batch.validate();
    Tape& tape = *z.tape;
    const Matrix& zv = tape.value(z);
    const int n = zv.rows();
    if (n != batch.size()) throw std::invalid_argument("loss: embedding/label size mismatch");
    if (n < 2) throw std::invalid_argument("loss: batch needs at least 2 elements");

    Matrix candidate_mask(n, n);
    Matrix positive_weight(n, n);
    Matrix active(n, 1);
    int contributing = 0;
    for (int i = 0; i < n; ++i) {
        if (!batch.anchor[i]) {
            candidate_mask.at(i, i) = 1.0; // placeholder so the lse row is nonempty
            continue;
        }
        int num_pos = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const bool same_sub =
                batch.cls[j] == batch.cls[i] && batch.sub[j] == batch.sub[i];
            const bool candidate = exclude_same_subclass ? !same_sub : true;
            if (candidate) candidate_mask.at(i, j) = 1.0;
            const bool positive = exclude_same_subclass
                                      ? (batch.cls[j] == batch.cls[i] && !same_sub)
                                      : same_sub;
            if (positive) {
                positive_weight.at(i, j) = 1.0;
                ++num_pos;
            }
        }
        if (num_pos == 0) continue; // contributes 0, stays inactive
        for (int j = 0; j < n; ++j)
            if (positive_weight.at(i, j) != 0.0) positive_weight.at(i, j) = 1.0 / num_pos;
        active.at(i, 0) = 1.0;
        ++contributing;
    }
    // inactive rows may have empty candidate sets; give them a valid lse row
    // (their value and gradient are zeroed by the active gate)
    for (int i = 0; i < n; ++i) {
        bool any = false;
        for (int j = 0; j < n; ++j) any = any || candidate_mask.at(i, j) != 0.0;
        if (!any) candidate_mask.at(i, i) = 1.0;
    }

    Var sims = scale(matmul_nt(z, z), 1.0 / batch.tau);
    Var lse = masked_log_sum_exp_rows(sims, candidate_mask);
    Var mean_pos = row_sum(hadamard_const(sims, positive_weight));
    Var per_anchor = add(lse, scale(mean_pos, -1.0));  // n x 1
    Var gated = hadamard_const(per_anchor, active);
    Var total = sum(gated);

    LossResult result;
    result.loss = total;
    result.num_contributing = contributing;
    result.per_anchor.resize(n, 0.0);
    const Matrix& gv = tape.value(gated);
    for (int i = 0; i < n; ++i) result.per_anchor[i] = gv.at(i, 0);
    return result;
}

} // namespace detail

// Intra-subclass supervised contrastive loss: positives Q(i) (same subclass),
// denominator over A(i). Sum over anchors with |Q(i)| > 0.
inline LossResult intra_loss(Var z, const BatchLabels& batch) {
    return detail::pairwise_loss(z, batch, /*exclude_same_subclass=*/false);
}

// Inter-subclass loss: positives P(i)\Q(i) (same class, different subclass),
// denominator over A(i)\Q(i). Anchors with P(i) = Q(i) contribute 0.
inline LossResult inter_loss(Var z, const BatchLabels& batch) {
    return detail::pairwise_loss(z, batch, /*exclude_same_subclass=*/true);
}

// Mean stabilized cross-entropy over the batch; labels are 1-based.
inline Var cross_entropy(Var logits, const std::vector<int>& labels) {
    Tape& tape = *logits.tape;
    const Matrix& lv = tape.value(logits);
    if (static_cast<int>(labels.size()) != lv.rows())
        throw std::invalid_argument("cross_entropy: label count mismatch");
    if (labels.empty()) throw std::invalid_argument("cross_entropy: empty batch");
    Matrix one_hot(lv.rows(), lv.cols());
    for (int i = 0; i < lv.rows(); ++i) {
        const int label = labels[i];
        if (label < 1 || label > lv.cols())
            throw std::invalid_argument("cross_entropy: label out of [1, K]");
        one_hot.at(i, label - 1) = 1.0;
    }
    Var lse = log_sum_exp_rows(logits);                    // n x 1
    Var picked = row_sum(hadamard_const(logits, one_hot)); // n x 1
    return scale(sum(add(lse, scale(picked, -1.0))), 1.0 / static_cast<double>(labels.size()));
}

// Ablation switches for the joint objective.
struct LossFlags {
    bool hscl = true;  // include the two contrastive terms at all
    double beta = 1.0; // weight of the inter-subclass term
};

// L = L_CE + sum_i (L_i_intra + beta * L_i_inter); with hscl off the loss is
// the plain supervised term.
inline Var joint_loss(Var contrastive_z, const BatchLabels& batch, Var logits,
                      const std::vector<int>& labels, const LossFlags& flags) {
    Var ce = cross_entropy(logits, labels);
    if (!flags.hscl) return ce;
    if (flags.beta < 0.0) throw std::invalid_argument("joint_loss: beta must be >= 0");
    Var total = add(ce, intra_loss(contrastive_z, batch).loss);
    if (flags.beta != 0.0)
        total = add(total, scale(inter_loss(contrastive_z, batch).loss, flags.beta));
    return total;
}

} // namespace c3gnn
