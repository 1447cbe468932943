#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "c3gnn/graph.hpp"
#include "c3gnn/rng.hpp"

namespace c3gnn {

struct SplitSpec {
    double train_frac = 0.6;
    double val_frac = 0.2;
    double test_frac = 0.2;
    double imbalance_factor = 1.0;
    uint64_t seed = 0;
};

inline void validate_split_spec(const SplitSpec& spec) {
    if (spec.train_frac <= 0 || spec.val_frac <= 0 || spec.test_frac <= 0)
        throw std::invalid_argument("SplitSpec: fractions must be positive");
    if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("SplitSpec: fractions must sum to 1");
    if (spec.imbalance_factor < 1.0)
        throw std::invalid_argument("SplitSpec: imbalance factor must be >= 1");
}

namespace detail {

// Largest-remainder allocation of n items over the three split fractions.
// Ties broken by slot order (train, val, test).
inline std::array<int, 3> largest_remainder(int n, const SplitSpec& spec) {
    const double fracs[3] = {spec.train_frac, spec.val_frac, spec.test_frac};
    std::array<int, 3> counts{};
    double rema[3];
    int assigned = 0;
    for (int s = 0; s < 3; ++s) {
        const double exact = n * fracs[s];
        counts[s] = static_cast<int>(std::floor(exact));
        rema[s] = exact - counts[s];
        assigned += counts[s];
    }
    int left = n - assigned;
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return rema[a] > rema[b]; });
    for (int i = 0; i < left; ++i) ++counts[order[i]];
    return counts;
}

} // namespace detail

// Per-class proportional split, deterministic given spec.seed. Splits are
// disjoint and cover the dataset.
inline std::tuple<Dataset, Dataset, Dataset> stratified_split(const Dataset& ds,
                                                              const SplitSpec& spec) {
    validate_split_spec(spec);
    validate_dataset(ds);

    std::vector<std::vector<int>> by_class(ds.num_classes + 1);
    for (size_t i = 0; i < ds.graphs.size(); ++i)
        by_class[ds.graphs[i].label].push_back(static_cast<int>(i));

    Dataset train{{}, ds.num_classes, ds.feature_dim};
    Dataset val{{}, ds.num_classes, ds.feature_dim};
    Dataset test{{}, ds.num_classes, ds.feature_dim};

    Rng rng(spec.seed);
    for (int c = 1; c <= ds.num_classes; ++c) {
        auto& ids = by_class[c];
        if (static_cast<int>(ids.size()) < 3)
            throw std::invalid_argument("stratified_split: class " + std::to_string(c) +
                                        " has fewer graphs than split slots");
        Rng class_rng = rng.fork(static_cast<uint64_t>(c));
        class_rng.shuffle(ids);
        const auto counts = detail::largest_remainder(static_cast<int>(ids.size()), spec);
        int pos = 0;
        for (int s = 0; s < 3; ++s) {
            Dataset& target = (s == 0) ? train : (s == 1) ? val : test;
            for (int i = 0; i < counts[s]; ++i) target.graphs.push_back(ds.graphs[ids[pos++]]);
        }
    }
    return {std::move(train), std::move(val), std::move(test)};
}

// max class count / min class count
inline double imbalance_factor(const Dataset& ds) {
    const auto counts = ds.class_counts();
    int mx = 0, mn = 0;
    for (int c = 1; c <= ds.num_classes; ++c) {
        if (counts[c] == 0)
            throw std::invalid_argument("imbalance_factor: empty class " + std::to_string(c));
        if (mx == 0 || counts[c] > mx) mx = counts[c];
        if (mn == 0 || counts[c] < mn) mn = counts[c];
    }
    if (mn == 0) throw std::invalid_argument("imbalance_factor: no classes");
    return static_cast<double>(mx) / mn;
}

// Zipf-law downsampling: classes ranked by descending original size; rank j
// keeps N_j = max(1, round(N_1 * j^-gamma)) with gamma = ln(IF)/ln(K), so the
// rank-K class lands on N_1/IF before rounding. Round-half-up. Kept graphs
// are sampled without replacement, deterministically from the seed.
inline Dataset make_imbalanced(const Dataset& train, double target_if, uint64_t seed) {
    if (target_if < 1.0) throw std::invalid_argument("make_imbalanced: IF must be >= 1");
    const int k = train.num_classes;
    if (k == 1 && target_if > 1.0)
        throw std::invalid_argument("make_imbalanced: cannot imbalance a single class");
    const auto counts = train.class_counts();
    for (int c = 1; c <= k; ++c)
        if (counts[c] == 0)
            throw std::invalid_argument("make_imbalanced: empty class " + std::to_string(c));

    // classes ranked by descending size, ties by class index
    std::vector<int> ranked(k);
    for (int c = 0; c < k; ++c) ranked[c] = c + 1;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](int a, int b) { return counts[a] > counts[b]; });

    const double gamma = (target_if == 1.0 || k == 1)
                             ? 0.0
                             : std::log(target_if) / std::log(static_cast<double>(k));
    const int n1 = counts[ranked[0]];

    std::vector<std::vector<int>> by_class(k + 1);
    for (size_t i = 0; i < train.graphs.size(); ++i)
        by_class[train.graphs[i].label].push_back(static_cast<int>(i));

    Rng rng(seed);
    std::vector<char> keep(train.graphs.size(), 0);
    for (int rank = 1; rank <= k; ++rank) {
        const int c = ranked[rank - 1];
        const double exact = n1 * std::pow(static_cast<double>(rank), -gamma);
        int target = std::max(1, static_cast<int>(std::floor(exact + 0.5)));
        target = std::min(target, static_cast<int>(by_class[c].size()));
        Rng class_rng = rng.fork(static_cast<uint64_t>(rank));
        const auto picked =
            class_rng.sample_without_replacement(by_class[c].size(), static_cast<size_t>(target));
        for (size_t p : picked) keep[by_class[c][p]] = 1;
    }

    Dataset out{{}, train.num_classes, train.feature_dim};
    for (size_t i = 0; i < train.graphs.size(); ++i)
        if (keep[i]) out.graphs.push_back(train.graphs[i]);
    return out;
}

} // namespace c3gnn
