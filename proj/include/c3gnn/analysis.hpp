#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "c3gnn/encoder.hpp"
#include "c3gnn/graph.hpp"
#include "c3gnn/matrix.hpp"
#include "c3gnn/subclassing.hpp"

namespace c3gnn {

// Mean Euclidean distance from z to the members of S.
inline double set_distance(const std::vector<double>& z,
                           const std::vector<std::vector<double>>& set) {
    if (set.empty()) throw std::invalid_argument("set_distance: empty set");
    double total = 0.0;
    for (const auto& other : set) total += euclidean_distance(z, other);
    return total / set.size();
}

enum class ClassRegion { Many, Medium, Few };

inline const char* region_name(ClassRegion r) {
    switch (r) {
        case ClassRegion::Many: return "many";
        case ClassRegion::Medium: return "medium";
        case ClassRegion::Few: return "few";
    }
    return "?";
}

struct SampleDistances {
    int graph_id = 0;
    int cls = 0;
    int subclass = -1;
    double intra_class = 0.0;
    double inter_class = 0.0;
    std::optional<double> intra_subclass;
    std::optional<double> inter_subclass;
};

struct RegionSummary {
    ClassRegion region = ClassRegion::Many;
    int num_samples = 0;
    double mean_intra_class = 0.0;
    double mean_inter_class = 0.0;
    double mean_intra_subclass = 0.0; // over samples where defined
    double mean_inter_subclass = 0.0;
    int intra_subclass_count = 0;
    int inter_subclass_count = 0;
};

struct DistanceReport {
    std::vector<SampleDistances> samples;
    std::vector<RegionSummary> regions;
    std::map<int, ClassRegion> class_region;
};

namespace detail {
// classes ranked by training count, split into top/middle/bottom thirds
inline std::map<int, ClassRegion> region_partition(const std::vector<int>& train_counts,
                                                   int num_classes) {
    std::vector<int> order(num_classes);
    for (int c = 0; c < num_classes; ++c) order[c] = c + 1;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return train_counts[a] > train_counts[b]; });
    std::map<int, ClassRegion> out;
    const int n = num_classes;
    for (int r = 0; r < n; ++r) {
        ClassRegion region = (3 * r < n) ? ClassRegion::Many
                             : (3 * r < 2 * n) ? ClassRegion::Medium
                                               : ClassRegion::Few;
        out[order[r]] = region;
    }
    return out;
}

inline int nearest_center(const std::vector<double>& z,
                          const std::vector<std::vector<double>>& centers) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < centers.size(); ++c) {
        const double d = sq_dist(z, centers[c]);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}
} // namespace detail

// Per-sample intra/inter class and subclass distances over an evaluation set,
// on graph-embedding (h_G) space. Evaluation samples get a subclass by
// nearest center within their class. train_counts[c] (c in 1..K) drives the
// many/medium/few region split.
inline DistanceReport distance_report(const EncoderParams& params,
                                      const SubclassAssignment& assignment,
                                      const Dataset& eval_set,
                                      const std::vector<int>& train_counts,
                                      int num_threads = 1) {
    DistanceReport report;
    report.class_region = detail::region_partition(train_counts, eval_set.num_classes);

    const size_t n = eval_set.graphs.size();
    std::vector<std::vector<double>> emb(n);
    std::vector<int> cls(n), sub(n, 0);
    // per-sample embedding is independent work; each index is written by
    // exactly one worker, so the result is identical at any thread count
    auto embed_range = [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            emb[i] = encode_plain(params, eval_set.graphs[i].graph);
            cls[i] = eval_set.graphs[i].label;
            auto it = assignment.centers.find(cls[i]);
            sub[i] = (it == assignment.centers.end() || it->second.empty())
                         ? 0
                         : detail::nearest_center(emb[i], it->second);
        }
    };
    const size_t workers =
        std::min<size_t>(std::max(num_threads, 1), std::max<size_t>(n, 1));
    if (workers <= 1) {
        embed_range(0, n);
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (n + workers - 1) / workers;
        for (size_t w = 0; w < workers; ++w)
            pool.emplace_back(embed_range, w * chunk, std::min(n, (w + 1) * chunk));
        for (auto& t : pool) t.join();
    }

    std::map<ClassRegion, RegionSummary> summaries;
    for (ClassRegion r : {ClassRegion::Many, ClassRegion::Medium, ClassRegion::Few})
        summaries[r].region = r;

    for (size_t i = 0; i < n; ++i) {
        std::vector<std::vector<double>> same_cls, other_cls, same_sub, same_cls_other_sub;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (cls[j] == cls[i]) {
                same_cls.push_back(emb[j]);
                if (sub[j] == sub[i]) same_sub.push_back(emb[j]);
                else same_cls_other_sub.push_back(emb[j]);
            } else {
                other_cls.push_back(emb[j]);
            }
        }
        if (same_cls.empty() || other_cls.empty()) continue;

        SampleDistances s;
        s.graph_id = static_cast<int>(i);
        s.cls = cls[i];
        s.subclass = sub[i];
        s.intra_class = set_distance(emb[i], same_cls);
        s.inter_class = set_distance(emb[i], other_cls);
        if (!same_sub.empty()) s.intra_subclass = set_distance(emb[i], same_sub);
        if (!same_cls_other_sub.empty())
            s.inter_subclass = set_distance(emb[i], same_cls_other_sub);

        RegionSummary& sum = summaries[report.class_region.at(cls[i])];
        ++sum.num_samples;
        sum.mean_intra_class += s.intra_class;
        sum.mean_inter_class += s.inter_class;
        if (s.intra_subclass) {
            sum.mean_intra_subclass += *s.intra_subclass;
            ++sum.intra_subclass_count;
        }
        if (s.inter_subclass) {
            sum.mean_inter_subclass += *s.inter_subclass;
            ++sum.inter_subclass_count;
        }
        report.samples.push_back(std::move(s));
    }

    for (auto& [r, sum] : summaries) {
        if (sum.num_samples > 0) {
            sum.mean_intra_class /= sum.num_samples;
            sum.mean_inter_class /= sum.num_samples;
        }
        if (sum.intra_subclass_count > 0) sum.mean_intra_subclass /= sum.intra_subclass_count;
        if (sum.inter_subclass_count > 0) sum.mean_inter_subclass /= sum.inter_subclass_count;
        report.regions.push_back(sum);
    }
    return report;
}

inline void save_distance_report(const std::string& path, const DistanceReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_distance_report: cannot open " + path);
    out.precision(17);
    out << "# graph_id class subclass intra_class inter_class intra_subclass inter_subclass\n";
    auto opt = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string("nan");
    };
    for (const auto& s : report.samples) {
        out << s.graph_id << ' ' << s.cls << ' ' << s.subclass << ' ' << s.intra_class << ' '
            << s.inter_class << ' ' << opt(s.intra_subclass) << ' ' << opt(s.inter_subclass)
            << '\n';
    }
    out << "# region num_samples intra_class inter_class intra_subclass inter_subclass\n";
    for (const auto& r : report.regions)
        out << region_name(r.region) << ' ' << r.num_samples << ' ' << r.mean_intra_class << ' '
            << r.mean_inter_class << ' ' << r.mean_intra_subclass << ' ' << r.mean_inter_subclass
            << '\n';
}

// gnuplot-friendly binned histogram of one distance column
inline void save_distance_histogram(const std::string& path, const std::vector<double>& values,
                                    int bins = 30) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_distance_histogram: cannot open " + path);
    if (values.empty()) return;
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn_it, hi = *mx_it;
    const double width = (hi > lo) ? (hi - lo) / bins : 1.0;
    std::vector<int> counts(bins, 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / width);
        if (b >= bins) b = bins - 1;
        ++counts[b];
    }
    out << "# bin_center count\n";
    out.precision(17);
    for (int b = 0; b < bins; ++b) out << lo + (b + 0.5) * width << ' ' << counts[b] << '\n';
}

} // namespace c3gnn
