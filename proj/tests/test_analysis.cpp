#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "c3gnn/analysis.hpp"
#include "c3gnn/rng.hpp"

using namespace c3gnn;

namespace {

Dataset toy_dataset(const std::vector<int>& class_sizes, uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.num_classes = static_cast<int>(class_sizes.size());
    ds.feature_dim = 3;
    for (int c = 1; c <= ds.num_classes; ++c) {
        for (int i = 0; i < class_sizes[c - 1]; ++i) {
            Matrix feats(4, 3);
            for (size_t j = 0; j < feats.size(); ++j)
                feats[j] = rng.uniform_symmetric(0.5) + 1.5 * c;
            ds.graphs.push_back({make_graph(4, {{0, 1}, {1, 2}, {2, 3}}, std::move(feats)), c});
        }
    }
    return ds;
}

std::string file_contents(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("set_distance is the mean Euclidean distance") {
    CHECK(set_distance({0.0, 0.0}, {{3.0, 4.0}}) == doctest::Approx(5.0));
    CHECK(set_distance({0.0, 0.0}, {{3.0, 4.0}, {0.0, 0.0}}) == doctest::Approx(2.5));
    CHECK(set_distance({1.0, 2.0}, {{1.0, 2.0}}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(set_distance({1.0}, {}), std::invalid_argument);
}

TEST_CASE("region partition splits ranked classes into thirds") {
    // counts indexed by class 1..6: ranking 4,1,5,2,6,3
    std::vector<int> counts{0, 50, 20, 5, 100, 40, 10};
    const auto regions = detail::region_partition(counts, 6);
    CHECK(regions.at(4) == ClassRegion::Many);
    CHECK(regions.at(1) == ClassRegion::Many);
    CHECK(regions.at(5) == ClassRegion::Medium);
    CHECK(regions.at(2) == ClassRegion::Medium);
    CHECK(regions.at(6) == ClassRegion::Few);
    CHECK(regions.at(3) == ClassRegion::Few);

    // K=4: 2/1/1 (ceil thirds for the head)
    std::vector<int> c4{0, 9, 7, 5, 3};
    const auto r4 = detail::region_partition(c4, 4);
    CHECK(r4.at(1) == ClassRegion::Many);
    CHECK(r4.at(2) == ClassRegion::Many);
    CHECK(r4.at(3) == ClassRegion::Medium);
    CHECK(r4.at(4) == ClassRegion::Few);
}

TEST_CASE("nearest_center picks the closest centroid") {
    std::vector<std::vector<double>> centers{{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
    CHECK(detail::nearest_center({1.0, 1.0}, centers) == 0);
    CHECK(detail::nearest_center({9.0, 1.0}, centers) == 1);
    CHECK(detail::nearest_center({1.0, 9.0}, centers) == 2);
}

TEST_CASE("distance report covers eligible samples and is reproducible") {
    Dataset train = toy_dataset({9, 5, 3}, 2);
    Dataset eval_set = toy_dataset({4, 3, 3}, 77);
    EncoderParams params = init_params({3, 4, 4, 3, 3, 2}, 8);
    SubclassAssignment assignment = compute_assignment(params, train, 4, 0, 5);
    const std::vector<int> counts = train.class_counts();

    DistanceReport r = distance_report(params, assignment, eval_set, counts);
    CHECK(r.samples.size() == eval_set.graphs.size()); // every class has peers and others
    CHECK(r.class_region.at(1) == ClassRegion::Many);
    CHECK(r.class_region.at(2) == ClassRegion::Medium);
    CHECK(r.class_region.at(3) == ClassRegion::Few);

    for (const auto& s : r.samples) {
        CHECK(s.intra_class >= 0.0);
        CHECK(s.inter_class >= 0.0);
        CHECK(s.cls == eval_set.graphs[s.graph_id].label);
        CHECK(s.subclass >= 0);
        CHECK(s.subclass < assignment.num_subclasses(s.cls));
        // class 1 has 3 subclasses, so inter-subclass can be defined there
        if (s.cls > 1) CHECK_FALSE(s.inter_subclass.has_value());
    }

    // region summary means equal the recomputed sample means
    for (const auto& region : r.regions) {
        if (region.num_samples == 0) continue;
        double intra = 0, inter = 0;
        int n = 0;
        for (const auto& s : r.samples)
            if (r.class_region.at(s.cls) == region.region) {
                intra += s.intra_class;
                inter += s.inter_class;
                ++n;
            }
        CHECK(n == region.num_samples);
        CHECK(region.mean_intra_class == doctest::Approx(intra / n).epsilon(1e-12));
        CHECK(region.mean_inter_class == doctest::Approx(inter / n).epsilon(1e-12));
    }

    DistanceReport r2 = distance_report(params, assignment, eval_set, counts);
    REQUIRE(r2.samples.size() == r.samples.size());
    for (size_t i = 0; i < r.samples.size(); ++i) {
        CHECK(r2.samples[i].intra_class == r.samples[i].intra_class);
        CHECK(r2.samples[i].inter_class == r.samples[i].inter_class);
    }
}

TEST_CASE("distance report and histogram files are written") {
    namespace fs = std::filesystem;
    Dataset train = toy_dataset({6, 4}, 2);
    Dataset eval_set = toy_dataset({3, 3}, 7);
    EncoderParams params = init_params({3, 4, 4, 3, 2, 2}, 8);
    SubclassAssignment assignment = compute_assignment(params, train, 4, 0, 5);
    DistanceReport r = distance_report(params, assignment, eval_set, train.class_counts());

    const std::string report_path = (fs::temp_directory_path() / "c3gnn_report.txt").string();
    save_distance_report(report_path, r);
    const std::string text = file_contents(report_path);
    CHECK(text.find("# graph_id class subclass") == 0);
    CHECK(text.find("# region num_samples") != std::string::npos);
    CHECK(text.find("many ") != std::string::npos);
    fs::remove(report_path);

    const std::string hist_path = (fs::temp_directory_path() / "c3gnn_hist_a.txt").string();
    save_distance_histogram(hist_path, {0.0, 0.5, 0.5, 1.0, 1.0, 1.0}, 2);
    const std::string hist = file_contents(hist_path);
    CHECK(hist.find("# bin_center count") == 0);
    CHECK(hist.find("0.25 1") != std::string::npos); // only 0.0; 0.5 rounds up a bin
    CHECK(hist.find("0.75 5") != std::string::npos);
    fs::remove(hist_path);
}
