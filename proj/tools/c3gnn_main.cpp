// Command-line front end: make-imbalanced / train / eval / analyze /
// gradcheck / ablate. All outputs are plain files under --out; C3G_THREADS
// bounds parallelism where a command supports it.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "c3gnn/analysis.hpp"
#include "c3gnn/benchmark.hpp"
#include "c3gnn/config.hpp"
#include "c3gnn/gradsuite.hpp"
#include "c3gnn/tu_parser.hpp"

namespace fs = std::filesystem;
using namespace c3gnn;

namespace {

int env_threads() {
    const char* v = std::getenv("C3G_THREADS");
    if (!v) return 1;
    const int n = std::atoi(v);
    if (n < 1) throw std::runtime_error("C3G_THREADS must be a positive integer");
    return n;
}

// Accepts either a serialized dataset file or a TU-format directory (the
// directory name doubles as the dataset name: DIR/<name>_A.txt etc.).
Dataset load_any_dataset(const std::string& path) {
    if (fs::is_directory(path)) {
        const std::string name = fs::path(path).filename().string();
        return parse_tu_dataset(path, name);
    }
    return load_dataset(path);
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

int cmd_make_imbalanced(const std::string& dataset_path, double target_if, uint64_t seed,
                        const std::string& out) {
    const Dataset full = load_any_dataset(dataset_path);
    SplitSpec spec;
    spec.imbalance_factor = target_if;
    spec.seed = seed;
    auto [train, val, test] = stratified_split(full, spec);
    train = make_imbalanced(train, target_if, seed);

    const fs::path dir = ensure_out_dir(out);
    save_dataset((dir / "train.ds").string(), train);
    save_dataset((dir / "val.ds").string(), val);
    save_dataset((dir / "test.ds").string(), test);

    std::ofstream counts((dir / "counts.txt").string());
    counts << "# class train val test\n";
    const auto tc = train.class_counts(), vc = val.class_counts(), sc = test.class_counts();
    for (int c = 1; c <= train.num_classes; ++c)
        counts << c << ' ' << tc[c] << ' ' << vc[c] << ' ' << sc[c] << '\n';
    std::printf("wrote train.ds (%zu graphs, IF %.3f), val.ds (%zu), test.ds (%zu) to %s\n",
                train.graphs.size(), imbalance_factor(train), val.graphs.size(),
                test.graphs.size(), dir.string().c_str());
    return 0;
}

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed,
              const std::string& out, const std::string& variant) {
    RunConfig cfg = load_run_config(config_path);
    if (cfg.train_path.empty() || cfg.val_path.empty())
        throw std::runtime_error("config must set train_path and val_path");
    if (seed) cfg.train.seed = *seed;
    apply_variant(cfg.train, variant);

    const Dataset train = load_any_dataset(cfg.train_path);
    const Dataset val = load_any_dataset(cfg.val_path);
    const FitResult r = fit(train, val, cfg.train);

    const fs::path dir = ensure_out_dir(out);
    save_checkpoint((dir / "checkpoint.bin").string(), r.final_params);
    save_checkpoint((dir / "checkpoint_best.bin").string(), r.params);
    save_history((dir / "history.txt").string(), r.history);
    save_assignment((dir / "assignment.txt").string(), r.assignment);
    std::printf("trained %d epochs; best val top-1 %.4f at epoch %d; outputs in %s\n",
                static_cast<int>(r.history.size()), r.best_val_top1, r.best_epoch,
                dir.string().c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& out) {
    const EncoderParams params = load_checkpoint(checkpoint_path);
    const Dataset ds = load_any_dataset(dataset_path);
    const double acc = top1_accuracy(params, ds);
    std::printf("top1 %.17g\n", acc);
    if (!out.empty()) {
        const fs::path dir = ensure_out_dir(out);
        std::ofstream f((dir / "eval.txt").string());
        f.precision(17);
        f << "# dataset top1\n" << dataset_path << ' ' << acc << '\n';
    }
    return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& checkpoint_path,
                const std::string& dataset_path, const std::string& out) {
    const RunConfig cfg = load_run_config(config_path);
    if (cfg.train_path.empty())
        throw std::runtime_error("config must set train_path (subclasses come from it)");
    const EncoderParams params = load_checkpoint(checkpoint_path);
    const Dataset train = load_any_dataset(cfg.train_path);
    const Dataset eval_set = load_any_dataset(dataset_path);

    const auto counts = train.class_counts();
    int n_min = 0;
    for (int c = 1; c <= train.num_classes; ++c)
        if (counts[c] > 0 && (n_min == 0 || counts[c] < n_min)) n_min = counts[c];
    const int cap = subclass_cap(std::max(n_min, 1), cfg.train.delta);
    const SubclassAssignment assignment =
        compute_assignment(params, train, cap, 0, cfg.train.seed);

    const DistanceReport report =
        distance_report(params, assignment, eval_set, counts, env_threads());

    const fs::path dir = ensure_out_dir(out);
    save_distance_report((dir / "distances.txt").string(), report);
    std::vector<double> intra_cls, intra_sub;
    for (const auto& s : report.samples) {
        intra_cls.push_back(s.intra_class);
        if (s.intra_subclass) intra_sub.push_back(*s.intra_subclass);
    }
    save_distance_histogram((dir / "hist_intra_class.txt").string(), intra_cls);
    save_distance_histogram((dir / "hist_intra_subclass.txt").string(), intra_sub);
    std::printf("analyzed %zu samples; reports in %s\n", report.samples.size(),
                dir.string().c_str());
    return 0;
}

int cmd_gradcheck() {
    const GradSuiteResult r = run_gradient_suite();
    for (const auto& e : r.entries)
        std::printf("%-32s max rel err %.3e\n", e.name.c_str(), e.max_rel_error);
    std::printf("gradient suite %s (worst %.3e, %.2fs)\n", r.passed ? "PASS" : "FAIL",
                r.max_rel_error, r.seconds);
    return r.passed ? 0 : 1;
}

int cmd_ablate(int num_seeds, const std::string& out) {
    const std::vector<std::string> variants{"full", "no-hscl", "no-ac", "no-smi"};
    std::ostringstream table;
    table.precision(6);
    table << "# variant mean_test_top1 per_seed\n";
    for (const std::string& variant : variants) {
        double sum = 0.0;
        std::vector<double> accs;
        for (int s = 0; s < num_seeds; ++s) {
            BenchmarkRun run = make_benchmark_run(s);
            apply_variant(run.config, variant);
            const FitResult r = fit(run.train, run.val, run.config);
            accs.push_back(top1_accuracy(r.params, run.test));
            sum += accs.back();
        }
        table << variant << ' ' << sum / num_seeds;
        for (double a : accs) table << ' ' << a;
        table << '\n';
        std::printf("%-8s mean %.4f\n", variant.c_str(), sum / num_seeds);
    }
    if (!out.empty()) {
        const fs::path dir = ensure_out_dir(out);
        std::ofstream f((dir / "ablate.txt").string());
        f << table.str();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"C3GNN: class-imbalanced graph classification pipeline"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, checkpoint_path, out_dir;
    std::string variant = "full";
    double target_if = 10.0;
    uint64_t seed = 0;
    bool seed_given = false;
    int ablate_seeds = 5;

    auto* mk = app.add_subcommand("make-imbalanced",
                                  "split a dataset and impose a Zipf imbalance on train");
    mk->add_option("--dataset", dataset_path, "dataset file or TU directory")->required();
    mk->add_option("--if", target_if, "imbalance factor N1/NK (>= 1)");
    mk->add_option("--seed", seed, "split/subsample seed");
    mk->add_option("--out", out_dir, "output directory")->required();

    auto* tr = app.add_subcommand("train", "train a model from a config file");
    tr->add_option("--config", config_path, "key=value config file")->required();
    tr->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    tr->add_option("--out", out_dir, "output directory")->required();
    tr->add_option("--variant", variant, "full|no-hscl|no-ac|no-smi");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    ev->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    ev->add_option("--dataset", dataset_path, "dataset file or TU directory")->required();
    ev->add_option("--out", out_dir, "optional output directory for eval.txt");

    auto* an = app.add_subcommand("analyze", "distance reports for a checkpoint on a split");
    an->add_option("--config", config_path, "config file (train_path drives subclasses)")
        ->required();
    an->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    an->add_option("--dataset", dataset_path, "evaluation split")->required();
    an->add_option("--out", out_dir, "output directory")->required();

    app.add_subcommand("gradcheck", "run the full gradient-check suite");

    auto* ab = app.add_subcommand("ablate", "run the benchmark variant grid");
    ab->add_option("--seed", ablate_seeds, "number of benchmark seeds");
    ab->add_option("--out", out_dir, "optional output directory for ablate.txt");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mk->parsed()) return cmd_make_imbalanced(dataset_path, target_if, seed, out_dir);
        if (tr->parsed())
            return cmd_train(config_path,
                             seed_given ? std::optional<uint64_t>(seed) : std::nullopt,
                             out_dir, variant);
        if (ev->parsed()) return cmd_eval(checkpoint_path, dataset_path, out_dir);
        if (an->parsed()) return cmd_analyze(config_path, checkpoint_path, dataset_path, out_dir);
        if (app.get_subcommand("gradcheck")->parsed()) return cmd_gradcheck();
        if (ab->parsed()) return cmd_ablate(ablate_seeds, out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
