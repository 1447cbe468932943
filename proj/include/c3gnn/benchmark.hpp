#pragma once

#include <stdexcept>
#include <string>

#include "c3gnn/split.hpp"
#include "c3gnn/synthetic.hpp"
#include "c3gnn/trainer.hpp"

namespace c3gnn {

// Canonical benchmark protocol shared by the acceptance suite and the CLI
// `ablate` command: 4 motif classes, 128 train graphs per class reduced to a
// Zipf profile at IF=10 (128/40/21/13), balanced 40-per-class val and test.

struct BenchmarkRun {
    Dataset train;
    Dataset val;
    Dataset test;
    TrainConfig config;
};

// Tuned for the synthetic benchmark: higher lr than the real-data default
// (tiny model, small graphs), frequent refresh, conservative augmentation
// ratio (the motif classes are sensitive to structural edits).
inline TrainConfig benchmark_config(uint64_t seed) {
    TrainConfig cfg;
    cfg.learning_rate = 3e-3;
    cfg.batch_size = 32;
    cfg.epochs = 80;
    cfg.warmup_epochs = 5;
    cfg.refresh_interval = 5;
    cfg.augmentation_ratio = 0.02;
    cfg.tau = 0.2;
    cfg.beta = 1.0;
    cfg.delta = 4;
    cfg.seed = seed;
    return cfg;
}

inline BenchmarkRun make_benchmark_run(int seed_index) {
    BenchmarkRun run;
    run.train = make_imbalanced(make_benchmark_dataset(128, 100 + seed_index), 10.0,
                                200 + seed_index);
    run.val = make_benchmark_dataset(40, 300 + seed_index);
    run.test = make_benchmark_dataset(40, 400 + seed_index);
    run.config = benchmark_config(1000 + static_cast<uint64_t>(seed_index));
    return run;
}

inline void apply_variant(TrainConfig& cfg, const std::string& variant) {
    if (variant == "full") return;
    if (variant == "no-hscl") cfg.hscl = false;
    else if (variant == "no-ac") cfg.adaptive_refresh = false;
    else if (variant == "no-smi") cfg.mixup = false;
    else throw std::invalid_argument("unknown variant: " + variant);
}

} // namespace c3gnn
