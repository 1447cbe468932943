#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "c3gnn/trainer.hpp"

namespace c3gnn {

// Flat key=value config file; '#' starts a comment, blank lines ignored.
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = value;
    }
    return kv;
}

struct RunConfig {
    TrainConfig train;
    std::string train_path; // serialized dataset files
    std::string val_path;
    std::string test_path;
};

// Recognized keys mirror TrainConfig: learning_rate, batch_size, epochs,
// warmup_epochs, refresh_interval, tau, beta, delta, augmentation_ratio,
// hscl, adaptive_refresh, mixup, two_stage, seed, hidden_dim, embed_dim,
// contrastive_dim, num_layers, train_path, val_path, test_path.
inline RunConfig parse_run_config(std::istream& in) {
    const auto kv = parse_key_values(in);
    RunConfig cfg;
    auto geti = [&](const std::string& k, int& out) {
        if (auto it = kv.find(k); it != kv.end()) out = std::stoi(it->second);
    };
    auto getd = [&](const std::string& k, double& out) {
        if (auto it = kv.find(k); it != kv.end()) out = std::stod(it->second);
    };
    auto getb = [&](const std::string& k, bool& out) {
        if (auto it = kv.find(k); it != kv.end()) {
            if (it->second == "true" || it->second == "1") out = true;
            else if (it->second == "false" || it->second == "0") out = false;
            else throw std::invalid_argument("config: bad boolean for " + k);
        }
    };
    auto gets = [&](const std::string& k, std::string& out) {
        if (auto it = kv.find(k); it != kv.end()) out = it->second;
    };

    getd("learning_rate", cfg.train.learning_rate);
    geti("batch_size", cfg.train.batch_size);
    geti("epochs", cfg.train.epochs);
    geti("warmup_epochs", cfg.train.warmup_epochs);
    geti("refresh_interval", cfg.train.refresh_interval);
    getd("tau", cfg.train.tau);
    getd("beta", cfg.train.beta);
    geti("delta", cfg.train.delta);
    getd("augmentation_ratio", cfg.train.augmentation_ratio);
    getb("hscl", cfg.train.hscl);
    getb("adaptive_refresh", cfg.train.adaptive_refresh);
    getb("mixup", cfg.train.mixup);
    getb("two_stage", cfg.train.two_stage);
    if (auto it = kv.find("seed"); it != kv.end())
        cfg.train.seed = std::stoull(it->second);
    geti("hidden_dim", cfg.train.dims.hidden_dim);
    geti("embed_dim", cfg.train.dims.embed_dim);
    geti("contrastive_dim", cfg.train.dims.contrastive_dim);
    geti("num_layers", cfg.train.dims.num_layers);
    gets("train_path", cfg.train_path);
    gets("val_path", cfg.val_path);
    gets("test_path", cfg.test_path);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    return parse_run_config(f);
}

} // namespace c3gnn
