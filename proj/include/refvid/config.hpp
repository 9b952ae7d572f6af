#pragma once

#include <filesystem>
#include <string>

#include "refvid/model.hpp"
#include "refvid/synth.hpp"

namespace refvid {

/// Flat key=value configuration with dotted sections. Precedence:
/// command-line overrides > config file > defaults.
struct Config {
    // dataset
    std::string dataset_dir = "dataset";
    int data_n = 1000;
    int height = 32, width = 32, frames = 6;
    int actors_min = 2, actors_max = 4;
    uint64_t data_seed = 42;

    ModelConfig model;

    // optim; the full-scale schedule is lr=1e-4, 1.5e5 iters, drop at 1e5
    double lr = 1e-3;
    double momentum = 0.95;
    double weight_decay = 5e-4;
    int iters = 5000;
    int lr_drop_at = 3500;
    int batch = 4;

    // loss
    double lambda = 5.0;
    double epsilon = 0.1;

    // run
    uint64_t seed = 1;
    std::string strategy = "joint"; // matching_then_seg | seg_then_matching

    void apply(const std::string& key, const std::string& value);
    void apply_override(const std::string& key_equals_value);
    void load_file(const std::filesystem::path& file);

    std::string canonical() const;       // sorted key=value lines
    uint64_t hash() const;               // over canonical()
    std::string model_signature() const; // model.* subset, for checkpoint compatibility
    GenConfig gen_config() const;
    void validate() const;
};

} // namespace refvid
