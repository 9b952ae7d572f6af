#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "refvid/config.hpp"
#include "refvid/gradcheck.hpp"
#include "refvid/model.hpp"

namespace refvid {

struct StepRecord {
    int step = 0;
    double total = 0, mat = 0, seg = 0;
};

/// Which loss terms run and which parameter blocks stay frozen at one step.
/// Phased strategies switch at floor(total/2).
struct PhasePlan {
    bool use_mat = true;
    bool use_seg = true;
    bool freeze_seg = false;
    bool freeze_match = false;
};

PhasePlan phase_at(const std::string& strategy, int iter, int total_iters);

struct LoadedDataset {
    GenConfig gen;
    Vocab vocab;
    std::vector<TrainItem> train, test;
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

void save_checkpoint(const std::filesystem::path& path, const GroundingModel& model,
                     const OptimState& optim, int64_t iteration, const Rng& batch_rng,
                     const Config& cfg);

/// Restores parameters, velocities, iteration count and RNG state. The stored
/// model section must match the current config.
void load_checkpoint(const std::filesystem::path& path, GroundingModel& model,
                     OptimState& optim, int64_t& iteration, Rng& batch_rng,
                     const Config& cfg);

struct TrainResult {
    std::vector<StepRecord> curve;
    std::filesystem::path checkpoint_path;
    std::filesystem::path losses_path;
};

/// Joint (or phased) training: per step, sample a batch, run the full forward,
/// combine the matching and segmentation losses, backpropagate and apply SGD.
/// The learning rate drops by 10x at optim.lr_drop_at. The segmentation loss
/// is always computed on the positive proposal only.
TrainResult train(const Config& cfg, const std::filesystem::path& dataset_dir,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

/// Composed-model gradient suite over every trainable parameter group; used by
/// the gradcheck CLI command and the acceptance tests.
GradCheckReport model_gradient_suite(uint64_t seed, int coords_per_param = 32);

} // namespace refvid
