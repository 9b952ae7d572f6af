#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "refvid/model.hpp"

namespace refvid {

struct EvalResult {
    MetricReport masks;
    std::map<double, double> localization; // box precision per threshold
    std::string per_sample_json;
};

/// Per sample: select the best-scoring proposal, predict and paste its mask,
/// then aggregate mask IoU and box-localization precision. Oracle mode
/// bypasses the model (selected := gt_index, mask := projected ground truth)
/// and bounds what the 28x28 head could achieve.
EvalResult evaluate(const GroundingModel& model, const Vocab& vocab,
                    const std::vector<TrainItem>& items, bool oracle = false);

/// Writes metrics.json (mask metrics plus a localization block) and
/// per_sample.json under out_dir.
void write_eval_outputs(const std::filesystem::path& out_dir, const EvalResult& r);

} // namespace refvid
