#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refvid/config.hpp"
#include "refvid/evaluator.hpp"

namespace refvid {

struct AblationRow {
    std::string variant;
    EvalResult eval;
};

/// Train and evaluate one configuration per grid entry with a shared data
/// seed. Built-in grids: "k" (2,4,6,8), "lambda" (0.1,1,5,10) and "modules"
/// (the ablation-table variants); anything else must be
/// "cfg.key=v1,v2,..." over an existing config key.
/// Emits ablation_<name>.csv under out_dir and returns the rows.
std::vector<AblationRow> run_ablation(const Config& base, const std::string& grid,
                                      const std::filesystem::path& out_dir);

} // namespace refvid
