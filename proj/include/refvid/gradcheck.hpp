#pragma once

#include <functional>
#include <string>
#include <vector>

#include "refvid/graph.hpp"

namespace refvid {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::vector<std::pair<std::string, double>> per_param; // name -> max rel err
};

/// Central-difference check of analytic gradients. `fn` must rebuild the full
/// forward pass and return a scalar loss over the given parameters. Runs in
/// float64 mode. At least `coords_per_param` coordinates are sampled per
/// trainable parameter (all of them for small tensors). Relative error
/// denominator is max(|analytic|, |numeric|, 1e-8).
GradCheckReport gradient_check(const std::function<Value()>& fn,
                               const std::vector<ParamPtr>& params, double h = 1e-5,
                               int coords_per_param = 32, uint64_t seed = 0);

} // namespace refvid
