#pragma once

#include "refvid/geometry.hpp"
#include "refvid/graph.hpp"
#include "refvid/metrics.hpp"

namespace refvid {

inline constexpr int kMaskSize = 28; // 14x14 pool upsampled by the deconv

struct MaskHeadConfig {
    int in_channels = 128; // stacked rgb+flow 14x14 pools
    int width = 32;        // desk-scale; the full-scale head uses 256 filters
};

/// Small FCN over the stacked proposal pools: a 1x1 fusing layer, three 3x3
/// layers, a 2x deconv to 28x28 and a 1-channel 1x1 sigmoid output.
struct MaskHead {
    MaskHeadConfig cfg;
    ParamPtr k1, b1, k2, b2, k3, b3, k4, b4; // convs, ReLU after each
    ParamPtr kd, bd;                         // deconv
    ParamPtr ko, bo;                         // output 1x1
    ParamStore params;

    static MaskHead create(const MaskHeadConfig& cfg, Rng& rng);

    /// Probabilities in (0,1), shape [1, 28, 28].
    Value predict(const Value& mask_fmap) const;
};

/// Resample the frame-level binary mask restricted to the box onto 28x28,
/// thresholded at 0.5.
Mask project_gt_mask(const Mask& gt, const Box& box);

/// Resize the 28x28 probability map to the box, threshold, and paste into an
/// empty frame canvas; pixels outside the box stay 0.
Mask paste_mask(const Tensor& kappa, const Box& box, int frame_h, int frame_w,
                double threshold = 0.5);

} // namespace refvid
