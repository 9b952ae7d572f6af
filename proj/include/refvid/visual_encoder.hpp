#pragma once

#include <vector>

#include "refvid/geometry.hpp"
#include "refvid/graph.hpp"

namespace refvid {

/// Which input streams feed the model.
enum class StreamMode { Both, RgbOnly, FlowOnly };

struct VisualEncoderConfig {
    int c_v = 128;         // proposal feature width
    bool shared_fc = true; // one fc pair per stream for both modules and v0
};

/// Conv stack 3->16->32->64->64, 3x3 kernels, ReLU, 2x downsample after the
/// first three blocks; maps 3 x H x W to 64 x H/8 x W/8.
struct Backbone {
    ParamPtr k1, b1, k2, b2, k3, b3, k4, b4;

    static Backbone create(const std::string& name, Rng& rng, ParamStore& store);
    Value forward(const Tensor& img) const;
};

/// flatten(64*7*7) -> 256 -> C_v, ReLU after both layers.
struct FcPair {
    ParamPtr w1, b1, w2, b2;

    static FcPair create(const std::string& name, int c_v, Rng& rng, ParamStore& store);
    Value apply(const Value& pooled7) const;
    /// One weight pass over a whole set of pooled maps.
    std::vector<Value> apply_batch(const std::vector<Value>& pooled7s) const;
};

/// [x0/W, y0/H, x1/W, y1/H, area/(W*H)] of the frame-clamped box.
Tensor location_feature(const Box& box, double frame_w, double frame_h);

struct ProposalFeatures {
    Value fmap_rgb, fmap_flow;
    std::vector<Value> v_actor;  // K appearance vectors for the actor module
    std::vector<Value> v_action; // K appearance vectors for the action side
    std::vector<Value> f;        // K motion vectors
    Value v0;                    // whole-image context vector
    std::vector<Tensor> loc;     // K location features
    std::vector<Value> mask_fmaps; // K stacked (rgb+flow) 14x14 pools
};

struct VisualEncoder {
    VisualEncoderConfig cfg;
    Backbone rgb, flow;
    FcPair fc_rgb_actor, fc_rgb_action, fc_flow; // actor/action pairs alias when shared
    ParamStore params;

    static VisualEncoder create(const VisualEncoderConfig& cfg, Rng& rng);

    ProposalFeatures forward(const Tensor& rgb_frame, const Tensor& flow_frame,
                             const std::vector<Box>& proposals,
                             StreamMode mode = StreamMode::Both) const;
};

} // namespace refvid
