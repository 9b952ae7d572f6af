#include "refvid/visual_encoder.hpp"

#include "refvid/error.hpp"

namespace refvid {

Backbone Backbone::create(const std::string& name, Rng& rng, ParamStore& store) {
    Backbone b;
    auto conv = [&](const std::string& tag, int ci, int co, ParamPtr& k, ParamPtr& bias) {
        k = store.add(make_weight(name + "." + tag + ".k", {co, ci, 3, 3}, ci * 9, rng));
        bias = store.add(make_bias(name + "." + tag + ".b", co));
    };
    conv("c1", 3, 16, b.k1, b.b1);
    conv("c2", 16, 32, b.k2, b.b2);
    conv("c3", 32, 64, b.k3, b.b3);
    conv("c4", 64, 64, b.k4, b.b4);
    return b;
}

Value Backbone::forward(const Tensor& img) const {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw DimensionError("backbone expects a 3xHxW frame, got " + shape_str(img.shape));
    if (img.dim(1) % 8 != 0 || img.dim(2) % 8 != 0)
        throw ConfigError("backbone input extents must be divisible by 8, got " +
                          shape_str(img.shape));
    Value x = input(img);
    x = avgpool2(relu(conv2d(x, leaf(k1), leaf(b1), 1, 1)));
    x = avgpool2(relu(conv2d(x, leaf(k2), leaf(b2), 1, 1)));
    x = avgpool2(relu(conv2d(x, leaf(k3), leaf(b3), 1, 1)));
    return relu(conv2d(x, leaf(k4), leaf(b4), 1, 1));
}

FcPair FcPair::create(const std::string& name, int c_v, Rng& rng, ParamStore& store) {
    FcPair fc;
    const int flat = 64 * 7 * 7;
    fc.w1 = store.add(make_weight(name + ".fc1.w", {256, flat}, flat, rng));
    fc.b1 = store.add(make_bias(name + ".fc1.b", 256));
    fc.w2 = store.add(make_weight(name + ".fc2.w", {c_v, 256}, 256, rng));
    fc.b2 = store.add(make_bias(name + ".fc2.b", c_v));
    return fc;
}

Value FcPair::apply(const Value& pooled7) const {
    Value flat = flatten(pooled7);
    Value h = relu(linear(flat, leaf(w1), leaf(b1)));
    return relu(linear(h, leaf(w2), leaf(b2)));
}

std::vector<Value> FcPair::apply_batch(const std::vector<Value>& pooled7s) const {
    const int m = static_cast<int>(pooled7s.size());
    const int n = static_cast<int>(pooled7s.front()->val.numel());
    std::vector<Value> flats;
    flats.reserve(pooled7s.size());
    for (const auto& p : pooled7s) flats.push_back(flatten(p));
    Value stacked = reshape(concat(flats), {m, n});
    Value h = relu(affine_rows(stacked, leaf(w1), leaf(b1)));
    Value y = relu(affine_rows(h, leaf(w2), leaf(b2)));
    std::vector<Value> rows;
    rows.reserve(pooled7s.size());
    for (int i = 0; i < m; ++i) rows.push_back(slice_row(y, i));
    return rows;
}

Tensor location_feature(const Box& box, double frame_w, double frame_h) {
    const Box b = box.clamped(frame_w, frame_h);
    Tensor t({5});
    t[0] = b.x0 / frame_w;
    t[1] = b.y0 / frame_h;
    t[2] = b.x1 / frame_w;
    t[3] = b.y1 / frame_h;
    t[4] = b.area() / (frame_w * frame_h);
    quantize(t);
    return t;
}

VisualEncoder VisualEncoder::create(const VisualEncoderConfig& cfg, Rng& rng) {
    VisualEncoder v;
    v.cfg = cfg;
    v.rgb = Backbone::create("vis.rgb", rng, v.params);
    v.flow = Backbone::create("vis.flow", rng, v.params);
    v.fc_rgb_actor = FcPair::create("vis.rgb.fc", cfg.c_v, rng, v.params);
    if (cfg.shared_fc) {
        v.fc_rgb_action = v.fc_rgb_actor; // same parameters serve both modules
    } else {
        v.fc_rgb_action = FcPair::create("vis.rgb.fc_action", cfg.c_v, rng, v.params);
    }
    v.fc_flow = FcPair::create("vis.flow.fc", cfg.c_v, rng, v.params);
    return v;
}

ProposalFeatures VisualEncoder::forward(const Tensor& rgb_frame, const Tensor& flow_frame,
                                        const std::vector<Box>& proposals,
                                        StreamMode mode) const {
    if (proposals.empty()) throw ArgumentError("need at least one proposal");
    const double fw = rgb_frame.dim(2), fh = rgb_frame.dim(1);

    ProposalFeatures out;
    // a missing stream is substituted by the present one end to end
    out.fmap_rgb = mode == StreamMode::FlowOnly ? flow.forward(flow_frame)
                                                : rgb.forward(rgb_frame);
    out.fmap_flow = mode == StreamMode::RgbOnly ? out.fmap_rgb
                   : mode == StreamMode::FlowOnly ? out.fmap_rgb
                                                  : flow.forward(flow_frame);
    const FcPair& pair_actor = mode == StreamMode::FlowOnly ? fc_flow : fc_rgb_actor;
    const FcPair& pair_action = mode == StreamMode::FlowOnly ? fc_flow : fc_rgb_action;
    const FcPair& pair_flow = mode == StreamMode::RgbOnly ? fc_rgb_action : fc_flow;

    const bool action_aliases_actor = pair_action.w1 == pair_actor.w1;
    const bool flow_aliases_action =
        pair_flow.w1 == pair_action.w1 && out.fmap_flow == out.fmap_rgb;

    // pooled maps for all proposals plus the full frame, run through each fc
    // pair as one batch so the big fc weights stream once per frame
    std::vector<Value> rgb_pools;
    rgb_pools.reserve(proposals.size() + 1);
    for (const Box& b : proposals) rgb_pools.push_back(roi_align(out.fmap_rgb, b, 7, fw, fh));
    rgb_pools.push_back(roi_align(out.fmap_rgb, full_frame_box(fw, fh), 7, fw, fh));

    std::vector<Value> actor_rows = pair_actor.apply_batch(rgb_pools);
    out.v_actor.assign(actor_rows.begin(), actor_rows.end() - 1);
    if (action_aliases_actor) {
        out.v_action = out.v_actor;
        out.v0 = actor_rows.back();
    } else {
        std::vector<Value> action_rows = pair_action.apply_batch(rgb_pools);
        out.v_action.assign(action_rows.begin(), action_rows.end() - 1);
        out.v0 = action_rows.back();
    }
    if (flow_aliases_action) {
        out.f = out.v_action;
    } else {
        std::vector<Value> flow_pools;
        flow_pools.reserve(proposals.size());
        for (const Box& b : proposals)
            flow_pools.push_back(roi_align(out.fmap_flow, b, 7, fw, fh));
        out.f = pair_flow.apply_batch(flow_pools);
    }
    for (const Box& b : proposals) {
        out.loc.push_back(location_feature(b, fw, fh));
        out.mask_fmaps.push_back(concat_channels(roi_align(out.fmap_rgb, b, 14, fw, fh),
                                                 roi_align(out.fmap_flow, b, 14, fw, fh)));
    }
    return out;
}

} // namespace refvid
