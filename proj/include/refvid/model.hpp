#pragma once

#include "refvid/mask_head.hpp"
#include "refvid/matcher.hpp"
#include "refvid/synth.hpp"
#include "refvid/text_encoder.hpp"
#include "refvid/visual_encoder.hpp"

namespace refvid {

struct ModelConfig {
    int k = 6;          // proposals per frame
    int c_e = 32;       // word/query width (full scale: 300)
    int per_dir = 32;   // BiLSTM per-direction size (full scale C_h=1024)
    int c_v = 128;      // proposal feature width (full scale: 4096)
    int c_c = 64;       // contextual LSTM width (full scale: 512)
    int seg_width = 32; // mask head channels (full scale: 256)
    bool shared_fc = true;
    bool eq7_literal = false;
    bool pool_hidden = false;
    Variant variant = Variant::Full;

    void validate() const;
};

/// One sample reduced to its annotated frame.
struct TrainItem {
    Tensor rgb, flow; // [3,H,W]
    std::vector<int> tokens;
    std::vector<Box> proposals;
    Mask gt_mask;
    int gt_index = 0;
    Box gt_box;
};

TrainItem to_train_item(const VideoSample& s);

struct GroundingModel {
    ModelConfig cfg;
    TextEncoder text;
    VisualEncoder vis;
    Matcher matcher;
    MaskHead seg;
    ParamStore params;

    static GroundingModel create(const ModelConfig& cfg, uint64_t seed);

    struct SampleForward {
        QueryEncoding query;
        ProposalFeatures feats;
        MatchResult match;
    };

    SampleForward forward(const TrainItem& item, const Vocab& vocab) const;

    /// Mask probabilities for one proposal's pooled features, [1,28,28].
    Value predict_mask(const SampleForward& f, int proposal) const;
};

} // namespace refvid
