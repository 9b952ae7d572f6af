#include "refvid/model.hpp"

#include "refvid/error.hpp"

namespace refvid {

void ModelConfig::validate() const {
    if (k < 2) throw ConfigError("model requires K >= 2 proposals");
    if (c_e < 2 || per_dir < 1 || c_v < 2 || c_c < 1 || seg_width < 1)
        throw ConfigError("model widths must be positive");
    if (pool_hidden && 4 * per_dir != c_e)
        throw ConfigError("pool_hidden requires 4*per_dir == c_e");
}

TrainItem to_train_item(const VideoSample& s) {
    TrainItem it;
    const int t = s.annotated_t;
    const int h = s.frames.dim(2), w = s.frames.dim(3);
    const int64_t plane = static_cast<int64_t>(3) * h * w;
    it.rgb = Tensor({3, h, w});
    it.flow = Tensor({3, h, w});
    for (int64_t i = 0; i < plane; ++i) {
        it.rgb[i] = s.frames[static_cast<int64_t>(t) * plane + i];
        it.flow[i] = s.flow[static_cast<int64_t>(t) * plane + i];
    }
    it.tokens = s.query_tokens;
    it.proposals = s.proposals;
    it.gt_mask = s.gt_mask;
    it.gt_index = s.gt_index;
    it.gt_box = s.gt_box;
    return it;
}

GroundingModel GroundingModel::create(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    GroundingModel m;
    m.cfg = cfg;
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0xb5297a4d3a2d9d1bULL);

    TextEncoderConfig tc;
    tc.embed_dim = cfg.c_e;
    tc.per_dir = cfg.per_dir;
    tc.pool_hidden = cfg.pool_hidden;
    m.text = TextEncoder::create(tc, rng);

    VisualEncoderConfig vc;
    vc.c_v = cfg.c_v;
    vc.shared_fc = cfg.shared_fc;
    m.vis = VisualEncoder::create(vc, rng);

    MatcherConfig mc;
    mc.c_v = cfg.c_v;
    mc.c_c = cfg.c_c;
    mc.c_e = cfg.c_e;
    mc.eq7_literal = cfg.eq7_literal;
    mc.variant = cfg.variant;
    m.matcher = Matcher::create(mc, rng);

    MaskHeadConfig sc;
    sc.width = cfg.seg_width;
    m.seg = MaskHead::create(sc, rng);

    m.params.absorb(m.text.params);
    m.params.absorb(m.vis.params);
    m.params.absorb(m.matcher.params);
    m.params.absorb(m.seg.params);
    return m;
}

GroundingModel::SampleForward GroundingModel::forward(const TrainItem& item,
                                                      const Vocab& vocab) const {
    if (static_cast<int>(item.proposals.size()) != cfg.k)
        throw ConfigError("sample has " + std::to_string(item.proposals.size()) +
                          " proposals but the model expects K=" + std::to_string(cfg.k));
    SampleForward f;
    f.query = text.encode(item.tokens, vocab);
    f.feats = vis.forward(item.rgb, item.flow, item.proposals, stream_mode(cfg.variant));
    f.match = matcher.match(f.feats, f.query.q_actor, f.query.q_action, item.proposals);
    return f;
}

Value GroundingModel::predict_mask(const SampleForward& f, int proposal) const {
    if (proposal < 0 || proposal >= static_cast<int>(f.feats.mask_fmaps.size()))
        throw ArgumentError("predict_mask: proposal index out of range");
    return seg.predict(f.feats.mask_fmaps[static_cast<size_t>(proposal)]);
}

} // namespace refvid
