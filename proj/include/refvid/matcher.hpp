#pragma once

#include <string>
#include <vector>

#include "refvid/lstm.hpp"
#include "refvid/visual_encoder.hpp"

namespace refvid {

/// Model variants mirroring the ablation table rows.
enum class Variant {
    Full,
    ActorOnly,
    ActionOnly,
    NoContextLstm,
    NoGatedFusion,
    NoLocation,
    RgbOnly,
    FlowOnly,
};

Variant variant_from_string(const std::string& s);
const char* to_string(Variant v);
StreamMode stream_mode(Variant v);

struct MatcherConfig {
    int c_v = 128;
    int c_c = 64;
    int c_e = 32;
    // reproduce the printed form of the action-score equation, which
    // normalizes the untransformed fused vector
    bool eq7_literal = false;
    Variant variant = Variant::Full;

    bool has_actor() const { return variant != Variant::ActionOnly; }
    bool has_action() const { return variant != Variant::ActorOnly; }
    bool has_context() const { return has_action() && variant != Variant::NoContextLstm; }
    bool gated() const { return variant != Variant::NoGatedFusion; }
    bool use_location() const { return variant != Variant::NoLocation; }
};

struct ActorScore {
    Value v_tilde; // transformed visual vector, reused for cross-query scores
    Value x;       // normalized fused vector
    Value s;       // scalar score
};

struct GateFusion {
    Value ga, gb;
    Value sigma;    // null for the concatenation variant
    Value v_action; // fused action representation
};

struct ActionScore {
    Value v_tilde; // vector entering the normalization
    Value x;
    Value s;
};

struct MatchResult {
    std::vector<Value> vt_actor;  // per proposal; empty when the actor module is off
    std::vector<Value> vt_action; // per proposal; empty when the action module is off
    std::vector<Value> sigma;     // gates, empty unless gated fusion is active
    std::vector<Value> s;         // combined score per proposal
    std::vector<double> s_val;
    int selected = 0;
};

/// Argmax with ties resolved to the lowest index.
int select_best(const std::vector<double>& scores);

struct Matcher {
    MatcherConfig cfg;
    // actor module
    ParamPtr w1, b1, w2, b2;
    // contextual LSTM and its attention
    LstmCell ctx;
    ParamPtr w3, b3, w4, b4;
    // gated fusion (or the concat substitute)
    ParamPtr w5, b5, w6, b6, w7, b7;
    ParamPtr wcat, bcat;
    // action score
    ParamPtr w8, b8, w9, b9;
    ParamStore params;

    static Matcher create(const MatcherConfig& cfg, Rng& rng);

    ActorScore score_actor(const Value& v_i, const Tensor& loc, const Value& q_actor) const;

    /// Context vector for the target proposal: the whole-image feature leads a
    /// sequence of the other proposals ordered top-to-bottom, left-to-right.
    Value encode_context(const std::vector<Value>& v_all, const Value& v0, int target,
                         const std::vector<Box>& boxes, Value* attn_out = nullptr) const;

    GateFusion fuse_gated(const Value& v_i, const Value& v_ctx, const Value& f_i) const;

    ActionScore score_action(const Value& v_action, const Value& q_action) const;

    /// Score an arbitrary (proposal, query) pairing from the stored
    /// transformed vectors; active modules contribute additively.
    Value pair_score(const Value& vt_actor, const Value& vt_action, const Value& q_actor,
                     const Value& q_action) const;

    MatchResult match(const ProposalFeatures& feats, const Value& q_actor,
                      const Value& q_action, const std::vector<Box>& boxes) const;
};

} // namespace refvid
