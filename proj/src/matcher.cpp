#include "refvid/matcher.hpp"

#include <algorithm>
#include <numeric>

#include "refvid/error.hpp"

namespace refvid {

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::Full;
    if (s == "actor_only") return Variant::ActorOnly;
    if (s == "action_only") return Variant::ActionOnly;
    if (s == "no_context_lstm") return Variant::NoContextLstm;
    if (s == "no_gated_fusion") return Variant::NoGatedFusion;
    if (s == "no_location") return Variant::NoLocation;
    if (s == "rgb_only") return Variant::RgbOnly;
    if (s == "flow_only") return Variant::FlowOnly;
    throw ConfigError("unknown model variant: " + s);
}

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::ActorOnly: return "actor_only";
        case Variant::ActionOnly: return "action_only";
        case Variant::NoContextLstm: return "no_context_lstm";
        case Variant::NoGatedFusion: return "no_gated_fusion";
        case Variant::NoLocation: return "no_location";
        case Variant::RgbOnly: return "rgb_only";
        case Variant::FlowOnly: return "flow_only";
    }
    return "?";
}

StreamMode stream_mode(Variant v) {
    if (v == Variant::RgbOnly) return StreamMode::RgbOnly;
    if (v == Variant::FlowOnly) return StreamMode::FlowOnly;
    return StreamMode::Both;
}

int select_best(const std::vector<double>& scores) {
    if (scores.empty()) throw ArgumentError("select_best: no scores");
    int best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[static_cast<size_t>(best)]) best = static_cast<int>(i);
    return best;
}

Matcher Matcher::create(const MatcherConfig& cfg, Rng& rng) {
    Matcher m;
    m.cfg = cfg;
    auto& st = m.params;
    const int ce = cfg.c_e, cv = cfg.c_v, cc = cfg.c_c;
    if (cfg.has_actor()) {
        const int in1 = cv + (cfg.use_location() ? 5 : 0);
        m.w1 = st.add(make_weight("match.actor.w1", {ce, in1}, in1, rng));
        m.b1 = st.add(make_bias("match.actor.b1", ce));
        m.w2 = st.add(make_weight("match.actor.w2", {1, ce}, ce, rng));
        m.b2 = st.add(make_bias("match.actor.b2", 1));
    }
    if (cfg.has_action()) {
        int fused_in = cv;
        if (cfg.has_context()) {
            m.ctx = LstmCell::create("match.ctx", cv, cc, rng, st);
            m.w3 = st.add(make_weight("match.ctx.w3", {cc, cc}, cc, rng));
            m.b3 = st.add(make_bias("match.ctx.b3", cc));
            m.w4 = st.add(make_weight("match.ctx.w4", {1, cc}, cc, rng));
            m.b4 = st.add(make_bias("match.ctx.b4", 1));
            fused_in += cc;
        }
        if (cfg.gated()) {
            m.w5 = st.add(make_weight("match.gate.w5", {ce, fused_in}, fused_in, rng));
            m.b5 = st.add(make_bias("match.gate.b5", ce));
            m.w6 = st.add(make_weight("match.gate.w6", {ce, cv}, cv, rng));
            m.b6 = st.add(make_bias("match.gate.b6", ce));
            m.w7 = st.add(make_weight("match.gate.w7", {ce, 2 * ce}, 2 * ce, rng));
            m.b7 = st.add(make_bias("match.gate.b7", ce));
        } else {
            m.wcat = st.add(make_weight("match.cat.w", {ce, fused_in + cv}, fused_in + cv, rng));
            m.bcat = st.add(make_bias("match.cat.b", ce));
        }
        if (!cfg.eq7_literal) {
            m.w8 = st.add(make_weight("match.action.w8", {ce, ce}, ce, rng));
            m.b8 = st.add(make_bias("match.action.b8", ce));
        }
        m.w9 = st.add(make_weight("match.action.w9", {1, ce}, ce, rng));
        m.b9 = st.add(make_bias("match.action.b9", 1));
    }
    return m;
}

ActorScore Matcher::score_actor(const Value& v_i, const Tensor& loc, const Value& q_actor) const {
    ActorScore out;
    Value va = cfg.use_location() ? concat({v_i, input(loc)}) : v_i;
    out.v_tilde = linear(va, leaf(w1), leaf(b1));
    out.x = l2_normalize(mul(out.v_tilde, q_actor));
    out.s = linear(out.x, leaf(w2), leaf(b2));
    return out;
}

Value Matcher::encode_context(const std::vector<Value>& v_all, const Value& v0, int target,
                              const std::vector<Box>& boxes, Value* attn_out) const {
    const int k = static_cast<int>(v_all.size());
    if (k < 2) throw ContextError("context encoding needs at least 2 proposals");
    if (boxes.size() != v_all.size())
        throw ArgumentError("encode_context: box count does not match feature count");
    if (target < 0 || target >= k) throw ArgumentError("encode_context: bad target index");

    std::vector<int> order;
    for (int j = 0; j < k; ++j)
        if (j != target) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const Box& ba = boxes[static_cast<size_t>(a)];
        const Box& bb = boxes[static_cast<size_t>(b)];
        if (ba.y0 != bb.y0) return ba.y0 < bb.y0;
        return ba.x0 < bb.x0;
    });

    std::vector<Value> seq;
    seq.reserve(static_cast<size_t>(k));
    seq.push_back(v0);
    for (int j : order) seq.push_back(v_all[static_cast<size_t>(j)]);

    const std::vector<Value> hidden = lstm_encode(ctx, seq);
    Value vw3 = leaf(w3), vb3 = leaf(b3), vw4 = leaf(w4), vb4 = leaf(b4);
    std::vector<Value> ys(hidden.size());
    std::vector<Value> logits(hidden.size());
    for (size_t t = 0; t < hidden.size(); ++t) {
        ys[t] = relu(linear(hidden[t], vw3, vb3));
        logits[t] = linear(ys[t], vw4, vb4);
    }
    Value alpha = softmax(concat(logits));
    if (attn_out) *attn_out = alpha;
    Value acc;
    for (size_t t = 0; t < ys.size(); ++t) {
        Value term = scale_by(ys[t], slice(alpha, static_cast<int>(t), 1));
        acc = t == 0 ? term : add(acc, term);
    }
    return acc;
}

GateFusion Matcher::fuse_gated(const Value& v_i, const Value& v_ctx, const Value& f_i) const {
    GateFusion out;
    Value vt = v_ctx ? concat({v_i, v_ctx}) : v_i;
    if (!cfg.gated()) {
        out.v_action = linear(concat({vt, f_i}), leaf(wcat), leaf(bcat));
        return out;
    }
    out.ga = linear(vt, leaf(w5), leaf(b5));
    out.gb = linear(f_i, leaf(w6), leaf(b6));
    out.sigma = sigmoid(linear(concat({out.ga, out.gb}), leaf(w7), leaf(b7)));
    Value one_minus = add_scalar(scale(out.sigma, -1.0), 1.0);
    out.v_action = add(mul(out.sigma, out.ga), mul(one_minus, out.gb));
    return out;
}

ActionScore Matcher::score_action(const Value& v_action, const Value& q_action) const {
    ActionScore out;
    out.v_tilde = cfg.eq7_literal ? v_action : linear(v_action, leaf(w8), leaf(b8));
    out.x = l2_normalize(mul(out.v_tilde, q_action));
    out.s = linear(out.x, leaf(w9), leaf(b9));
    return out;
}

Value Matcher::pair_score(const Value& vt_actor, const Value& vt_action, const Value& q_actor,
                          const Value& q_action) const {
    Value total;
    if (cfg.has_actor()) {
        total = linear(l2_normalize(mul(vt_actor, q_actor)), leaf(w2), leaf(b2));
    }
    if (cfg.has_action()) {
        Value sa = linear(l2_normalize(mul(vt_action, q_action)), leaf(w9), leaf(b9));
        total = total ? add(total, sa) : sa;
    }
    return total;
}

MatchResult Matcher::match(const ProposalFeatures& feats, const Value& q_actor,
                           const Value& q_action, const std::vector<Box>& boxes) const {
    const int k = static_cast<int>(feats.v_actor.size());
    if (k < 1) throw ArgumentError("match: no proposals");
    MatchResult out;
    for (int i = 0; i < k; ++i) {
        Value s_total;
        if (cfg.has_actor()) {
            ActorScore a = score_actor(feats.v_actor[static_cast<size_t>(i)],
                                       feats.loc[static_cast<size_t>(i)], q_actor);
            out.vt_actor.push_back(a.v_tilde);
            s_total = a.s;
        }
        if (cfg.has_action()) {
            Value v_ctx;
            if (cfg.has_context())
                v_ctx = encode_context(feats.v_action, feats.v0, i, boxes);
            GateFusion gf = fuse_gated(feats.v_action[static_cast<size_t>(i)], v_ctx,
                                       feats.f[static_cast<size_t>(i)]);
            if (gf.sigma) out.sigma.push_back(gf.sigma);
            ActionScore ac = score_action(gf.v_action, q_action);
            out.vt_action.push_back(ac.v_tilde);
            s_total = s_total ? add(s_total, ac.s) : ac.s;
        }
        out.s.push_back(s_total);
        out.s_val.push_back(scalar(s_total));
    }
    out.selected = select_best(out.s_val);
    return out;
}

} // namespace refvid
