#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "refvid/error.hpp"
#include "refvid/gradcheck.hpp"
#include "refvid/losses.hpp"
#include "refvid/matcher.hpp"

using namespace refvid;

namespace {

Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1, double hi = 1) {
    Tensor t(std::move(shape));
    for (double& x : t.v) x = rng.uniform(lo, hi);
    quantize(t);
    return t;
}

MatcherConfig small_cfg() {
    MatcherConfig c;
    c.c_v = 6;
    c.c_c = 4;
    c.c_e = 4;
    return c;
}

// fabricate proposal features straight from tensors
ProposalFeatures fake_feats(Rng& rng, int k, int c_v) {
    ProposalFeatures f;
    for (int i = 0; i < k; ++i) {
        f.v_actor.push_back(input(rand_tensor({c_v}, rng)));
        f.v_action.push_back(f.v_actor.back());
        f.f.push_back(input(rand_tensor({c_v}, rng)));
        f.loc.push_back(rand_tensor({5}, rng, 0, 1));
    }
    f.v0 = input(rand_tensor({c_v}, rng));
    return f;
}

std::vector<Box> stacked_boxes(int k) {
    std::vector<Box> out;
    for (int i = 0; i < k; ++i)
        out.push_back(Box{2.0 + i, 3.0 + 2 * i, 8.0 + i, 9.0 + 2 * i});
    return out;
}

} // namespace

TEST_CASE("actor score: zero query, scale invariance, hand case") {
    Rng rng(3);
    Matcher m = Matcher::create(small_cfg(), rng);
    Value v = input(rand_tensor({6}, rng));
    Tensor loc = rand_tensor({5}, rng, 0, 1);

    m.b2->value[0] = 0.37;
    auto zero_q = m.score_actor(v, loc, input(Tensor::zeros({4})));
    for (double x : zero_q.x->val.v) CHECK(x == 0.0);
    CHECK(scalar(zero_q.s) == doctest::Approx(0.37));

    Tensor q = rand_tensor({4}, rng);
    Tensor q_scaled = q;
    for (double& x : q_scaled.v) x *= 3.7;
    auto a = m.score_actor(v, loc, input(q));
    auto b = m.score_actor(v, loc, input(q_scaled));
    CHECK(scalar(a.s) == doctest::Approx(scalar(b.s)).epsilon(1e-5));

    // force v_tilde = (1,1,...) via W1=0, b1=1; q = e0 picks one coordinate
    m.w1->value.fill(0);
    m.b1->value.fill(1.0);
    Tensor q_onehot = Tensor::zeros({4});
    q_onehot[0] = 1.0;
    auto hand = m.score_actor(v, loc, input(q_onehot));
    CHECK(hand.x->val[0] == doctest::Approx(1.0));
    for (int i = 1; i < 4; ++i) CHECK(hand.x->val[i] == doctest::Approx(0.0));
    CHECK(scalar(hand.s) == doctest::Approx(m.w2->value[0] + m.b2->value[0]).epsilon(1e-6));
}

TEST_CASE("context encoding: normalization, length, canonical order") {
    Rng rng(7);
    Matcher m = Matcher::create(small_cfg(), rng);

    auto feats = fake_feats(rng, 4, 6);
    auto boxes = stacked_boxes(4);
    Value attn;
    Value ctx = m.encode_context(feats.v_action, feats.v0, 1, boxes, &attn);
    CHECK(ctx->val.dim(0) == 4);
    REQUIRE(attn->val.dim(0) == 4); // v0 plus K-1 others
    double s = 0;
    for (double a : attn->val.v) s += a;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));

    // permuting proposal storage changes nothing: the sequence is sorted by box
    std::vector<int> perm = {2, 0, 3, 1};
    std::vector<Value> v_perm(4);
    std::vector<Box> b_perm(4);
    for (int i = 0; i < 4; ++i) {
        v_perm[static_cast<size_t>(i)] = feats.v_action[static_cast<size_t>(perm[static_cast<size_t>(i)])];
        b_perm[static_cast<size_t>(i)] = boxes[static_cast<size_t>(perm[static_cast<size_t>(i)])];
    }
    // target 1 in original order is stored at permuted position 3
    Value ctx_perm = m.encode_context(v_perm, feats.v0, 3, b_perm);
    CHECK(ctx->val.v == ctx_perm->val.v);

    // K=2 sequence is [v0, other]
    auto feats2 = fake_feats(rng, 2, 6);
    Value attn2;
    m.encode_context(feats2.v_action, feats2.v0, 0, stacked_boxes(2), &attn2);
    CHECK(attn2->val.dim(0) == 2);

    auto feats1 = fake_feats(rng, 1, 6);
    CHECK_THROWS_AS(m.encode_context(feats1.v_action, feats1.v0, 0, stacked_boxes(1)),
                    ContextError);
}

TEST_CASE("gated fusion: neutral gate, saturation, fixed point") {
    Rng rng(11);
    Matcher m = Matcher::create(small_cfg(), rng);
    Value v = input(rand_tensor({6}, rng));
    Value ctx = input(rand_tensor({4}, rng));
    Value f = input(rand_tensor({6}, rng));

    SUBCASE("zero gate parameters average the two branches") {
        m.w7->value.fill(0);
        m.b7->value.fill(0);
        auto g = m.fuse_gated(v, ctx, f);
        for (int i = 0; i < 4; ++i) {
            CHECK(g.sigma->val[i] == doctest::Approx(0.5));
            CHECK(g.v_action->val[i] ==
                  doctest::Approx(0.5 * (g.ga->val[i] + g.gb->val[i])).epsilon(1e-6));
        }
    }

    SUBCASE("large gate bias saturates toward the appearance branch") {
        m.w7->value.fill(0);
        m.b7->value.fill(40.0);
        auto g = m.fuse_gated(v, ctx, f);
        for (int i = 0; i < 4; ++i)
            CHECK(g.v_action->val[i] == doctest::Approx(g.ga->val[i]).epsilon(1e-5));
    }

    SUBCASE("equal branches are a fixed point of any gate") {
        m.w5->value.fill(0);
        m.w6->value.fill(0);
        for (int i = 0; i < 4; ++i) {
            m.b5->value[i] = 0.3 * (i + 1);
            m.b6->value[i] = 0.3 * (i + 1);
        }
        auto g = m.fuse_gated(v, ctx, f);
        for (int i = 0; i < 4; ++i)
            CHECK(g.v_action->val[i] == doctest::Approx(0.3 * (i + 1)).epsilon(1e-6));
    }

    SUBCASE("gate strictly inside (0,1)") {
        auto g = m.fuse_gated(v, ctx, f);
        for (double x : g.sigma->val.v) {
            CHECK(x > 0.0);
            CHECK(x < 1.0);
        }
    }
}

TEST_CASE("action score mirrors the actor pattern; literal Eq.7 flag") {
    Rng rng(13);
    Matcher m = Matcher::create(small_cfg(), rng);
    Value va = input(rand_tensor({4}, rng));

    m.b9->value[0] = -0.21;
    auto z = m.score_action(va, input(Tensor::zeros({4})));
    CHECK(scalar(z.s) == doctest::Approx(-0.21));

    Tensor q = rand_tensor({4}, rng);
    Tensor q3 = q;
    for (double& x : q3.v) x *= 9.0;
    auto a = m.score_action(va, input(q));
    auto b = m.score_action(va, input(q3));
    CHECK(scalar(a.s) == doctest::Approx(scalar(b.s)).epsilon(1e-5));
    CHECK(a.v_tilde != va); // transformed by W8 in the default reading

    MatcherConfig lit = small_cfg();
    lit.eq7_literal = true;
    Matcher ml = Matcher::create(lit, rng);
    CHECK(ml.w8 == nullptr);
    auto c = ml.score_action(va, input(q));
    CHECK(c.v_tilde == va); // printed form normalizes the raw fused vector
}

TEST_CASE("combined selection") {
    CHECK(select_best({1.0, 0.5}) == 0);
    CHECK(select_best({0.5, 0.5, 0.5}) == 0); // ties to the lowest index
    CHECK(select_best({0.1, 0.9, 0.3}) == 1);
    // adding a constant to one module's scores shifts all sums equally
    std::vector<double> s1 = {1.0 + 0.0, 0.0 + 0.5};
    std::vector<double> s2 = {1.0 + 7.0, 0.0 + 7.5};
    CHECK(select_best(s1) == select_best(s2));
    CHECK_THROWS_AS(select_best({}), ArgumentError);
}

TEST_CASE("full matcher with matching loss passes the gradient check") {
    Rng rng(17);
    Matcher m = Matcher::create(small_cfg(), rng);
    const int k = 3;
    auto boxes = stacked_boxes(k);

    // two fabricated samples with fixed positives
    Rng data_rng(23);
    std::vector<Tensor> vs, fs, q_actor, q_action;
    for (int b = 0; b < 2; ++b) {
        for (int i = 0; i < k; ++i) {
            vs.push_back(rand_tensor({6}, data_rng));
            fs.push_back(rand_tensor({6}, data_rng));
        }
        q_actor.push_back(rand_tensor({4}, data_rng));
        q_action.push_back(rand_tensor({4}, data_rng));
    }

    auto fn = [&]() {
        std::vector<std::vector<Value>> own(2);
        std::vector<MatchResult> results;
        std::vector<Value> qa, qc;
        for (int b = 0; b < 2; ++b) {
            ProposalFeatures feats;
            for (int i = 0; i < k; ++i) {
                feats.v_actor.push_back(input(vs[static_cast<size_t>(b * k + i)]));
                feats.v_action.push_back(feats.v_actor.back());
                feats.f.push_back(input(fs[static_cast<size_t>(b * k + i)]));
                feats.loc.push_back(location_feature(boxes[static_cast<size_t>(i)], 32, 32));
            }
            feats.v0 = input(Tensor::full({6}, 0.2));
            qa.push_back(input(q_actor[static_cast<size_t>(b)]));
            qc.push_back(input(q_action[static_cast<size_t>(b)]));
            MatchResult r = m.match(feats, qa.back(), qc.back(), boxes);
            own[static_cast<size_t>(b)] = r.s;
            results.push_back(std::move(r));
        }
        auto cross = [&](size_t bv, size_t bq) {
            const auto& r = results[bv];
            return m.pair_score(r.vt_actor[1], r.vt_action[1], qa[bq], qc[bq]);
        };
        return matching_loss(own, {1, 1}, cross, 0.1);
    };
    auto rep = gradient_check(fn, m.params.items, 1e-5, 12, 5);
    INFO("worst ", rep.worst_param, " err ", rep.max_rel_err);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("variant configurations create only what they use") {
    Rng rng(29);
    MatcherConfig c = small_cfg();
    c.variant = Variant::ActorOnly;
    Matcher actor_only = Matcher::create(c, rng);
    CHECK(actor_only.w9 == nullptr);
    CHECK(actor_only.w5 == nullptr);

    c.variant = Variant::ActionOnly;
    Matcher action_only = Matcher::create(c, rng);
    CHECK(action_only.w1 == nullptr);
    CHECK(action_only.w9 != nullptr);

    c.variant = Variant::NoGatedFusion;
    Matcher concat_fusion = Matcher::create(c, rng);
    CHECK(concat_fusion.w7 == nullptr);
    CHECK(concat_fusion.wcat != nullptr);
    Value v = input(rand_tensor({6}, rng));
    Value ctx = input(rand_tensor({4}, rng));
    Value f = input(rand_tensor({6}, rng));
    auto g = concat_fusion.fuse_gated(v, ctx, f);
    CHECK(g.sigma == nullptr);
    CHECK(g.v_action->val.dim(0) == 4);

    c.variant = Variant::NoLocation;
    Matcher no_loc = Matcher::create(c, rng);
    CHECK(no_loc.w1->value.dim(1) == 6); // no 5-dim location block

    CHECK_THROWS_AS(variant_from_string("bogus"), ConfigError);
    CHECK(variant_from_string("no_gated_fusion") == Variant::NoGatedFusion);
}
