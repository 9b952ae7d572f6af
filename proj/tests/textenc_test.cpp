#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "refvid/error.hpp"
#include "refvid/gradcheck.hpp"
#include "refvid/text_encoder.hpp"

using namespace refvid;

namespace {
GenConfig small_cfg() {
    GenConfig g;
    g.embed_dim = 8;
    return g;
}
} // namespace

TEST_CASE("embed_tokens pads, truncates, stays frozen") {
    GenConfig g = small_cfg();
    Vocab v = build_vocab(g);

    Tensor e = embed_tokens({0, 1, 2}, v);
    CHECK(e.shape == std::vector<int>{20, 8});
    for (int d = 0; d < 8; ++d) CHECK(e[d] == 0.0); // pad id row
    for (int t = 3; t < 20; ++t)
        for (int d = 0; d < 8; ++d) CHECK(e[t * 8 + d] == 0.0); // padded rows

    std::vector<int> long_query(22, 1);
    Tensor t22 = embed_tokens(long_query, v);
    CHECK(t22.shape == std::vector<int>{20, 8});

    Tensor again = embed_tokens({0, 1, 2}, v);
    CHECK(e.v == again.v);

    CHECK_THROWS_AS(embed_tokens({v.size()}, v), VocabError);
    CHECK_THROWS_AS(embed_tokens({-1}, v), VocabError);
}

TEST_CASE("word states are 4d wide; zero weights give zero states") {
    GenConfig g = small_cfg();
    Vocab v = build_vocab(g);
    TextEncoderConfig tc;
    tc.embed_dim = 8;
    tc.per_dir = 3;
    Rng rng(2);
    TextEncoder enc = TextEncoder::create(tc, rng);

    auto q = enc.encode({1, 2, 3, 4}, v);
    CHECK(q.valid_len == 4);
    REQUIRE(q.word_states.size() == 4);
    CHECK(q.word_states[0]->val.dim(0) == 12); // 4 * per_dir

    for (const auto& p : enc.params.items) p->value.fill(0);
    auto qz = enc.encode({1, 2, 3}, v);
    for (const auto& h : qz.word_states)
        for (double x : h->val.v) CHECK(x == 0.0);
    // zero attention weights: uniform over valid positions
    for (int t = 0; t < qz.valid_len; ++t)
        CHECK(qz.gamma_actor[t] == doctest::Approx(1.0 / 3));
}

TEST_CASE("attention normalizes over valid positions and is zero on padding") {
    GenConfig g = small_cfg();
    Vocab v = build_vocab(g);
    TextEncoderConfig tc;
    tc.embed_dim = 8;
    tc.per_dir = 4;
    Rng rng(5);
    TextEncoder enc = TextEncoder::create(tc, rng);

    auto q = enc.encode({1, 5, 7, 9, 2}, v);
    double sum_a = 0, sum_b = 0;
    for (int t = 0; t < 20; ++t) {
        sum_a += q.gamma_actor[t];
        sum_b += q.gamma_action[t];
        if (t >= q.valid_len) {
            CHECK(q.gamma_actor[t] == 0.0);
            CHECK(q.gamma_action[t] == 0.0);
        }
    }
    CHECK(sum_a == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sum_b == doctest::Approx(1.0).epsilon(1e-6));

    // convex-combination bound on the pooled vector
    double max_abs_e = 0, max_abs_q = 0;
    for (int64_t i = 0; i < q.embeddings.numel(); ++i)
        max_abs_e = std::max(max_abs_e, std::abs(q.embeddings[i]));
    for (double x : q.q_actor->val.v) max_abs_q = std::max(max_abs_q, std::abs(x));
    CHECK(max_abs_q <= max_abs_e + 1e-9);
}

TEST_CASE("pooling selects, averages, and mixes convexly") {
    // one-hot and uniform weights over two basis vectors, plus the printed
    // (0.25, 0.75) mix
    Value e1 = input(Tensor::from({2}, {1, 0}));
    Value e2 = input(Tensor::from({2}, {0, 1}));

    Value onehot = softmax(input(Tensor::from({2}, {-1000.0, 1000.0})));
    Value sel = add(scale_by(e1, slice(onehot, 0, 1)), scale_by(e2, slice(onehot, 1, 1)));
    CHECK(sel->val[0] == doctest::Approx(0.0));
    CHECK(sel->val[1] == doctest::Approx(1.0));

    Value quarters = input(Tensor::from({2}, {0.25, 0.75}));
    Value mix = add(scale_by(e1, slice(quarters, 0, 1)), scale_by(e2, slice(quarters, 1, 1)));
    CHECK(mix->val[0] == doctest::Approx(0.25));
    CHECK(mix->val[1] == doctest::Approx(0.75));
}

TEST_CASE("appending pad tokens changes nothing") {
    GenConfig g = small_cfg();
    Vocab v = build_vocab(g);
    TextEncoderConfig tc;
    tc.embed_dim = 8;
    tc.per_dir = 4;
    Rng rng(11);
    TextEncoder enc = TextEncoder::create(tc, rng);

    std::vector<int> ids = {1, 4, 8, 9, 10, 11};
    std::vector<int> padded = ids;
    padded.insert(padded.end(), {0, 0, 0});

    auto a = enc.encode(ids, v);
    auto b = enc.encode(padded, v);
    CHECK(a.valid_len == b.valid_len);
    for (int t = 0; t < a.valid_len; ++t) {
        CHECK(a.gamma_actor[t] == doctest::Approx(b.gamma_actor[t]).epsilon(1e-6));
        CHECK(a.gamma_action[t] == doctest::Approx(b.gamma_action[t]).epsilon(1e-6));
    }
    for (int d = 0; d < 8; ++d) {
        CHECK(a.q_actor->val[d] == doctest::Approx(b.q_actor->val[d]).epsilon(1e-6));
        CHECK(a.q_action->val[d] == doctest::Approx(b.q_action->val[d]).epsilon(1e-6));
    }

    CHECK_THROWS_AS(enc.encode({}, v), ArgumentError);
    CHECK_THROWS_AS(enc.encode({0, 0}, v), ArgumentError); // nothing but padding
}

TEST_CASE("gradient check through encode, attend and pool") {
    GenConfig g = small_cfg();
    Vocab v = build_vocab(g);
    TextEncoderConfig tc;
    tc.embed_dim = 8;
    tc.per_dir = 2;
    Rng rng(21);
    TextEncoder enc = TextEncoder::create(tc, rng);
    Tensor weight_a = Tensor::from({8}, {0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.7, -0.1});

    auto fn = [&]() {
        auto q = enc.encode({1, 6, 9, 12}, v);
        return add(sum(mul(q.q_actor, input(weight_a))), sum(q.q_action));
    };
    auto rep = gradient_check(fn, enc.params.items, 1e-5, 16, 3);
    INFO("worst ", rep.worst_param, " err ", rep.max_rel_err);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("pool_hidden switch requires matching widths") {
    TextEncoderConfig tc;
    tc.embed_dim = 8;
    tc.per_dir = 4; // 4d = 16 != 8
    tc.pool_hidden = true;
    Rng rng(1);
    CHECK_THROWS_AS(TextEncoder::create(tc, rng), ConfigError);

    tc.per_dir = 2; // 4d = 8 == C_e
    TextEncoder enc = TextEncoder::create(tc, rng);
    GenConfig g = small_cfg();
    Vocab v = build_vocab(g);
    auto q = enc.encode({1, 2, 3}, v);
    CHECK(q.q_actor->val.dim(0) == 8);
}
