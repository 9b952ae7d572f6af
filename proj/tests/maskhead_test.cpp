#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "refvid/error.hpp"
#include "refvid/gradcheck.hpp"
#include "refvid/losses.hpp"
#include "refvid/mask_head.hpp"

using namespace refvid;

namespace {
Tensor rand_tensor(std::vector<int> shape, Rng& rng, double lo = -1, double hi = 1) {
    Tensor t(std::move(shape));
    for (double& x : t.v) x = rng.uniform(lo, hi);
    quantize(t);
    return t;
}

Mask filled_rect(int h, int w, int y0, int x0, int y1, int x1) {
    Mask m(h, w);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.at(y, x) = 1;
    return m;
}
} // namespace

TEST_CASE("mask head output shape, neutral prediction, strict interior") {
    MaskHeadConfig cfg;
    cfg.in_channels = 8;
    cfg.width = 4;
    Rng rng(3);
    MaskHead head = MaskHead::create(cfg, rng);

    Value kappa = head.predict(input(rand_tensor({8, 14, 14}, rng)));
    CHECK(kappa->val.shape == std::vector<int>{1, 28, 28});
    for (double v : kappa->val.v) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    for (const auto& p : head.params.items) p->value.fill(0);
    Value half = head.predict(input(rand_tensor({8, 14, 14}, rng)));
    for (double v : half->val.v) CHECK(v == doctest::Approx(0.5));

    CHECK_THROWS_AS(head.predict(input(Tensor::zeros({8, 7, 7}))), DimensionError);
    CHECK_THROWS_AS(head.predict(input(Tensor::zeros({4, 14, 14}))), DimensionError);
}

TEST_CASE("mask head gradient check") {
    MaskHeadConfig cfg;
    cfg.in_channels = 4;
    cfg.width = 3;
    Rng rng(5);
    MaskHead head = MaskHead::create(cfg, rng);
    Tensor in = rand_tensor({4, 14, 14}, rng);
    Mask target = filled_rect(28, 28, 6, 6, 20, 22);

    auto fn = [&]() { return seg_loss(head.predict(input(in)), target); };
    auto rep = gradient_check(fn, head.params.items, 1e-5, 10, 1);
    INFO("worst ", rep.worst_param, " err ", rep.max_rel_err);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("ground-truth projection onto the box grid") {
    // box exactly covering a filled rectangle -> all ones
    Mask gt = filled_rect(32, 32, 8, 4, 20, 16);
    Mask t = project_gt_mask(gt, Box{4, 8, 16, 20});
    CHECK(t.count() == 28 * 28);

    // box over empty background -> all zeros
    Mask t0 = project_gt_mask(gt, Box{20, 22, 30, 31});
    CHECK(t0.count() == 0);

    // box twice as wide as the filled part -> about half foreground
    Mask th = project_gt_mask(gt, Box{4, 8, 28, 20});
    const double frac = static_cast<double>(th.count()) / (28.0 * 28.0);
    CHECK(frac == doctest::Approx(0.5).epsilon(0.2)); // within 0.1 absolute

    CHECK_THROWS_AS(project_gt_mask(gt, Box{-4, -4, -1, -1}), DegenerateBoxError);
}

TEST_CASE("paste thresholds and confines to the box") {
    Tensor high = Tensor::full({1, 28, 28}, 0.9);
    Mask m = paste_mask(high, Box{4, 6, 12, 14}, 32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const bool inside = x + 0.5 > 4 && x + 0.5 < 12 && y + 0.5 > 6 && y + 0.5 < 14;
            CHECK(static_cast<bool>(m.at(y, x)) == inside);
        }

    Tensor low = Tensor::full({1, 28, 28}, 0.1);
    CHECK(paste_mask(low, Box{4, 6, 12, 14}, 32, 32).count() == 0);
}

TEST_CASE("project/paste round-trip recovers rectangles") {
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 8 + rng.uniform_int(17), w = 8 + rng.uniform_int(17);
        const int y0 = rng.uniform_int(32 - h), x0 = rng.uniform_int(32 - w);
        Mask gt = filled_rect(32, 32, y0, x0, y0 + h, x0 + w);

        // the rectangle's own box, half the time padded outward; pixels left
        // outside the box are unrecoverable by contract, so the box always
        // covers the rectangle
        Box box{static_cast<double>(x0), static_cast<double>(y0),
                static_cast<double>(x0 + w), static_cast<double>(y0 + h)};
        if (trial % 2) {
            box.x0 -= rng.uniform(0, 0.1) * w;
            box.y0 -= rng.uniform(0, 0.1) * h;
            box.x1 += rng.uniform(0, 0.1) * w;
            box.y1 += rng.uniform(0, 0.1) * h;
        }
        Mask target = project_gt_mask(gt, box);
        Tensor kappa({1, 28, 28});
        for (int i = 0; i < 28 * 28; ++i) kappa[i] = target.v[static_cast<size_t>(i)] ? 0.95 : 0.05;

        Mask pasted = paste_mask(kappa, box, 32, 32);
        CHECK(mask_iou(pasted, gt) >= 0.85);

        // support containment
        const Box cb = box.clamped(32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (pasted.at(y, x)) {
                    CHECK(x + 0.5 >= cb.x0);
                    CHECK(x + 0.5 <= cb.x1);
                    CHECK(y + 0.5 >= cb.y0);
                    CHECK(y + 0.5 <= cb.y1);
                }
    }
}
