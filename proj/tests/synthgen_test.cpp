#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "refvid/error.hpp"
#include "refvid/synth.hpp"
#include "refvid/util.hpp"

using namespace refvid;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("refvid_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("generation is deterministic per seed") {
    GenConfig cfg;
    const Vocab vocab = build_vocab(cfg);
    const VideoSample a = generate_sample(123, cfg, vocab);
    const VideoSample b = generate_sample(123, cfg, vocab);
    CHECK(a.frames.v == b.frames.v);
    CHECK(a.flow.v == b.flow.v);
    CHECK(a.gt_mask == b.gt_mask);
    CHECK(a.query_tokens == b.query_tokens);
    CHECK(a.gt_index == b.gt_index);
    REQUIRE(a.proposals.size() == b.proposals.size());
    for (size_t i = 0; i < a.proposals.size(); ++i) CHECK(a.proposals[i] == b.proposals[i]);

    const VideoSample c = generate_sample(124, cfg, vocab);
    CHECK(a.frames.v != c.frames.v);
}

TEST_CASE("single-actor scene: positive proposal is the jittered gt box") {
    GenConfig cfg;
    cfg.actors_min = cfg.actors_max = 1;
    cfg.proposals = 2;
    const Vocab vocab = build_vocab(cfg);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const VideoSample s = generate_sample(seed, cfg, vocab);
        REQUIRE(s.proposals.size() == 2);
        CHECK(box_iou(s.proposals[static_cast<size_t>(s.gt_index)], s.gt_box) >= 0.6);
    }
}

TEST_CASE("analytic flow of a pure translation") {
    GenConfig cfg;
    cfg.actors_min = cfg.actors_max = 1;
    const Vocab vocab = build_vocab(cfg);
    bool found = false;
    for (uint64_t seed = 0; seed < 400 && !found; ++seed) {
        const VideoSample s = generate_sample(seed, cfg, vocab);
        const ActorSpec& a = s.actors[static_cast<size_t>(s.referent)];
        if (a.action != ActionKind::MoveRight || a.velocity != 2.0) continue;
        found = true;
        const int t = s.annotated_t, H = cfg.height, W = cfg.width;
        const int64_t plane = static_cast<int64_t>(H) * W;
        const double* flo = s.flow.data() + static_cast<int64_t>(t) * 3 * plane;
        const Mask m = render_actor_mask(a, t, cfg);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const int64_t pix = static_cast<int64_t>(y) * W + x;
                if (m.at(y, x)) {
                    CHECK(flo[pix] == doctest::Approx(2.0 / kFlowNorm));
                    CHECK(flo[plane + pix] == doctest::Approx(0.0));
                    CHECK(flo[2 * plane + pix] == doctest::Approx(2.0 / kFlowNorm));
                } else {
                    CHECK(flo[pix] == 0.0);
                    CHECK(flo[plane + pix] == 0.0);
                }
            }
    }
    CHECK(found);
}

TEST_CASE("referent uniqueness, gt_index recompute, query bounds over 1000 samples") {
    GenConfig cfg;
    const Vocab vocab = build_vocab(cfg);
    int translations_checked = 0;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const VideoSample s = generate_sample(seed, cfg, vocab);
        const ActorSpec& ref = s.actors[static_cast<size_t>(s.referent)];

        int matches = 0;
        for (const auto& a : s.actors) matches += a.same_triple(ref);
        CHECK(matches == 1);

        int best = 0;
        double best_iou = -1;
        for (size_t i = 0; i < s.proposals.size(); ++i) {
            const double iou = box_iou(s.proposals[i], s.gt_box);
            if (iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(i);
            }
        }
        CHECK(best == s.gt_index);

        CHECK(s.query_tokens.size() <= 20);
        for (int id : s.query_tokens) {
            CHECK(id >= 0);
            CHECK(id < vocab.size());
        }
        CHECK(s.gt_mask.count() > 0);

        // flow consistency: consecutive masks of a translating referent are
        // exact shifts by the stored velocity
        if (ref.is_translation() && translations_checked < 50) {
            ++translations_checked;
            const Mask m0 = render_actor_mask(ref, s.annotated_t, cfg);
            const Mask m1 = render_actor_mask(ref, s.annotated_t + 1, cfg);
            double ddx, ddy;
            double cx0, cy0, sz0, cx1, cy1, sz1;
            ref.geometry_at(s.annotated_t, cx0, cy0, sz0);
            ref.geometry_at(s.annotated_t + 1, cx1, cy1, sz1);
            ddx = cx1 - cx0;
            ddy = cy1 - cy0;
            const int sx = static_cast<int>(std::lround(ddx));
            const int sy = static_cast<int>(std::lround(ddy));
            int64_t agree = 0, total = 0;
            for (int y = 0; y < cfg.height; ++y)
                for (int x = 0; x < cfg.width; ++x) {
                    if (!m0.at(y, x)) continue;
                    ++total;
                    const int ny = y + sy, nx = x + sx;
                    if (ny >= 0 && ny < cfg.height && nx >= 0 && nx < cfg.width &&
                        m1.at(ny, nx))
                        ++agree;
                }
            CHECK(total > 0);
            CHECK(static_cast<double>(agree) / static_cast<double>(total) >= 0.95);
        }
    }
    CHECK(translations_checked == 50);
}

TEST_CASE("vocab rows are unit, pad row zero, table deterministic") {
    GenConfig cfg;
    const Vocab v = build_vocab(cfg);
    CHECK(v.size() < 64);
    CHECK(v.tokens[0] == "<pad>");
    for (int d = 0; d < cfg.embed_dim; ++d) CHECK(v.table[d] == 0.0);
    for (int r = 1; r < v.size(); ++r) {
        double norm2 = 0;
        for (int d = 0; d < cfg.embed_dim; ++d) {
            const double x = v.table[static_cast<int64_t>(r) * cfg.embed_dim + d];
            norm2 += x * x;
        }
        CHECK(std::sqrt(norm2) == doctest::Approx(1.0).epsilon(1e-6));
    }
    const Vocab v2 = build_vocab(cfg);
    CHECK(v.table.v == v2.table.v);
    CHECK_THROWS_AS(v.id("zebra"), VocabError);
}

TEST_CASE("K smaller than actor count is a config error") {
    GenConfig cfg;
    cfg.actors_min = cfg.actors_max = 3;
    cfg.proposals = 2;
    const Vocab vocab = build_vocab(cfg);
    CHECK_THROWS_AS(generate_sample(5, cfg, vocab), ConfigError);
}

TEST_CASE("dataset writes a manifest with an 80/20 split and regenerates identically") {
    GenConfig cfg;
    auto dir = temp_dir("gen_a");
    generate_dataset(42, 10, cfg, dir);
    auto m = read_manifest(dir);
    REQUIRE(m.samples.size() == 10);
    CHECK(m.split_indices("train").size() == 8);
    CHECK(m.split_indices("test").size() == 2);
    CHECK(m.cfg.width == cfg.width);

    auto dir2 = temp_dir("gen_b");
    generate_dataset(42, 10, cfg, dir2);
    CHECK(fnv1a64_file(dir / "manifest.json") == fnv1a64_file(dir2 / "manifest.json"));
    for (const auto& rec : m.samples)
        CHECK(fnv1a64_file(dir / rec.dir / "frames.bin") ==
              fnv1a64_file(dir2 / rec.dir / "frames.bin"));

    // disjoint seeds give distinct sample contents
    std::set<uint64_t> sums;
    for (const auto& rec : m.samples) sums.insert(fnv1a64_file(dir / rec.dir / "frames.bin"));
    CHECK(sums.size() == 10);

    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("sample round-trip is lossless; corrupt files are format errors") {
    GenConfig cfg;
    auto dir = temp_dir("roundtrip");
    generate_dataset(7, 2, cfg, dir);
    auto m = read_manifest(dir);
    const Vocab vocab = build_vocab(cfg);
    const VideoSample orig = generate_sample(7, cfg, vocab);
    VideoSample back = read_sample(dir, m.samples[0]);

    CHECK(back.frames.v == orig.frames.v); // bit-exact floats
    CHECK(back.flow.v == orig.flow.v);
    CHECK(back.gt_mask == orig.gt_mask);
    CHECK(back.query_tokens == orig.query_tokens);
    CHECK(back.gt_index == orig.gt_index);
    CHECK(back.annotated_t == orig.annotated_t);
    CHECK(back.gt_box == orig.gt_box);
    REQUIRE(back.proposals.size() == orig.proposals.size());
    for (size_t i = 0; i < back.proposals.size(); ++i)
        CHECK(back.proposals[i] == orig.proposals[i]);

    // truncated blob
    {
        auto bytes = read_file_bytes(dir / m.samples[0].dir / "frames.bin");
        bytes.resize(bytes.size() / 2);
        write_file_bytes(dir / m.samples[0].dir / "frames.bin", bytes.data(), bytes.size());
        CHECK_THROWS_AS(read_sample(dir, m.samples[0]), FormatError);
    }
    // manifest shape disagreeing with blob length
    {
        SampleRecord rec = m.samples[1];
        rec.flow_shape[0] += 1;
        CHECK_THROWS_AS(read_sample(dir, rec), FormatError);
    }
    fs::remove_all(dir);
}
