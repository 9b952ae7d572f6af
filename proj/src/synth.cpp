#include "refvid/synth.hpp"

#include <cmath>

#include "refvid/error.hpp"

namespace refvid {

const char* to_word(ShapeKind s) {
    switch (s) {
        case ShapeKind::Square: return "square";
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Triangle: return "triangle";
    }
    return "?";
}

const char* to_word(ColorKind c) {
    switch (c) {
        case ColorKind::Red: return "red";
        case ColorKind::Green: return "green";
        case ColorKind::Blue: return "blue";
        case ColorKind::Yellow: return "yellow";
    }
    return "?";
}

std::vector<std::string> action_phrase(ActionKind a) {
    switch (a) {
        case ActionKind::MoveLeft: return {"moving", "left"};
        case ActionKind::MoveRight: return {"moving", "right"};
        case ActionKind::MoveUp: return {"moving", "up"};
        case ActionKind::MoveDown: return {"moving", "down"};
        case ActionKind::Grow: return {"growing"};
        case ActionKind::Shrink: return {"shrinking"};
    }
    return {};
}

namespace {

void action_direction(ActionKind a, double& dx, double& dy) {
    dx = dy = 0;
    switch (a) {
        case ActionKind::MoveLeft: dx = -1; break;
        case ActionKind::MoveRight: dx = 1; break;
        case ActionKind::MoveUp: dy = -1; break;
        case ActionKind::MoveDown: dy = 1; break;
        default: break;
    }
}

void color_rgb(ColorKind c, double rgb[3]) {
    rgb[0] = rgb[1] = rgb[2] = 0;
    switch (c) {
        case ColorKind::Red: rgb[0] = 1; break;
        case ColorKind::Green: rgb[1] = 1; break;
        case ColorKind::Blue: rgb[2] = 1; break;
        case ColorKind::Yellow: rgb[0] = rgb[1] = 1; break;
    }
}

bool point_in_shape(ShapeKind kind, double px, double py, double cx, double cy, double size) {
    const double hx = px - cx, hy = py - cy, half = size / 2.0;
    switch (kind) {
        case ShapeKind::Square: return std::abs(hx) <= half && std::abs(hy) <= half;
        case ShapeKind::Circle: return hx * hx + hy * hy <= half * half;
        case ShapeKind::Triangle: {
            const double u = hy + half; // distance below the apex
            if (u < 0 || u > size) return false;
            return std::abs(hx) <= u / 2.0;
        }
    }
    return false;
}

} // namespace

void ActorSpec::geometry_at(int t, double& cx, double& cy, double& size) const {
    cx = (start_box.x0 + start_box.x1) / 2.0;
    cy = (start_box.y0 + start_box.y1) / 2.0;
    size = start_box.width();
    if (is_translation()) {
        double dx, dy;
        action_direction(action, dx, dy);
        cx += dx * velocity * t;
        cy += dy * velocity * t;
    } else {
        const double factor = action == ActionKind::Grow ? 1.0 + velocity : 1.0 - velocity;
        size *= std::pow(factor, t);
    }
}

Box ActorSpec::box_at(int t) const {
    double cx, cy, size;
    geometry_at(t, cx, cy, size);
    return Box{cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2};
}

void GenConfig::validate() const {
    if (width != height || width < 32)
        throw ConfigError("generation requires square frames with H=W>=32, got " +
                          std::to_string(width) + "x" + std::to_string(height));
    if (frames < 4) throw ConfigError("generation requires T>=4");
    if (proposals < 2) throw ConfigError("generation requires K>=2");
    if (actors_min < 1 || actors_max > 4 || actors_min > actors_max)
        throw ConfigError("actor count range must lie within [1,4]");
    if (embed_dim < 4) throw ConfigError("embed_dim must be at least 4");
    if (max_query_len != 20) throw ConfigError("query length is fixed to 20");
}

Mask render_actor_mask(const ActorSpec& actor, int t, const GenConfig& cfg) {
    Mask m(cfg.height, cfg.width);
    double cx, cy, size;
    actor.geometry_at(t, cx, cy, size);
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x)
            if (point_in_shape(actor.shape, x + 0.5, y + 0.5, cx, cy, size)) m.at(y, x) = 1;
    return m;
}

Vocab build_vocab(const GenConfig& cfg) {
    Vocab v;
    v.tokens = {"<pad>", "the",  "red",    "green",   "blue",     "yellow", "square",
                "circle", "triangle", "is", "moving", "left",     "right",  "up",
                "down",   "growing", "shrinking", "in", "video",  "on",     "screen"};
    for (size_t i = 0; i < v.tokens.size(); ++i) v.ids[v.tokens[i]] = static_cast<int>(i);
    const int vn = v.size();
    v.table = Tensor::zeros({vn, cfg.embed_dim});
    Rng rng(cfg.vocab_seed);
    for (int r = 1; r < vn; ++r) {
        double norm2 = 0;
        std::vector<double> row(static_cast<size_t>(cfg.embed_dim));
        for (double& x : row) {
            x = rng.uniform(-1, 1);
            norm2 += x * x;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (int cdim = 0; cdim < cfg.embed_dim; ++cdim)
            v.table[static_cast<int64_t>(r) * cfg.embed_dim + cdim] = row[static_cast<size_t>(cdim)] * inv;
    }
    quantize(v.table);
    return v;
}

int Vocab::id(const std::string& word) const {
    auto it = ids.find(word);
    if (it == ids.end()) throw VocabError("word not in vocabulary: " + word);
    return it->second;
}

namespace {

ShapeKind random_shape(Rng& rng) { return static_cast<ShapeKind>(rng.uniform_int(3)); }
ColorKind random_color(Rng& rng) { return static_cast<ColorKind>(rng.uniform_int(4)); }
ActionKind random_action(Rng& rng) { return static_cast<ActionKind>(rng.uniform_int(6)); }

ShapeKind other_shape(ShapeKind s, Rng& rng) {
    ShapeKind r;
    do { r = random_shape(rng); } while (r == s);
    return r;
}
ColorKind other_color(ColorKind c, Rng& rng) {
    ColorKind r;
    do { r = random_color(rng); } while (r == c);
    return r;
}
ActionKind other_action(ActionKind a, Rng& rng) {
    ActionKind r;
    do { r = random_action(rng); } while (r == a);
    return r;
}

bool boxes_apart(const Box& a, const Box& b, double gap) {
    return a.x1 + gap <= b.x0 || b.x1 + gap <= a.x0 || a.y1 + gap <= b.y0 ||
           b.y1 + gap <= a.y0;
}

// Sample motion parameters and a start position such that the shape stays
// inside the frame on every frame and its annotated-frame box is disjoint
// from the ones already placed. Returns false when placement fails.
bool place_actor(ActorSpec& a, const GenConfig& cfg, Rng& rng,
                 const std::vector<Box>& taken) {
    const double w = cfg.width;
    const int last = cfg.frames - 1;
    for (int attempt = 0; attempt < 60; ++attempt) {
        double size0, max_size;
        if (a.action == ActionKind::Grow) {
            a.velocity = rng.uniform(0.03, 0.08);
            size0 = rng.uniform(0.18, 0.26) * w;
            max_size = size0 * std::pow(1.0 + a.velocity, last);
        } else if (a.action == ActionKind::Shrink) {
            a.velocity = rng.uniform(0.03, 0.08);
            size0 = rng.uniform(0.24, 0.34) * w;
            max_size = size0;
        } else {
            size0 = rng.uniform(0.22, 0.34) * w;
            max_size = size0;
            const int vmax = std::min(4, static_cast<int>((w - 2 - size0) / last));
            if (vmax < 1) continue;
            a.velocity = rng.uniform_int(1, vmax);
        }
        double ddx, ddy;
        action_direction(a.action, ddx, ddy);
        const double travel = a.is_translation() ? a.velocity * last : 0.0;
        // feasible interval for the start center on each axis
        const double m = max_size / 2 + 1.0;
        double x_lo = m + std::max(0.0, -ddx * travel);
        double x_hi = w - m - std::max(0.0, ddx * travel);
        double y_lo = m + std::max(0.0, -ddy * travel);
        double y_hi = w - m - std::max(0.0, ddy * travel);
        if (x_lo >= x_hi || y_lo >= y_hi) continue;
        const double cx = rng.uniform(x_lo, x_hi);
        const double cy = rng.uniform(y_lo, y_hi);
        a.start_box = Box{cx - size0 / 2, cy - size0 / 2, cx + size0 / 2, cy + size0 / 2};
        const Box at_ann = a.box_at(cfg.annotated_frame());
        bool ok = true;
        for (const Box& t : taken)
            if (!boxes_apart(at_ann, t, 1.0)) {
                ok = false;
                break;
            }
        if (ok) return true;
    }
    return false;
}

std::vector<ActorSpec> sample_scene(const GenConfig& cfg, Rng& rng, int& referent) {
    for (int scene_attempt = 0;; ++scene_attempt) {
        int n = rng.uniform_int(cfg.actors_min, cfg.actors_max);
        // shrink crowded scenes if placement keeps failing
        if (scene_attempt > 10) n = std::max(cfg.actors_min, n - 1);
        if (scene_attempt > 25) n = cfg.actors_min;
        referent = rng.uniform_int(n);

        std::vector<ActorSpec> actors(static_cast<size_t>(n));
        ActorSpec& ref = actors[static_cast<size_t>(referent)];
        ref.shape = random_shape(rng);
        ref.color = random_color(rng);
        ref.action = random_action(rng);

        bool triples_ok = true;
        for (int i = 0; i < n && triples_ok; ++i) {
            if (i == referent) continue;
            ActorSpec& d = actors[static_cast<size_t>(i)];
            bool unique = false;
            for (int attempt = 0; attempt < 40 && !unique; ++attempt) {
                const int share = 1 + rng.uniform_int(6); // proper nonempty subset of 3 bits
                d.shape = (share & 1) ? ref.shape : other_shape(ref.shape, rng);
                d.color = (share & 2) ? ref.color : other_color(ref.color, rng);
                d.action = (share & 4) ? ref.action : other_action(ref.action, rng);
                unique = true;
                for (int j = 0; j < n; ++j)
                    if (j != i && j != referent && actors[static_cast<size_t>(j)].same_triple(d))
                        unique = false;
            }
            triples_ok = unique;
        }
        if (!triples_ok) continue;

        std::vector<Box> taken;
        bool placed = true;
        for (auto& a : actors) {
            if (!place_actor(a, cfg, rng, taken)) {
                placed = false;
                break;
            }
            taken.push_back(a.box_at(cfg.annotated_frame()));
        }
        if (placed) return actors;
    }
}

std::vector<int> make_query(const std::vector<ActorSpec>& actors, int referent, Rng& rng,
                            const Vocab& vocab, const GenConfig& cfg, std::string& text) {
    const ActorSpec& ref = actors[static_cast<size_t>(referent)];
    std::vector<std::string> words = {"the", to_word(ref.color), to_word(ref.shape), "is"};
    for (const auto& w : action_phrase(ref.action)) words.push_back(w);
    if (rng.coin(1.0 / 3)) {
        if (rng.coin())
            words.insert(words.end(), {"in", "the", "video"});
        else
            words.insert(words.end(), {"on", "the", "screen"});
    }
    text.clear();
    std::vector<int> ids;
    for (const auto& w : words) {
        if (!text.empty()) text += ' ';
        text += w;
        ids.push_back(vocab.id(w));
    }
    if (static_cast<int>(ids.size()) > cfg.max_query_len)
        ids.resize(static_cast<size_t>(cfg.max_query_len));
    return ids;
}

} // namespace

VideoSample generate_sample(uint64_t seed, const GenConfig& cfg, const Vocab& vocab) {
    cfg.validate();
    Rng rng(seed * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL);

    VideoSample s;
    s.annotated_t = cfg.annotated_frame();
    s.actors = sample_scene(cfg, rng, s.referent);
    const int n_actors = static_cast<int>(s.actors.size());
    if (cfg.proposals < n_actors)
        throw ConfigError("K=" + std::to_string(cfg.proposals) + " proposals cannot cover " +
                          std::to_string(n_actors) + " actors");

    const int T = cfg.frames, H = cfg.height, W = cfg.width;
    s.frames = Tensor::zeros({T, 3, H, W});
    s.flow = Tensor::zeros({T, 3, H, W});
    const int64_t plane = static_cast<int64_t>(H) * W;

    for (int t = 0; t < T; ++t) {
        double* rgb = s.frames.data() + static_cast<int64_t>(t) * 3 * plane;
        double* flo = s.flow.data() + static_cast<int64_t>(t) * 3 * plane;
        for (const auto& a : s.actors) { // later actors paint on top
            double col[3];
            color_rgb(a.color, col);
            double cx, cy, size;
            a.geometry_at(t, cx, cy, size);
            double fdx = 0, fdy = 0;
            if (a.is_translation()) {
                action_direction(a.action, fdx, fdy);
                fdx *= a.velocity;
                fdy *= a.velocity;
            }
            const int y0 = std::max(0, static_cast<int>(cy - size)), y1 = std::min(H - 1, static_cast<int>(cy + size));
            const int x0 = std::max(0, static_cast<int>(cx - size)), x1 = std::min(W - 1, static_cast<int>(cx + size));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    if (!point_in_shape(a.shape, x + 0.5, y + 0.5, cx, cy, size)) continue;
                    const int64_t pix = static_cast<int64_t>(y) * W + x;
                    for (int ch = 0; ch < 3; ++ch) rgb[ch * plane + pix] = col[ch];
                    double dx = fdx, dy = fdy;
                    if (!a.is_translation()) {
                        const double sign = a.action == ActionKind::Grow ? 1.0 : -1.0;
                        dx = sign * a.velocity * (x + 0.5 - cx);
                        dy = sign * a.velocity * (y + 0.5 - cy);
                    }
                    flo[pix] = dx / kFlowNorm;
                    flo[plane + pix] = dy / kFlowNorm;
                    flo[2 * plane + pix] = std::sqrt(dx * dx + dy * dy) / kFlowNorm;
                }
        }
    }
    quantize(s.frames);
    quantize(s.flow);

    s.gt_mask = render_actor_mask(s.actors[static_cast<size_t>(s.referent)], s.annotated_t, cfg);
    int mnx = W, mny = H, mxx = -1, mxy = -1;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (s.gt_mask.at(y, x)) {
                mnx = std::min(mnx, x);
                mny = std::min(mny, y);
                mxx = std::max(mxx, x);
                mxy = std::max(mxy, y);
            }
    if (mxx < 0) throw StateError("generated an empty ground-truth mask");
    s.gt_box = Box{static_cast<double>(mnx), static_cast<double>(mny),
                   static_cast<double>(mxx + 1), static_cast<double>(mxy + 1)};

    // proposals: jittered actor boxes first, then random fillers up to K
    for (const auto& a : s.actors) {
        const Box b = a.box_at(s.annotated_t);
        const double jw = 0.1 * b.width(), jh = 0.1 * b.height();
        Box j{b.x0 + rng.uniform(-jw, jw), b.y0 + rng.uniform(-jh, jh),
              b.x1 + rng.uniform(-jw, jw), b.y1 + rng.uniform(-jh, jh)};
        j = j.clamped(W, H);
        if (j.width() < 1.5) j.x1 = std::min(static_cast<double>(W), j.x0 + 1.5);
        if (j.height() < 1.5) j.y1 = std::min(static_cast<double>(H), j.y0 + 1.5);
        s.proposals.push_back(j);
    }
    while (static_cast<int>(s.proposals.size()) < cfg.proposals) {
        const double bw = rng.uniform(4.0, W / 2.0), bh = rng.uniform(4.0, H / 2.0);
        const double cx = rng.uniform(bw / 2, W - bw / 2), cy = rng.uniform(bh / 2, H - bh / 2);
        s.proposals.push_back(Box{cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2});
    }

    double best = -1;
    for (size_t i = 0; i < s.proposals.size(); ++i) {
        const double iou = box_iou(s.proposals[i], s.gt_box);
        if (iou > best) {
            best = iou;
            s.gt_index = static_cast<int>(i);
        }
    }

    s.query_tokens = make_query(s.actors, s.referent, rng, vocab, cfg, s.query_text);
    return s;
}

VideoSample generate_sample(uint64_t seed, const GenConfig& cfg) {
    return generate_sample(seed, cfg, build_vocab(cfg));
}

} // namespace refvid
