#include "refvid/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "refvid/error.hpp"
#include "refvid/losses.hpp"
#include "refvid/util.hpp"

namespace refvid {

namespace fs = std::filesystem;

LoadedDataset load_dataset(const fs::path& dir) {
    LoadedDataset out;
    DatasetManifest manifest = read_manifest(dir);
    out.gen = manifest.cfg;
    out.vocab = read_vocab(dir);
    for (const auto& rec : manifest.samples) {
        TrainItem item = to_train_item(read_sample(dir, rec));
        if (rec.split == "train")
            out.train.push_back(std::move(item));
        else
            out.test.push_back(std::move(item));
    }
    return out;
}

namespace {

constexpr char kCheckpointMagic[4] = {'R', 'V', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!f) throw FormatError("checkpoint truncated");
    return v;
}

void put_string(std::ofstream& f, const std::string& s) {
    put<uint32_t>(f, static_cast<uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& f) {
    const auto n = get<uint32_t>(f);
    std::string s(n, '\0');
    f.read(s.data(), n);
    if (!f) throw FormatError("checkpoint truncated");
    return s;
}

void put_tensor_f32(std::ofstream& f, const Tensor& t) {
    std::vector<float> buf(static_cast<size_t>(t.numel()));
    for (int64_t i = 0; i < t.numel(); ++i) buf[static_cast<size_t>(i)] = static_cast<float>(t[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * 4));
}

void get_tensor_f32(std::ifstream& f, Tensor& t) {
    std::vector<float> buf(static_cast<size_t>(t.numel()));
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!f) throw FormatError("checkpoint truncated");
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(buf[static_cast<size_t>(i)]);
}

std::string model_section_of(const std::string& canonical_text) {
    std::string out;
    size_t pos = 0;
    while (pos < canonical_text.size()) {
        size_t end = canonical_text.find('\n', pos);
        if (end == std::string::npos) end = canonical_text.size();
        const std::string line = canonical_text.substr(pos, end - pos);
        if (line.rfind("model.", 0) == 0) out += line + "\n";
        pos = end + 1;
    }
    return out;
}

} // namespace

void save_checkpoint(const fs::path& path, const GroundingModel& model,
                     const OptimState& optim, int64_t iteration, const Rng& batch_rng,
                     const Config& cfg) {
    require_little_endian();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(kCheckpointMagic, 4);
    put<uint32_t>(f, kCheckpointVersion);
    put<uint64_t>(f, cfg.hash());
    put_string(f, cfg.canonical());
    put<int64_t>(f, iteration);
    put<uint64_t>(f, batch_rng.state);
    put<uint32_t>(f, static_cast<uint32_t>(model.params.items.size()));
    for (const auto& p : model.params.items) {
        put_string(f, p->name);
        put<uint32_t>(f, static_cast<uint32_t>(p->value.rank()));
        for (int d : p->value.shape) put<int32_t>(f, d);
        put_tensor_f32(f, p->value);
    }
    for (const auto& p : model.params.items) {
        auto it = optim.velocity.find(p.get());
        if (it == optim.velocity.end()) {
            put_tensor_f32(f, Tensor::zeros(p->value.shape));
        } else {
            put_tensor_f32(f, it->second);
        }
    }
    if (!f) throw IoError("failed writing " + path.string());
}

void load_checkpoint(const fs::path& path, GroundingModel& model, OptimState& optim,
                     int64_t& iteration, Rng& batch_rng, const Config& cfg) {
    require_little_endian();
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw FormatError("not a checkpoint file: " + path.string());
    if (get<uint32_t>(f) != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version");
    (void)get<uint64_t>(f); // stored full-config hash, informational
    const std::string stored_cfg = get_string(f);
    if (model_section_of(stored_cfg) != cfg.model_signature())
        throw CompatibilityError("checkpoint model section does not match the current config");
    iteration = get<int64_t>(f);
    batch_rng.state = get<uint64_t>(f);
    const auto n = get<uint32_t>(f);
    if (n != model.params.items.size())
        throw CompatibilityError("checkpoint has " + std::to_string(n) + " params, model has " +
                                 std::to_string(model.params.items.size()));
    for (auto& p : model.params.items) {
        const std::string name = get_string(f);
        if (name != p->name)
            throw CompatibilityError("checkpoint param " + name + " where " + p->name +
                                     " expected");
        const auto rank = get<uint32_t>(f);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = get<int32_t>(f);
        if (shape != p->value.shape)
            throw CompatibilityError("checkpoint shape mismatch for " + p->name);
        get_tensor_f32(f, p->value);
    }
    optim.velocity.clear();
    for (auto& p : model.params.items) {
        Tensor vel = Tensor::zeros(p->value.shape);
        get_tensor_f32(f, vel);
        optim.velocity.emplace(p.get(), std::move(vel));
    }
}

PhasePlan phase_at(const std::string& strategy, int iter, int total) {
    PhasePlan p;
    if (strategy == "joint") return p;
    const bool first_half = iter < total / 2;
    const bool matching_first = strategy == "matching_then_seg";
    if (first_half == matching_first) {
        p.use_seg = false;
        p.freeze_seg = true;
    } else {
        p.use_mat = false;
        p.freeze_match = true;
    }
    return p;
}

namespace {

std::vector<int> pick_batch(Rng& rng, int n, int b) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(b));
    while (static_cast<int>(out.size()) < b) {
        const int c = rng.uniform_int(n);
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
}

std::string format_curve(const std::vector<StepRecord>& curve) {
    std::string text = "step,L,L_mat,L_seg\n";
    char buf[128];
    for (const auto& r : curve) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.step, r.total, r.mat, r.seg);
        text += buf;
    }
    return text;
}

} // namespace

TrainResult train(const Config& cfg, const fs::path& dataset_dir, const fs::path& out_dir,
                  const std::optional<fs::path>& resume) {
    cfg.validate();
    LoadedDataset data = load_dataset(dataset_dir);
    if (data.train.empty()) throw ArgumentError("dataset has no training split");
    if (static_cast<int>(data.train.size()) < cfg.batch)
        throw ConfigError("batch size " + std::to_string(cfg.batch) +
                          " exceeds training set of " + std::to_string(data.train.size()));
    if (data.vocab.table.dim(1) != cfg.model.c_e)
        throw CompatibilityError("dataset embedding width " +
                                 std::to_string(data.vocab.table.dim(1)) +
                                 " does not match model.c_e " + std::to_string(cfg.model.c_e));

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string());

    GroundingModel model = GroundingModel::create(cfg.model, cfg.seed);
    OptimState optim;
    optim.momentum = cfg.momentum;
    optim.weight_decay = cfg.weight_decay;
    Rng batch_rng = Rng(cfg.seed).fork(0xBA7C4ULL);
    int64_t start_iter = 0;
    if (resume) load_checkpoint(*resume, model, optim, start_iter, batch_rng, cfg);

    TrainResult result;
    result.checkpoint_path = out_dir / "checkpoint.bin";
    result.losses_path = out_dir / "losses.csv";

    const int n_train = static_cast<int>(data.train.size());
    for (int iter = static_cast<int>(start_iter); iter < cfg.iters; ++iter) {
        const PhasePlan phase = phase_at(cfg.strategy, iter, cfg.iters);
        for (const auto& p : model.seg.params.items) p->trainable = !phase.freeze_seg;
        for (const auto& p : model.matcher.params.items) p->trainable = !phase.freeze_match;
        for (const auto& p : model.text.params.items) p->trainable = !phase.freeze_match;
        optim.learning_rate = iter >= cfg.lr_drop_at ? cfg.lr * 0.1 : cfg.lr;

        const std::vector<int> batch = pick_batch(batch_rng, n_train, cfg.batch);
        StepRecord rec;
        rec.step = iter;
        Value loss;
        auto dump_and_abort = [&](const std::string& why) {
            write_file_text(out_dir / "losses.csv", format_curve(result.curve));
            nlohmann::json dump{{"step", iter},
                                {"reason", why},
                                {"L", rec.total},
                                {"L_mat", rec.mat},
                                {"L_seg", rec.seg}};
            write_file_text(out_dir / "diverged.json", dump.dump(2));
            throw NumericError("training diverged at step " + std::to_string(iter) + ": " + why);
        };
        try {
            std::vector<GroundingModel::SampleForward> fwd;
            fwd.reserve(batch.size());
            for (int idx : batch)
                fwd.push_back(model.forward(data.train[static_cast<size_t>(idx)], data.vocab));

            if (phase.use_mat) {
                std::vector<std::vector<Value>> own(batch.size());
                std::vector<int> positive(batch.size());
                for (size_t b = 0; b < batch.size(); ++b) {
                    own[b] = fwd[b].match.s;
                    positive[b] = data.train[static_cast<size_t>(batch[b])].gt_index;
                }
                auto cross = [&](size_t bv, size_t bq) {
                    const auto& r = fwd[bv].match;
                    const int pos = positive[bv];
                    Value va =
                        r.vt_actor.empty() ? Value() : r.vt_actor[static_cast<size_t>(pos)];
                    Value vc =
                        r.vt_action.empty() ? Value() : r.vt_action[static_cast<size_t>(pos)];
                    return model.matcher.pair_score(va, vc, fwd[bq].query.q_actor,
                                                    fwd[bq].query.q_action);
                };
                Value l_mat = matching_loss(own, positive, cross, cfg.epsilon);
                rec.mat = scalar(l_mat);
                loss = l_mat;
            }
            if (phase.use_seg) {
                Value seg_acc;
                for (size_t b = 0; b < batch.size(); ++b) {
                    const TrainItem& item = data.train[static_cast<size_t>(batch[b])];
                    Value kappa = model.predict_mask(fwd[b], item.gt_index);
                    Mask target = project_gt_mask(
                        item.gt_mask, item.proposals[static_cast<size_t>(item.gt_index)]);
                    Value l = seg_loss(kappa, target);
                    seg_acc = seg_acc ? add(seg_acc, l) : l;
                }
                Value l_seg = scale(seg_acc, 1.0 / static_cast<double>(batch.size()));
                rec.seg = scalar(l_seg);
                loss = loss ? total_loss(loss, l_seg, cfg.lambda) : scale(l_seg, cfg.lambda);
            }
            rec.total = scalar(loss);
        } catch (const NumericError& e) {
            dump_and_abort(e.what());
        }
        if (!std::isfinite(rec.total)) dump_and_abort("non-finite loss");

        model.params.zero_grads();
        backward(loss);
        sgd_update(model.params.items, optim);
        result.curve.push_back(rec);
        if ((iter + 1) % 200 == 0)
            write_file_text(result.losses_path, format_curve(result.curve));
    }

    for (const auto& p : model.params.items) p->trainable = true;
    write_file_text(result.losses_path, format_curve(result.curve));
    save_checkpoint(result.checkpoint_path, model, optim, cfg.iters, batch_rng, cfg);
    return result;
}

GradCheckReport model_gradient_suite(uint64_t seed, int coords_per_param) {
    // tiny composed model over synthetic inputs; checks every parameter group
    // on the full forward path through both loss terms
    ModelConfig mc;
    mc.k = 3;
    mc.c_e = 8;
    mc.per_dir = 2;
    mc.c_v = 16;
    mc.c_c = 8;
    mc.seg_width = 4;
    GroundingModel model = GroundingModel::create(mc, seed + 101);
    // Zero-initialized biases leave cascades of ReLU units parked exactly on
    // their kinks (dead patches feed dead patches), where central differences
    // are ill-defined at any step size. Verify at a generic nearby point.
    Rng jitter(seed * 31 + 7);
    for (const auto& p : model.params.items) {
        for (double& x : p->value.v) x += jitter.uniform(-0.02, 0.02);
        quantize(p->value);
    }

    GenConfig gc;
    gc.embed_dim = 8;
    Vocab vocab = build_vocab(gc);

    Rng rng(seed * 7717 + 5);
    auto make_item = [&]() {
        TrainItem it;
        it.rgb = Tensor({3, 16, 16});
        it.flow = Tensor({3, 16, 16});
        for (double& x : it.rgb.v) x = rng.uniform(0, 1);
        for (double& x : it.flow.v) x = rng.uniform(-0.5, 0.5);
        quantize(it.rgb);
        quantize(it.flow);
        for (int i = 0; i < mc.k; ++i) {
            const double x0 = rng.uniform(0, 8), y0 = rng.uniform(0, 8);
            it.proposals.push_back(Box{x0, y0, x0 + rng.uniform(4, 8), y0 + rng.uniform(4, 8)});
        }
        it.gt_index = rng.uniform_int(mc.k);
        it.gt_mask = Mask(16, 16);
        for (int y = 4; y < 12; ++y)
            for (int x = 5; x < 11; ++x) it.gt_mask.at(y, x) = 1;
        const int n_tok = 3 + rng.uniform_int(4);
        for (int t = 0; t < n_tok; ++t) it.tokens.push_back(1 + rng.uniform_int(vocab.size() - 1));
        return it;
    };
    const std::vector<TrainItem> items = {make_item(), make_item()};

    auto fn = [&]() {
        std::vector<GroundingModel::SampleForward> fwd;
        for (const auto& item : items) fwd.push_back(model.forward(item, vocab));
        std::vector<std::vector<Value>> own(2);
        std::vector<int> positive(2);
        for (size_t b = 0; b < 2; ++b) {
            own[b] = fwd[b].match.s;
            positive[b] = items[b].gt_index;
        }
        auto cross = [&](size_t bv, size_t bq) {
            const auto& r = fwd[bv].match;
            const int pos = positive[bv];
            return model.matcher.pair_score(r.vt_actor[static_cast<size_t>(pos)],
                                            r.vt_action[static_cast<size_t>(pos)],
                                            fwd[bq].query.q_actor, fwd[bq].query.q_action);
        };
        Value l_mat = matching_loss(own, positive, cross, 0.1);
        Value seg_acc;
        for (size_t b = 0; b < 2; ++b) {
            Value kappa = model.predict_mask(fwd[b], items[b].gt_index);
            Mask target = project_gt_mask(
                items[b].gt_mask, items[b].proposals[static_cast<size_t>(items[b].gt_index)]);
            Value l = seg_loss(kappa, target);
            seg_acc = seg_acc ? add(seg_acc, l) : l;
        }
        // checked at 1/8 scale: central differences of an O(4) functional
        // cannot resolve the 1e-8-floored tolerance through f64 rounding,
        // and gradient correctness is scale-invariant
        return scale(total_loss(l_mat, scale(seg_acc, 0.5), 5.0), 0.125);
    };
    return gradient_check(fn, model.params.items, 1e-5, coords_per_param, seed);
}

} // namespace refvid
