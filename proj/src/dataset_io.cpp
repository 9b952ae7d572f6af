#include <json.hpp>

#include "refvid/error.hpp"
#include "refvid/synth.hpp"
#include "refvid/util.hpp"

namespace refvid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<uint8_t> tensor_to_f32(const Tensor& t) {
    std::vector<uint8_t> out(static_cast<size_t>(t.numel()) * 4);
    auto* f = reinterpret_cast<float*>(out.data());
    for (int64_t i = 0; i < t.numel(); ++i) f[i] = static_cast<float>(t[i]);
    return out;
}

Tensor f32_to_tensor(const std::vector<uint8_t>& bytes, const std::vector<int>& shape,
                     const std::string& what) {
    const int64_t n = shape_numel(shape);
    if (bytes.size() != static_cast<size_t>(n) * 4)
        throw FormatError(what + ": blob has " + std::to_string(bytes.size()) +
                          " bytes but manifest shape " + shape_str(shape) + " needs " +
                          std::to_string(n * 4));
    Tensor t;
    t.shape = shape;
    t.v.resize(static_cast<size_t>(n));
    const auto* f = reinterpret_cast<const float*>(bytes.data());
    for (int64_t i = 0; i < n; ++i) t[i] = static_cast<double>(f[i]);
    return t;
}

json box_to_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

Box box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw FormatError("box entry must be [x0,y0,x1,y1]");
    return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json cfg_to_json(const GenConfig& c) {
    return json{{"width", c.width},           {"height", c.height},
                {"frames", c.frames},         {"proposals", c.proposals},
                {"actors_min", c.actors_min}, {"actors_max", c.actors_max},
                {"embed_dim", c.embed_dim},   {"max_query_len", c.max_query_len},
                {"vocab_seed", c.vocab_seed}};
}

GenConfig cfg_from_json(const json& j) {
    GenConfig c;
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.frames = j.at("frames").get<int>();
    c.proposals = j.at("proposals").get<int>();
    c.actors_min = j.at("actors_min").get<int>();
    c.actors_max = j.at("actors_max").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.max_query_len = j.at("max_query_len").get<int>();
    c.vocab_seed = j.at("vocab_seed").get<uint64_t>();
    return c;
}

} // namespace

std::vector<size_t> DatasetManifest::split_indices(const std::string& split) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == split) out.push_back(i);
    return out;
}

void write_sample(const fs::path& dir, const VideoSample& s) {
    require_little_endian();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    auto frames = tensor_to_f32(s.frames);
    write_file_bytes(dir / "frames.bin", frames.data(), frames.size());
    auto flow = tensor_to_f32(s.flow);
    write_file_bytes(dir / "flow.bin", flow.data(), flow.size());
    write_file_bytes(dir / "mask.bin", s.gt_mask.v.data(), s.gt_mask.v.size());

    json boxes = json::array();
    for (const auto& b : s.proposals) boxes.push_back(box_to_json(b));
    write_file_text(dir / "boxes.json", boxes.dump(2));

    json q{{"tokens", s.query_tokens}, {"text", s.query_text}};
    write_file_text(dir / "query.json", q.dump(2));
}

VideoSample read_sample(const fs::path& root, const SampleRecord& rec) {
    require_little_endian();
    const fs::path dir = root / rec.dir;
    VideoSample s;
    s.frames = f32_to_tensor(read_file_bytes(dir / "frames.bin"), rec.frames_shape,
                             rec.id + "/frames.bin");
    s.flow = f32_to_tensor(read_file_bytes(dir / "flow.bin"), rec.flow_shape,
                           rec.id + "/flow.bin");
    if (rec.mask_shape.size() != 2)
        throw FormatError(rec.id + ": mask shape must be rank 2");
    auto mask_bytes = read_file_bytes(dir / "mask.bin");
    const int mh = rec.mask_shape[0], mw = rec.mask_shape[1];
    if (mask_bytes.size() != static_cast<size_t>(mh) * mw)
        throw FormatError(rec.id + "/mask.bin: blob has " + std::to_string(mask_bytes.size()) +
                          " bytes, manifest says " + std::to_string(mh * mw));
    s.gt_mask = Mask(mh, mw);
    for (size_t i = 0; i < mask_bytes.size(); ++i) {
        if (mask_bytes[i] > 1) throw FormatError(rec.id + "/mask.bin: non-binary value");
        s.gt_mask.v[i] = mask_bytes[i];
    }

    json boxes;
    try {
        boxes = json::parse(read_file_text(dir / "boxes.json"));
    } catch (const json::exception& e) {
        throw FormatError(rec.id + "/boxes.json: " + e.what());
    }
    for (const auto& b : boxes) s.proposals.push_back(box_from_json(b));

    json q;
    try {
        q = json::parse(read_file_text(dir / "query.json"));
    } catch (const json::exception& e) {
        throw FormatError(rec.id + "/query.json: " + e.what());
    }
    s.query_tokens = q.at("tokens").get<std::vector<int>>();
    s.query_text = q.value("text", "");

    s.annotated_t = rec.annotated_t;
    s.gt_index = rec.gt_index;
    s.gt_box = rec.gt_box;
    if (s.gt_index < 0 || s.gt_index >= static_cast<int>(s.proposals.size()))
        throw FormatError(rec.id + ": gt_index out of range");
    return s;
}

void write_vocab(const fs::path& dir, const Vocab& vocab, const GenConfig& cfg) {
    json j{{"format_version", kDatasetFormatVersion},
           {"embed_dim", cfg.embed_dim},
           {"vocab_seed", cfg.vocab_seed},
           {"tokens", vocab.tokens}};
    write_file_text(dir / "vocab.json", j.dump(2));
    auto table = tensor_to_f32(vocab.table);
    write_file_bytes(dir / "embeddings.bin", table.data(), table.size());
}

Vocab read_vocab(const fs::path& dir) {
    json j;
    try {
        j = json::parse(read_file_text(dir / "vocab.json"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("vocab.json: ") + e.what());
    }
    if (j.at("format_version").get<int>() != kDatasetFormatVersion)
        throw FormatError("vocab.json: unsupported format version");
    Vocab v;
    v.tokens = j.at("tokens").get<std::vector<std::string>>();
    for (size_t i = 0; i < v.tokens.size(); ++i) v.ids[v.tokens[i]] = static_cast<int>(i);
    const int dim = j.at("embed_dim").get<int>();
    v.table = f32_to_tensor(read_file_bytes(dir / "embeddings.bin"),
                            {v.size(), dim}, "embeddings.bin");
    return v;
}

void generate_dataset(uint64_t seed, int n, const GenConfig& cfg, const fs::path& dir) {
    if (n < 1) throw ArgumentError("generate_dataset: need n >= 1 samples");
    cfg.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const Vocab vocab = build_vocab(cfg);
    write_vocab(dir, vocab, cfg);

    const int n_train = static_cast<int>(0.8 * n);
    json manifest{{"format_version", kDatasetFormatVersion}, {"cfg", cfg_to_json(cfg)}};
    json samples = json::array();
    for (int i = 0; i < n; ++i) {
        const VideoSample s = generate_sample(seed + static_cast<uint64_t>(i), cfg, vocab);
        char name[32];
        std::snprintf(name, sizeof name, "sample_%05d", i);
        write_sample(dir / name, s);
        json rec{{"id", name},
                 {"dir", name},
                 {"paths",
                  {{"frames", std::string(name) + "/frames.bin"},
                   {"flow", std::string(name) + "/flow.bin"},
                   {"mask", std::string(name) + "/mask.bin"},
                   {"boxes", std::string(name) + "/boxes.json"},
                   {"query", std::string(name) + "/query.json"}}},
                 {"shapes",
                  {{"frames", s.frames.shape}, {"flow", s.flow.shape},
                   {"mask", {s.gt_mask.h, s.gt_mask.w}}}},
                 {"dtypes", {{"frames", "f32"}, {"flow", "f32"}, {"mask", "u8"}}},
                 {"gt_index", s.gt_index},
                 {"annotated_t", s.annotated_t},
                 {"gt_box", box_to_json(s.gt_box)},
                 {"query", s.query_text},
                 {"split", i < n_train ? "train" : "test"}};
        samples.push_back(rec);
    }
    manifest["samples"] = samples;
    write_file_text(dir / "manifest.json", manifest.dump(2));
}

DatasetManifest read_manifest(const fs::path& dir) {
    json j;
    try {
        j = json::parse(read_file_text(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest.json: ") + e.what());
    }
    if (j.at("format_version").get<int>() != kDatasetFormatVersion)
        throw FormatError("manifest.json: unsupported format version " +
                          std::to_string(j.at("format_version").get<int>()));
    DatasetManifest m;
    m.cfg = cfg_from_json(j.at("cfg"));
    for (const auto& rec : j.at("samples")) {
        SampleRecord r;
        r.id = rec.at("id").get<std::string>();
        r.dir = rec.at("dir").get<std::string>();
        r.gt_index = rec.at("gt_index").get<int>();
        r.annotated_t = rec.at("annotated_t").get<int>();
        r.gt_box = box_from_json(rec.at("gt_box"));
        r.query_text = rec.at("query").get<std::string>();
        r.split = rec.at("split").get<std::string>();
        r.frames_shape = rec.at("shapes").at("frames").get<std::vector<int>>();
        r.flow_shape = rec.at("shapes").at("flow").get<std::vector<int>>();
        r.mask_shape = rec.at("shapes").at("mask").get<std::vector<int>>();
        m.samples.push_back(std::move(r));
    }
    return m;
}

} // namespace refvid
