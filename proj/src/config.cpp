#include "refvid/config.hpp"

#include <cstdio>
#include <map>
#include <sstream>

#include "refvid/error.hpp"
#include "refvid/util.hpp"

namespace refvid {

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("bad unsigned integer for " + key + ": '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("bad real number for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

void Config::apply(const std::string& key, const std::string& value) {
    if (key == "dataset.dir") dataset_dir = value;
    else if (key == "dataset.n") data_n = to_int(key, value);
    else if (key == "dataset.h") height = to_int(key, value);
    else if (key == "dataset.w") width = to_int(key, value);
    else if (key == "dataset.t") frames = to_int(key, value);
    else if (key == "dataset.actors_min") actors_min = to_int(key, value);
    else if (key == "dataset.actors_max") actors_max = to_int(key, value);
    else if (key == "dataset.seed") data_seed = to_u64(key, value);
    else if (key == "model.k") model.k = to_int(key, value);
    else if (key == "model.c_e") model.c_e = to_int(key, value);
    else if (key == "model.d") model.per_dir = to_int(key, value);
    else if (key == "model.c_v") model.c_v = to_int(key, value);
    else if (key == "model.c_c") model.c_c = to_int(key, value);
    else if (key == "model.seg_width") model.seg_width = to_int(key, value);
    else if (key == "model.shared_fc") model.shared_fc = to_bool(key, value);
    else if (key == "model.eq7_literal") model.eq7_literal = to_bool(key, value);
    else if (key == "model.pool_hidden") model.pool_hidden = to_bool(key, value);
    else if (key == "model.variant") model.variant = variant_from_string(value);
    else if (key == "optim.lr") lr = to_double(key, value);
    else if (key == "optim.momentum") momentum = to_double(key, value);
    else if (key == "optim.weight_decay") weight_decay = to_double(key, value);
    else if (key == "optim.iters") iters = to_int(key, value);
    else if (key == "optim.lr_drop_at") lr_drop_at = to_int(key, value);
    else if (key == "optim.batch") batch = to_int(key, value);
    else if (key == "loss.lambda") lambda = to_double(key, value);
    else if (key == "loss.epsilon") epsilon = to_double(key, value);
    else if (key == "seed") seed = to_u64(key, value);
    else if (key == "strategy") strategy = value;
    else throw ConfigError("unknown config key: " + key);
}

void Config::apply_override(const std::string& kv) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key=value, got '" + kv + "'");
    apply(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

void Config::load_file(const std::filesystem::path& file) {
    std::istringstream in(read_file_text(file));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError(file.string() + ":" + std::to_string(lineno) +
                              ": expected key=value");
        apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

std::string Config::canonical() const {
    std::map<std::string, std::string> kv;
    kv["dataset.dir"] = dataset_dir;
    kv["dataset.n"] = std::to_string(data_n);
    kv["dataset.h"] = std::to_string(height);
    kv["dataset.w"] = std::to_string(width);
    kv["dataset.t"] = std::to_string(frames);
    kv["dataset.actors_min"] = std::to_string(actors_min);
    kv["dataset.actors_max"] = std::to_string(actors_max);
    kv["dataset.seed"] = std::to_string(data_seed);
    kv["model.k"] = std::to_string(model.k);
    kv["model.c_e"] = std::to_string(model.c_e);
    kv["model.d"] = std::to_string(model.per_dir);
    kv["model.c_v"] = std::to_string(model.c_v);
    kv["model.c_c"] = std::to_string(model.c_c);
    kv["model.seg_width"] = std::to_string(model.seg_width);
    kv["model.shared_fc"] = model.shared_fc ? "1" : "0";
    kv["model.eq7_literal"] = model.eq7_literal ? "1" : "0";
    kv["model.pool_hidden"] = model.pool_hidden ? "1" : "0";
    kv["model.variant"] = to_string(model.variant);
    kv["optim.lr"] = fmt(lr);
    kv["optim.momentum"] = fmt(momentum);
    kv["optim.weight_decay"] = fmt(weight_decay);
    kv["optim.iters"] = std::to_string(iters);
    kv["optim.lr_drop_at"] = std::to_string(lr_drop_at);
    kv["optim.batch"] = std::to_string(batch);
    kv["loss.lambda"] = fmt(lambda);
    kv["loss.epsilon"] = fmt(epsilon);
    kv["seed"] = std::to_string(seed);
    kv["strategy"] = strategy;
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

uint64_t Config::hash() const { return fnv1a64(canonical()); }

std::string Config::model_signature() const {
    std::istringstream in(canonical());
    std::string line, out;
    while (std::getline(in, line))
        if (line.rfind("model.", 0) == 0) out += line + "\n";
    return out;
}

GenConfig Config::gen_config() const {
    GenConfig g;
    g.width = width;
    g.height = height;
    g.frames = frames;
    g.proposals = model.k;
    g.actors_min = actors_min;
    g.actors_max = actors_max;
    g.embed_dim = model.c_e;
    return g;
}

void Config::validate() const {
    model.validate();
    if (batch < 2) throw ConfigError("optim.batch must be at least 2");
    if (iters < 1) throw ConfigError("optim.iters must be positive");
    if (lr_drop_at < 0) throw ConfigError("optim.lr_drop_at must be nonnegative");
    if (lr <= 0) throw ConfigError("optim.lr must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("optim.momentum must be in [0,1)");
    if (weight_decay < 0) throw ConfigError("optim.weight_decay must be nonnegative");
    if (lambda <= 0) throw ConfigError("loss.lambda must be positive");
    if (epsilon < 0) throw ConfigError("loss.epsilon must be nonnegative");
    if (strategy != "joint" && strategy != "matching_then_seg" &&
        strategy != "seg_then_matching")
        throw ConfigError("unknown strategy: " + strategy);
}

} // namespace refvid
