#include "refvid/ablation.hpp"

#include <cstdio>

#include "refvid/error.hpp"
#include "refvid/trainer.hpp"
#include "refvid/util.hpp"

namespace refvid {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(s.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

} // namespace

std::vector<AblationRow> run_ablation(const Config& base, const std::string& grid,
                                      const fs::path& out_dir) {
    std::string name, key;
    std::vector<std::string> values;
    if (grid == "k") {
        name = "k";
        key = "model.k";
        values = {"2", "4", "6", "8"};
    } else if (grid == "lambda") {
        name = "lambda";
        key = "loss.lambda";
        values = {"0.1", "1", "5", "10"};
    } else if (grid == "modules") {
        name = "modules";
        key = "model.variant";
        values = {"full",           "actor_only",  "action_only", "no_context_lstm",
                  "no_gated_fusion", "no_location", "rgb_only",    "flow_only"};
    } else {
        const size_t eq = grid.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("grid must be a builtin name (k, lambda, modules) or key=v1,v2,...");
        key = grid.substr(0, eq);
        values = split_list(grid.substr(eq + 1));
        if (values.empty()) throw ConfigError("grid has no values: " + grid);
        name = sanitize(key);
        Config probe = base;
        probe.apply(key, values.front()); // unknown keys rejected up front
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string());

    // K changes the stored proposals, so each K regenerates its corpus; all
    // grids share the base data seed so scenes stay comparable
    const bool regen_per_variant = key == "model.k";
    fs::path shared_data = out_dir / "data";
    if (!regen_per_variant) generate_dataset(base.data_seed, base.data_n, base.gen_config(), shared_data);

    std::vector<AblationRow> rows;
    std::string csv = "variant,p@0.5,p@0.6,p@0.7,p@0.8,p@0.9,map,overall_iou,mean_iou\n";
    for (const std::string& v : values) {
        Config cfg = base;
        cfg.apply(key, v);
        cfg.validate();
        fs::path data_dir = shared_data;
        if (regen_per_variant) {
            data_dir = out_dir / ("data_k" + v);
            generate_dataset(cfg.data_seed, cfg.data_n, cfg.gen_config(), data_dir);
        }
        const fs::path run_dir = out_dir / (name + "_" + sanitize(v));
        train(cfg, data_dir, run_dir);

        LoadedDataset data = load_dataset(data_dir);
        GroundingModel model = GroundingModel::create(cfg.model, cfg.seed);
        OptimState optim;
        int64_t it = 0;
        Rng rng;
        load_checkpoint(run_dir / "checkpoint.bin", model, optim, it, rng, cfg);
        AblationRow row;
        row.variant = v;
        row.eval = evaluate(model, data.vocab, data.test);
        write_eval_outputs(run_dir, row.eval);

        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                      v.c_str(), row.eval.masks.p_at.at(0.5), row.eval.masks.p_at.at(0.6),
                      row.eval.masks.p_at.at(0.7), row.eval.masks.p_at.at(0.8),
                      row.eval.masks.p_at.at(0.9), row.eval.masks.map_score,
                      row.eval.masks.overall_iou, row.eval.masks.mean_iou);
        csv += buf;
        rows.push_back(std::move(row));
    }
    write_file_text(out_dir / ("ablation_" + name + ".csv"), csv);
    return rows;
}

} // namespace refvid
