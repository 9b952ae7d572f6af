#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>

#include "refvid/ablation.hpp"
#include "refvid/error.hpp"
#include "refvid/evaluator.hpp"
#include "refvid/trainer.hpp"
#include "refvid/util.hpp"

namespace fs = std::filesystem;
using namespace refvid;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_given = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (key=value lines)");
        cmd->add_option("--override", overrides, "config override key=value")
            ->take_all()
            ->allow_extra_args(false);
        cmd->add_option("--seed", seed, "seed")->each([this](const std::string&) {
            seed_given = true;
        });
    }

    Config build(bool seed_is_data_seed = false) const {
        Config cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        if (seed_given) {
            if (seed_is_data_seed)
                cfg.data_seed = seed;
            else
                cfg.seed = seed;
        }
        for (const auto& kv : overrides) cfg.apply_override(kv);
        return cfg;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"text-conditioned actor localization and segmentation on a synthetic "
                 "moving-shapes corpus"};
    app.require_subcommand(1);

    CommonArgs gen_args, train_args, eval_args, ablate_args, check_args;
    std::string gen_out, train_data, train_out = "out", train_resume;
    std::string eval_data, eval_ckpt, eval_out = "out", eval_split = "test";
    std::string ablate_grid, ablate_out = "out";
    bool eval_oracle = false;
    int gen_n = -1, check_seeds = 1;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen_args.attach(gen);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--n", gen_n, "number of samples (overrides dataset.n)");

    auto* train = app.add_subcommand("train", "train a model");
    train_args.attach(train);
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "output directory");
    train->add_option("--resume", train_resume, "checkpoint to resume from");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_args.attach(eval);
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--out", eval_out, "output directory");
    eval->add_option("--split", eval_split, "train|test");
    eval->add_flag("--oracle", eval_oracle, "ground-truth oracle mode");

    auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
    ablate_args.attach(ablate);
    ablate->add_option("--grid", ablate_grid, "k | lambda | modules | key=v1,v2,...")
        ->required();
    ablate->add_option("--out", ablate_out, "output directory");

    auto* check = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    check_args.attach(check);
    check->add_option("--seeds", check_seeds, "number of seeds to sweep");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            Config cfg = gen_args.build(true);
            if (gen_n > 0) cfg.data_n = gen_n;
            generate_dataset(cfg.data_seed, cfg.data_n, cfg.gen_config(), gen_out);
            std::printf("wrote %d samples to %s (manifest hash %016llx)\n", cfg.data_n,
                        gen_out.c_str(),
                        static_cast<unsigned long long>(
                            fnv1a64_file(fs::path(gen_out) / "manifest.json")));
        } else if (train->parsed()) {
            Config cfg = train_args.build();
            std::optional<fs::path> resume;
            if (!train_resume.empty()) resume = fs::path(train_resume);
            TrainResult r = refvid::train(cfg, train_data, train_out, resume);
            const auto& last = r.curve.empty() ? StepRecord{} : r.curve.back();
            std::printf("trained %zu steps; final L=%.6f (L_mat=%.6f, L_seg=%.6f)\n",
                        r.curve.size(), last.total, last.mat, last.seg);
            std::printf("checkpoint: %s\nlosses: %s\n", r.checkpoint_path.c_str(),
                        r.losses_path.c_str());
        } else if (eval->parsed()) {
            Config cfg = eval_args.build();
            if (eval_split != "train" && eval_split != "test")
                throw ArgumentError("--split must be train or test");
            LoadedDataset data = load_dataset(eval_data);
            GroundingModel model = GroundingModel::create(cfg.model, cfg.seed);
            OptimState optim;
            int64_t it = 0;
            Rng rng;
            load_checkpoint(eval_ckpt, model, optim, it, rng, cfg);
            const auto& items = eval_split == "train" ? data.train : data.test;
            EvalResult r = evaluate(model, data.vocab, items, eval_oracle);
            write_eval_outputs(eval_out, r);
            std::printf("%s\n", r.masks.to_json().c_str());
            std::printf("localization P@0.5 = %.4f over %zu samples\n",
                        r.localization.at(0.5), items.size());
        } else if (ablate->parsed()) {
            Config cfg = ablate_args.build();
            auto rows = run_ablation(cfg, ablate_grid, ablate_out);
            for (const auto& row : rows)
                std::printf("%-18s mean IoU %.4f  P@0.5 %.4f  mAP %.4f\n", row.variant.c_str(),
                            row.eval.masks.mean_iou, row.eval.masks.p_at.at(0.5),
                            row.eval.masks.map_score);
        } else if (check->parsed()) {
            const uint64_t base = check_args.seed_given ? check_args.seed : 1;
            double worst = 0;
            for (int s = 0; s < check_seeds; ++s) {
                GradCheckReport rep = model_gradient_suite(base + static_cast<uint64_t>(s));
                std::printf("seed %llu: max rel err %.3e (worst %s)\n",
                            static_cast<unsigned long long>(base + s), rep.max_rel_err,
                            rep.worst_param.c_str());
                for (const auto& [pname, err] : rep.per_param)
                    if (err > 1e-5) std::printf("    %-24s %.3e\n", pname.c_str(), err);
                worst = std::max(worst, rep.max_rel_err);
            }
            std::printf("gradient suite max rel err %.3e: %s\n", worst,
                        worst < 1e-4 ? "PASS" : "FAIL");
            return worst < 1e-4 ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
