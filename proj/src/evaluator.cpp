#include "refvid/evaluator.hpp"

#include <json.hpp>

#include "refvid/error.hpp"
#include "refvid/mask_head.hpp"
#include "refvid/util.hpp"

namespace refvid {

namespace fs = std::filesystem;

EvalResult evaluate(const GroundingModel& model, const Vocab& vocab,
                    const std::vector<TrainItem>& items, bool oracle) {
    if (items.empty()) throw ArgumentError("evaluate: empty sample set");

    std::vector<double> ious;
    std::vector<int64_t> inters, unions;
    std::vector<Box> pred_boxes, gt_boxes;
    nlohmann::json per_sample = nlohmann::json::array();

    for (size_t idx = 0; idx < items.size(); ++idx) {
        const TrainItem& item = items[idx];
        int selected;
        Mask frame_mask;
        const int fh = item.gt_mask.h, fw = item.gt_mask.w;
        if (oracle) {
            selected = item.gt_index;
            const Box& box = item.proposals[static_cast<size_t>(selected)];
            Mask target = project_gt_mask(item.gt_mask, box);
            Tensor kappa({1, kMaskSize, kMaskSize});
            for (int i = 0; i < kMaskSize * kMaskSize; ++i)
                kappa[i] = target.v[static_cast<size_t>(i)] ? 0.95 : 0.05;
            frame_mask = paste_mask(kappa, box, fh, fw);
        } else {
            auto fwd = model.forward(item, vocab);
            selected = fwd.match.selected;
            Value kappa = model.predict_mask(fwd, selected);
            frame_mask = paste_mask(kappa->val, item.proposals[static_cast<size_t>(selected)],
                                    fh, fw);
        }
        int64_t inter = 0, uni = 0;
        mask_overlap(frame_mask, item.gt_mask, inter, uni);
        const double iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        ious.push_back(iou);
        inters.push_back(inter);
        unions.push_back(uni);
        pred_boxes.push_back(item.proposals[static_cast<size_t>(selected)]);
        gt_boxes.push_back(item.gt_box);
        per_sample.push_back({{"index", idx},
                              {"iou", iou},
                              {"box_iou", box_iou(pred_boxes.back(), item.gt_box)},
                              {"selected", selected},
                              {"gt_index", item.gt_index}});
    }

    EvalResult r;
    r.masks = aggregate_metrics(ious, inters, unions);
    r.localization = localization_precision(pred_boxes, gt_boxes);
    r.per_sample_json = per_sample.dump(2);
    return r;
}

void write_eval_outputs(const fs::path& out_dir, const EvalResult& r) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string());
    nlohmann::json j = nlohmann::json::parse(r.masks.to_json());
    nlohmann::json loc;
    for (const auto& [x, v] : r.localization) {
        char key[8];
        std::snprintf(key, sizeof key, "%.1f", x);
        loc[key] = v;
    }
    j["localization_p_at"] = loc;
    write_file_text(out_dir / "metrics.json", j.dump(2));
    write_file_text(out_dir / "per_sample.json", r.per_sample_json);
}

} // namespace refvid
