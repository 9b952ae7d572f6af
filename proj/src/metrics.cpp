#include "refvid/metrics.hpp"

#include <json.hpp>

#include "refvid/error.hpp"

namespace refvid {

int64_t Mask::count() const {
    int64_t n = 0;
    for (uint8_t b : v) n += b != 0;
    return n;
}

double mask_iou(const Mask& a, const Mask& b) {
    int64_t inter = 0, uni = 0;
    mask_overlap(a, b, inter, uni);
    if (uni == 0) return 1.0; // both empty: perfect agreement
    return static_cast<double>(inter) / static_cast<double>(uni);
}

void mask_overlap(const Mask& a, const Mask& b, int64_t& intersection, int64_t& uni) {
    if (a.h != b.h || a.w != b.w)
        throw DimensionError("mask_iou: " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                             " vs " + std::to_string(b.h) + "x" + std::to_string(b.w));
    intersection = 0;
    uni = 0;
    const size_t n = a.v.size();
    for (size_t i = 0; i < n; ++i) {
        const bool pa = a.v[i] != 0, pb = b.v[i] != 0;
        intersection += pa && pb;
        uni += pa || pb;
    }
}

double box_iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

MetricReport aggregate_metrics(const std::vector<double>& ious,
                               const std::vector<int64_t>& intersections,
                               const std::vector<int64_t>& unions) {
    if (ious.empty()) throw ArgumentError("aggregate_metrics: empty sample set");
    if (ious.size() != intersections.size() || ious.size() != unions.size())
        throw ArgumentError("aggregate_metrics: per-sample list lengths disagree");

    MetricReport r;
    r.n_samples = static_cast<int64_t>(ious.size());
    int64_t total_int = 0, total_uni = 0;
    double iou_sum = 0;
    for (size_t i = 0; i < ious.size(); ++i) {
        total_int += intersections[i];
        total_uni += unions[i];
        iou_sum += ious[i];
    }
    r.overall_iou = total_uni == 0 ? 1.0
                                   : static_cast<double>(total_int) / static_cast<double>(total_uni);
    r.mean_iou = iou_sum / static_cast<double>(ious.size());
    for (double x : precision_thresholds()) {
        int64_t hits = 0;
        for (double iou : ious) hits += iou > x;
        r.p_at[x] = static_cast<double>(hits) / static_cast<double>(ious.size());
    }
    double ap = 0;
    for (int k = 0; k < 10; ++k) {
        const double x = 0.50 + 0.05 * k;
        int64_t hits = 0;
        for (double iou : ious) hits += iou > x;
        ap += static_cast<double>(hits) / static_cast<double>(ious.size());
    }
    r.map_score = ap / 10.0;
    return r;
}

std::map<double, double> localization_precision(const std::vector<Box>& pred,
                                                const std::vector<Box>& gt) {
    if (pred.size() != gt.size())
        throw ArgumentError("localization_precision: " + std::to_string(pred.size()) +
                            " predictions vs " + std::to_string(gt.size()) + " ground truths");
    if (pred.empty()) throw ArgumentError("localization_precision: empty sample set");
    std::vector<double> ious(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) ious[i] = box_iou(pred[i], gt[i]);
    std::map<double, double> out;
    for (double x : precision_thresholds()) {
        int64_t hits = 0;
        for (double iou : ious) hits += iou > x;
        out[x] = static_cast<double>(hits) / static_cast<double>(ious.size());
    }
    return out;
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["overall_iou"] = overall_iou;
    j["mean_iou"] = mean_iou;
    nlohmann::json p;
    for (const auto& [x, v] : p_at) {
        char key[8];
        std::snprintf(key, sizeof key, "%.1f", x);
        p[key] = v;
    }
    j["p_at"] = p;
    j["map"] = map_score;
    // this task has one prediction per query; mAP here is threshold-averaged
    // precision, not detection-style ranked AP
    j["map_threshold_avg"] = map_score;
    j["n"] = n_samples;
    return j.dump(2);
}

} // namespace refvid
