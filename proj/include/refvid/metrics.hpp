#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "refvid/geometry.hpp"

namespace refvid {

/// Binary frame mask, row-major H x W, values 0/1.
struct Mask {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    Mask() = default;
    Mask(int hh, int ww) : h(hh), w(ww), v(static_cast<size_t>(hh) * ww, 0) {}

    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    int64_t count() const;
    bool operator==(const Mask& o) const { return h == o.h && w == o.w && v == o.v; }
};

inline const std::vector<double>& precision_thresholds() {
    static const std::vector<double> t = {0.5, 0.6, 0.7, 0.8, 0.9};
    return t;
}

struct MetricReport {
    double overall_iou = 0.0;
    double mean_iou = 0.0;
    std::map<double, double> p_at; // threshold -> precision, strict inequality
    double map_score = 0.0;        // mean of strict precision over 0.50:0.05:0.95
    int64_t n_samples = 0;

    std::string to_json() const;
};

/// |a AND b| / |a OR b|; 1.0 when both masks are empty, 0.0 when exactly one is.
double mask_iou(const Mask& a, const Mask& b);

/// Pixel overlap counts used by Overall IoU.
void mask_overlap(const Mask& a, const Mask& b, int64_t& intersection, int64_t& uni);

double box_iou(const Box& a, const Box& b);

/// Overall = sum(intersections)/sum(unions); Mean = mean(ious);
/// P@X = fraction with IoU strictly above X; mAP = mean strict precision over
/// the ten thresholds 0.50..0.95.
MetricReport aggregate_metrics(const std::vector<double>& ious,
                               const std::vector<int64_t>& intersections,
                               const std::vector<int64_t>& unions);

/// Box-localization precision at each threshold, strict inequality.
std::map<double, double> localization_precision(const std::vector<Box>& pred,
                                                const std::vector<Box>& gt);

} // namespace refvid
