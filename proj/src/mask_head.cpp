#include "refvid/mask_head.hpp"

#include <cmath>

#include "refvid/error.hpp"

namespace refvid {

MaskHead MaskHead::create(const MaskHeadConfig& cfg, Rng& rng) {
    MaskHead h;
    h.cfg = cfg;
    auto& st = h.params;
    const int s = cfg.width;
    h.k1 = st.add(make_weight("seg.c1.k", {s, cfg.in_channels, 1, 1}, cfg.in_channels, rng));
    h.b1 = st.add(make_bias("seg.c1.b", s));
    h.k2 = st.add(make_weight("seg.c2.k", {s, s, 3, 3}, s * 9, rng));
    h.b2 = st.add(make_bias("seg.c2.b", s));
    h.k3 = st.add(make_weight("seg.c3.k", {s, s, 3, 3}, s * 9, rng));
    h.b3 = st.add(make_bias("seg.c3.b", s));
    h.k4 = st.add(make_weight("seg.c4.k", {s, s, 3, 3}, s * 9, rng));
    h.b4 = st.add(make_bias("seg.c4.b", s));
    h.kd = st.add(make_weight("seg.up.k", {s, s, 2, 2}, s * 4, rng));
    h.bd = st.add(make_bias("seg.up.b", s));
    h.ko = st.add(make_weight("seg.out.k", {1, s, 1, 1}, s, rng));
    h.bo = st.add(make_bias("seg.out.b", 1));
    return h;
}

Value MaskHead::predict(const Value& mask_fmap) const {
    const Tensor& t = mask_fmap->val;
    if (t.rank() != 3 || t.dim(0) != cfg.in_channels || t.dim(1) != 14 || t.dim(2) != 14)
        throw DimensionError("mask head expects [" + std::to_string(cfg.in_channels) +
                             "x14x14], got " + shape_str(t.shape));
    Value x = relu(conv2d(mask_fmap, leaf(k1), leaf(b1), 1, 0));
    x = relu(conv2d(x, leaf(k2), leaf(b2), 1, 1));
    x = relu(conv2d(x, leaf(k3), leaf(b3), 1, 1));
    x = relu(conv2d(x, leaf(k4), leaf(b4), 1, 1));
    x = deconv2d(x, leaf(kd), leaf(bd));
    return sigmoid(conv2d(x, leaf(ko), leaf(bo), 1, 0));
}

namespace {
// Bilinear read of a frame-sized field whose values sit at pixel centers.
double sample_frame_field(const double* field, int h, int w, double fy, double fx) {
    const double gy = fy - 0.5, gx = fx - 0.5;
    const int y0 = static_cast<int>(std::floor(gy));
    const int x0 = static_cast<int>(std::floor(gx));
    const double dy = gy - y0, dx = gx - x0;
    auto at = [&](int y, int x) {
        y = std::clamp(y, 0, h - 1);
        x = std::clamp(x, 0, w - 1);
        return field[static_cast<int64_t>(y) * w + x];
    };
    return (1 - dy) * (1 - dx) * at(y0, x0) + (1 - dy) * dx * at(y0, x0 + 1) +
           dy * (1 - dx) * at(y0 + 1, x0) + dy * dx * at(y0 + 1, x0 + 1);
}
} // namespace

Mask project_gt_mask(const Mask& gt, const Box& box) {
    const Box b = box.clamped(gt.w, gt.h);
    if (b.width() <= 0 || b.height() <= 0)
        throw DegenerateBoxError("project_gt_mask: zero-area box after clamping");
    std::vector<double> field(gt.v.size());
    for (size_t i = 0; i < gt.v.size(); ++i) field[i] = gt.v[i] ? 1.0 : 0.0;

    Mask out(kMaskSize, kMaskSize);
    const double bw = b.width() / kMaskSize, bh = b.height() / kMaskSize;
    for (int i = 0; i < kMaskSize; ++i)
        for (int j = 0; j < kMaskSize; ++j) {
            const double fy = b.y0 + (i + 0.5) * bh;
            const double fx = b.x0 + (j + 0.5) * bw;
            if (sample_frame_field(field.data(), gt.h, gt.w, fy, fx) > 0.5) out.at(i, j) = 1;
        }
    return out;
}

Mask paste_mask(const Tensor& kappa, const Box& box, int frame_h, int frame_w,
                double threshold) {
    if (kappa.numel() != kMaskSize * kMaskSize)
        throw DimensionError("paste_mask expects a 28x28 map, got " + shape_str(kappa.shape));
    Mask out(frame_h, frame_w);
    const Box b = box.clamped(frame_w, frame_h);
    if (b.width() <= 0 || b.height() <= 0) return out;

    const int x_lo = std::max(0, static_cast<int>(std::floor(b.x0)));
    const int x_hi = std::min(frame_w - 1, static_cast<int>(std::ceil(b.x1)) - 1);
    const int y_lo = std::max(0, static_cast<int>(std::floor(b.y0)));
    const int y_hi = std::min(frame_h - 1, static_cast<int>(std::ceil(b.y1)) - 1);
    for (int y = y_lo; y <= y_hi; ++y)
        for (int x = x_lo; x <= x_hi; ++x) {
            const double cy = y + 0.5, cx = x + 0.5;
            if (cx < b.x0 || cx > b.x1 || cy < b.y0 || cy > b.y1) continue;
            // map the pixel center into mask coordinates (mask cells sit at
            // half-integer centers of the 28x28 grid)
            const double my = (cy - b.y0) / b.height() * kMaskSize - 0.5;
            const double mx = (cx - b.x0) / b.width() * kMaskSize - 0.5;
            const int y0 = static_cast<int>(std::floor(my));
            const int x0 = static_cast<int>(std::floor(mx));
            const double dy = my - y0, dx = mx - x0;
            auto at = [&](int yy, int xx) {
                yy = std::clamp(yy, 0, kMaskSize - 1);
                xx = std::clamp(xx, 0, kMaskSize - 1);
                return kappa[static_cast<int64_t>(yy) * kMaskSize + xx];
            };
            const double v = (1 - dy) * (1 - dx) * at(y0, x0) + (1 - dy) * dx * at(y0, x0 + 1) +
                             dy * (1 - dx) * at(y0 + 1, x0) + dy * dx * at(y0 + 1, x0 + 1);
            if (v > threshold) out.at(y, x) = 1;
        }
    return out;
}

} // namespace refvid
