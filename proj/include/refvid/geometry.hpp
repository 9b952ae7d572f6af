#pragma once

#include <algorithm>

namespace refvid {

/// Axis-aligned box in continuous frame coordinates, corners (x0,y0)-(x1,y1).
/// A pixel (px,py) occupies [px,px+1) x [py,py+1).
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }

    Box clamped(double frame_w, double frame_h) const {
        Box b;
        b.x0 = std::clamp(x0, 0.0, frame_w);
        b.y0 = std::clamp(y0, 0.0, frame_h);
        b.x1 = std::clamp(x1, 0.0, frame_w);
        b.y1 = std::clamp(y1, 0.0, frame_h);
        return b;
    }

    bool operator==(const Box& o) const {
        return x0 == o.x0 && y0 == o.y0 && x1 == o.x1 && y1 == o.y1;
    }
};

inline Box full_frame_box(double frame_w, double frame_h) { return Box{0, 0, frame_w, frame_h}; }

} // namespace refvid
