#pragma once

// Axis-aligned boxes in center/size form, IoU, and greedy per-class NMS.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "diakrit/error.hpp"

namespace diakrit {

struct Box {
    double cx = 0, cy = 0, w = 0, h = 0;

    double x0() const { return cx - w / 2; }
    double y0() const { return cy - h / 2; }
    double x1() const { return cx + w / 2; }
    double y1() const { return cy + h / 2; }
    double area() const { return w * h; }
};

inline double iou(const Box& a, const Box& b) {
    double ix = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
    double iy = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
    if (ix <= 0 || iy <= 0) return 0.0;
    double inter = ix * iy;
    // areas from the same corner values as the intersection, so iou(a, a) == 1 exactly
    double area_a = (a.x1() - a.x0()) * (a.y1() - a.y0());
    double area_b = (b.x1() - b.x0()) * (b.y1() - b.y0());
    return inter / (area_a + area_b - inter);
}

struct Detection {
    Box box;
    int cls = 0;
    double conf = 0;
};

// Greedy per-class NMS: visit detections by confidence descending (ties by
// original index), keep one iff its IoU with every already-kept detection of
// the same class is ≤ threshold. Output preserves the visiting order, so
// confidences are non-increasing within each class.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double threshold) {
    std::vector<size_t> order(dets.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return dets[a].conf > dets[b].conf;
    });
    std::vector<Detection> kept;
    for (size_t idx : order) {
        const Detection& d = dets[idx];
        bool suppressed = false;
        for (const Detection& k : kept)
            if (k.cls == d.cls && iou(k.box, d.box) > threshold) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(d);
    }
    return kept;
}

} // namespace diakrit
