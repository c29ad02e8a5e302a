#include "diakrit/geometry.hpp"

#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "diakrit/rng.hpp"

using namespace diakrit;

namespace {

// Independent quadratic NMS reference: explicit pairwise IoU matrix and a
// hand-rolled stable insertion sort, sharing no code with the library path.
std::vector<Detection> brute_force_nms(const std::vector<Detection>& dets, double threshold) {
    const size_t n = dets.size();
    std::vector<size_t> order;
    for (size_t i = 0; i < n; ++i) {
        size_t at = order.size();
        while (at > 0 && dets[order[at - 1]].conf < dets[i].conf) --at;
        order.insert(order.begin() + static_cast<long>(at), i);
    }
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j) m[i][j] = iou(dets[i].box, dets[j].box);
    std::vector<size_t> kept;
    for (size_t idx : order) {
        bool ok = true;
        for (size_t k : kept)
            if (dets[k].cls == dets[idx].cls && m[k][idx] > threshold) ok = false;
        if (ok) kept.push_back(idx);
    }
    std::vector<Detection> out;
    for (size_t k : kept) out.push_back(dets[k]);
    return out;
}

bool same_detections(const std::vector<Detection>& a, const std::vector<Detection>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].cls != b[i].cls || a[i].conf != b[i].conf || a[i].box.cx != b[i].box.cx ||
            a[i].box.cy != b[i].box.cy || a[i].box.w != b[i].box.w || a[i].box.h != b[i].box.h)
            return false;
    return true;
}

} // namespace

TEST(Iou, IdenticalBoxesGiveOne) {
    Box b{3.5, 2.0, 4.0, 6.0};
    EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
    EXPECT_DOUBLE_EQ(iou({2, 2, 2, 2}, {10, 2, 2, 2}), 0.0);
    EXPECT_DOUBLE_EQ(iou({2, 2, 2, 2}, {4, 2, 2, 2}), 0.0); // touching edges
}

TEST(Iou, CornerOverlapIsFourTwentyEighths) {
    // corners (0,0)-(4,4) and (2,2)-(6,6): intersection 4, union 28
    Box a{2, 2, 4, 4}, b{4, 4, 4, 4};
    EXPECT_NEAR(iou(a, b), 4.0 / 28.0, 1e-12);
}

TEST(Iou, SymmetricAndBounded) {
    Rng rng(21);
    for (int t = 0; t < 500; ++t) {
        Box a{rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0.5, 8), rng.uniform(0.5, 8)};
        Box b{rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0.5, 8), rng.uniform(0.5, 8)};
        double ab = iou(a, b);
        EXPECT_DOUBLE_EQ(ab, iou(b, a));
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 1.0);
        EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
    }
}

TEST(Nms, SingleDetectionSurvives) {
    std::vector<Detection> dets = {{{3, 3, 2, 2}, 5, 0.7}};
    auto out = nms(dets, 0.2);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].cls, 5);
    EXPECT_DOUBLE_EQ(out[0].conf, 0.7);
}

TEST(Nms, DuplicateBoxKeepsHigherConfidence) {
    std::vector<Detection> dets = {{{3, 3, 2, 2}, 1, 0.8}, {{3, 3, 2, 2}, 1, 0.9}};
    auto out = nms(dets, 0.2);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out[0].conf, 0.9);
}

TEST(Nms, DifferentClassesNeverSuppressEachOther) {
    std::vector<Detection> dets = {{{3, 3, 2, 2}, 1, 0.9}, {{3, 3, 2, 2}, 2, 0.8}};
    auto out = nms(dets, 0.2);
    EXPECT_EQ(out.size(), 2u);
}

TEST(Nms, MatchesBruteForceOn1000RandomSets) {
    Rng rng(22);
    for (int t = 0; t < 1000; ++t) {
        size_t n = rng.below(30);
        std::vector<Detection> dets;
        for (size_t i = 0; i < n; ++i) {
            // integer grid + discrete confidences force exact ties
            Box b{static_cast<double>(rng.range(1, 12)), static_cast<double>(rng.range(1, 12)),
                  static_cast<double>(rng.range(1, 5)), static_cast<double>(rng.range(1, 5))};
            dets.push_back({b, static_cast<int>(rng.below(4)),
                            static_cast<double>(rng.range(1, 9)) / 10.0});
        }
        double threshold = 0.1 + 0.2 * static_cast<double>(rng.below(4));
        auto ours = nms(dets, threshold);
        auto ref = brute_force_nms(dets, threshold);
        ASSERT_TRUE(same_detections(ours, ref)) << "set " << t;
    }
}

TEST(Nms, ConfidencesNonIncreasingPerClass) {
    Rng rng(23);
    std::vector<Detection> dets;
    for (int i = 0; i < 60; ++i)
        dets.push_back({{rng.uniform(2, 18), rng.uniform(2, 18), rng.uniform(1, 4),
                         rng.uniform(1, 4)},
                        static_cast<int>(rng.below(3)), rng.uniform()});
    auto out = nms(dets, 0.3);
    for (int cls = 0; cls < 3; ++cls) {
        double prev = 2.0;
        for (const Detection& d : out)
            if (d.cls == cls) {
                EXPECT_LE(d.conf, prev);
                prev = d.conf;
            }
    }
}
