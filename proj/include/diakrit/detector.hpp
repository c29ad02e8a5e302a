#pragma once

// Anchor-based single-shot diacritic detector.
//
// Topology: conv1(64,k3,s1) → fire2,fire3(16,64,64) → maxpool →
// fire4,fire5(32,128,128) → maxpool → concat(pooled fire3 branch, fire5
// branch) → fire6,fire7(48,192,192) → fire8,fire9,fire10(96,384,384) →
// dropout → ConvDet(k3,s1, K·(C+5) channels). Two stride-2 pools on the main
// path put the output grid at (H/4)×(W/4); the fire3 branch gets one extra
// pool of its own so both concat inputs sit at stride 4.
//
// Each grid cell holds K anchors; each anchor's channel block is
// [C class logits, confidence logit, δx, δy, δw, δh].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <functional>
#include <utility>
#include <vector>

#include "diakrit/corpus.hpp"
#include "diakrit/geometry.hpp"
#include "diakrit/layers.hpp"
#include "diakrit/model_io.hpp"
#include "diakrit/optim.hpp"
#include "diakrit/rng.hpp"
#include "diakrit/tensor.hpp"
#include <json.hpp>

namespace diakrit {

inline constexpr int kDetectorStride = 4;

struct DetectorConfig {
    int anchors_per_cell = 9;
    int num_classes = 85;
    double nms_threshold = 0.2;
    double dropout = 0.5;
    double lr = 0.01;
    double decay = 0.0001;
    int batch_size = 16;
    // K prior shapes (w, h) in input-image pixels; replace with fitted shapes
    // from fit_anchor_shapes before serious training.
    std::vector<std::pair<double, double>> anchor_shapes = {
        {2, 2}, {3, 2}, {2, 3}, {3, 3}, {4, 3}, {3, 4}, {4, 4}, {5, 3}, {3, 5}};
    double lambda_bbox = 5.0;
    double lambda_conf_pos = 75.0;
    double lambda_conf_neg = 100.0;

    void validate() const {
        if (anchors_per_cell < 1) throw Error("detector config: anchors per cell must be >= 1");
        if (num_classes < 1) throw Error("detector config: class count must be >= 1");
        if (nms_threshold <= 0 || nms_threshold >= 1)
            throw Error("detector config: nms threshold must lie in (0,1)");
        if (dropout < 0 || dropout >= 1)
            throw Error("detector config: dropout must lie in [0,1)");
        if (lr <= 0) throw Error("detector config: learning rate must be > 0");
        if (decay < 0) throw Error("detector config: decay must be >= 0");
        if (batch_size < 1) throw Error("detector config: batch size must be >= 1");
        if (static_cast<int>(anchor_shapes.size()) != anchors_per_cell)
            throw Error("detector config: " + std::to_string(anchor_shapes.size()) +
                        " anchor shapes for " + std::to_string(anchors_per_cell) +
                        " anchors per cell");
        for (auto& [w, h] : anchor_shapes)
            if (w <= 0 || h <= 0) throw Error("detector config: anchor shapes must be positive");
        if (lambda_bbox < 0 || lambda_conf_pos < 0 || lambda_conf_neg < 0)
            throw Error("detector config: loss weights must be >= 0");
    }

    int channels_per_anchor() const { return num_classes + 5; }
    int out_channels() const { return anchors_per_cell * channels_per_anchor(); }
};

struct Anchor {
    int i = 0, j = 0; // grid cell (row, col)
    double cx = 0, cy = 0, w = 0, h = 0;

    Box box() const { return {cx, cy, w, h}; }
};

// One prior per (cell, shape): centers tile the image at the detector stride.
inline std::vector<Anchor> generate_anchors(int grid_h, int grid_w, const DetectorConfig& cfg) {
    if (grid_h < 1 || grid_w < 1) throw Error("anchor grid dims must be >= 1");
    cfg.validate();
    std::vector<Anchor> anchors;
    anchors.reserve(static_cast<size_t>(grid_h) * grid_w * cfg.anchors_per_cell);
    for (int i = 0; i < grid_h; ++i)
        for (int j = 0; j < grid_w; ++j)
            for (int k = 0; k < cfg.anchors_per_cell; ++k) {
                Anchor a;
                a.i = i;
                a.j = j;
                a.cx = (j + 0.5) * kDetectorStride;
                a.cy = (i + 0.5) * kDetectorStride;
                a.w = cfg.anchor_shapes[static_cast<size_t>(k)].first;
                a.h = cfg.anchor_shapes[static_cast<size_t>(k)].second;
                anchors.push_back(a);
            }
    return anchors;
}

// Deterministic Lloyd k-means over (w,h): quantile init over points sorted by
// area, nearest-center assignment with lowest-index tie-break, empty clusters
// reseeded to the point farthest from its center. No randomness, so the same
// boxes always give the same anchors.
inline std::vector<std::pair<double, double>>
fit_anchor_shapes(std::vector<std::pair<double, double>> wh, int k) {
    if (k < 1) throw Error("anchor fitting needs k >= 1");
    if (static_cast<int>(wh.size()) < k)
        throw Error("anchor fitting needs at least " + std::to_string(k) + " boxes, got " +
                    std::to_string(wh.size()));
    for (auto& [w, h] : wh)
        if (w <= 0 || h <= 0) throw Error("anchor fitting: box dims must be positive");
    std::sort(wh.begin(), wh.end(), [](const auto& a, const auto& b) {
        double aa = a.first * a.second, ab = b.first * b.second;
        if (aa != ab) return aa < ab;
        return a < b;
    });
    const int n = static_cast<int>(wh.size());
    std::vector<std::pair<double, double>> centers(k);
    for (int c = 0; c < k; ++c) centers[c] = wh[static_cast<size_t>((2 * c + 1) * n / (2 * k))];

    auto dist2 = [](const std::pair<double, double>& a, const std::pair<double, double>& b) {
        double dw = a.first - b.first, dh = a.second - b.second;
        return dw * dw + dh * dh;
    };

    std::vector<int> assign(wh.size(), -1);
    for (int iter = 0; iter < 200; ++iter) {
        bool changed = false;
        for (size_t p = 0; p < wh.size(); ++p) {
            int best = 0;
            double bd = dist2(wh[p], centers[0]);
            for (int c = 1; c < k; ++c) {
                double d = dist2(wh[p], centers[static_cast<size_t>(c)]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[p] != best) {
                assign[p] = best;
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
        std::vector<double> sw(static_cast<size_t>(k), 0), sh(static_cast<size_t>(k), 0);
        std::vector<int> cnt(static_cast<size_t>(k), 0);
        for (size_t p = 0; p < wh.size(); ++p) {
            sw[static_cast<size_t>(assign[p])] += wh[p].first;
            sh[static_cast<size_t>(assign[p])] += wh[p].second;
            cnt[static_cast<size_t>(assign[p])]++;
        }
        for (int c = 0; c < k; ++c) {
            if (cnt[static_cast<size_t>(c)] > 0) {
                centers[static_cast<size_t>(c)] = {sw[static_cast<size_t>(c)] / cnt[static_cast<size_t>(c)],
                                                   sh[static_cast<size_t>(c)] / cnt[static_cast<size_t>(c)]};
            } else {
                size_t far = 0;
                double fd = -1;
                for (size_t p = 0; p < wh.size(); ++p) {
                    double d = dist2(wh[p], centers[static_cast<size_t>(assign[p])]);
                    if (d > fd) {
                        fd = d;
                        far = p;
                    }
                }
                centers[static_cast<size_t>(c)] = wh[far];
                assign[far] = c;
            }
        }
    }
    std::sort(centers.begin(), centers.end(), [](const auto& a, const auto& b) {
        double aa = a.first * a.second, ab = b.first * b.second;
        if (aa != ab) return aa < ab;
        return a < b;
    });
    return centers;
}

// ---- box transform ---------------------------------------------------------------

// deltas = (δx, δy, δw, δh): cx = âx + ŵ·δx, cy = ây + ĥ·δy, w = ŵ·e^δw, h = ĥ·e^δh
inline Box decode_box(const Anchor& a, const double* d) {
    return {a.cx + a.w * d[0], a.cy + a.h * d[1], a.w * std::exp(d[2]), a.h * std::exp(d[3])};
}

inline void encode_box(const Box& b, const Anchor& a, double* d) {
    d[0] = (b.cx - a.cx) / a.w;
    d[1] = (b.cy - a.cy) / a.h;
    d[2] = std::log(b.w / a.w);
    d[3] = std::log(b.h / a.h);
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// ---- decode to detections ----------------------------------------------------------

// One Detection per anchor: class = argmax of the softmax over class logits,
// confidence = sigmoid of the confidence logit, box decoded then clipped to
// the image. Thresholding and NMS are the caller's business.
template <typename T>
inline std::vector<Detection> decode(const Tensor<T>& out, int n,
                                     const std::vector<Anchor>& anchors,
                                     const DetectorConfig& cfg, int img_w, int img_h) {
    const int gh = out.dim(1), gw = out.dim(2), ch = out.dim(3);
    if (ch != cfg.out_channels())
        throw Error("decode: output has " + std::to_string(ch) + " channels, config implies " +
                    std::to_string(cfg.out_channels()));
    if (anchors.size() != static_cast<size_t>(gh) * gw * cfg.anchors_per_cell)
        throw Error("decode: anchor list does not match the output grid");
    const int C = cfg.num_classes, cpa = cfg.channels_per_anchor();
    std::vector<Detection> dets;
    dets.reserve(anchors.size());
    for (size_t ai = 0; ai < anchors.size(); ++ai) {
        const Anchor& a = anchors[ai];
        const int k = static_cast<int>(ai) % cfg.anchors_per_cell;
        const int c0 = k * cpa;
        auto logit = [&](int c) { return static_cast<double>(out.at(n, a.i, a.j, c0 + c)); };
        int best = 0;
        double best_logit = logit(0);
        for (int c = 1; c < C; ++c)
            if (logit(c) > best_logit) {
                best_logit = logit(c);
                best = c;
            }
        double deltas[4];
        for (int d = 0; d < 4; ++d)
            deltas[d] = std::clamp(logit(C + 1 + d), -10.0, 10.0); // exp() stays finite
        Box b = decode_box(a, deltas);
        double x0 = std::clamp(b.x0(), 0.0, static_cast<double>(img_w));
        double x1 = std::clamp(b.x1(), 0.0, static_cast<double>(img_w));
        double y0 = std::clamp(b.y0(), 0.0, static_cast<double>(img_h));
        double y1 = std::clamp(b.y1(), 0.0, static_cast<double>(img_h));
        Box clipped{(x0 + x1) / 2, (y0 + y1) / 2, std::max(x1 - x0, 1e-3),
                    std::max(y1 - y0, 1e-3)};
        dets.push_back({clipped, best, sigmoid(logit(C))});
    }
    return dets;
}

// ---- ground-truth assignment and loss ------------------------------------------------

struct GtBox {
    Box box;
    int cls = 0;
};

struct Assignment {
    std::vector<int> responsible;  // per ground-truth box: anchor index
    std::vector<uint8_t> positive; // per anchor
};

// Greedy in ground-truth order: each box claims the unclaimed anchor of
// highest prior IoU (lowest index on ties), so no anchor answers for two
// boxes and every box gets exactly one anchor.
inline Assignment assign_ground_truth(const std::vector<Anchor>& anchors,
                                      const std::vector<GtBox>& gts) {
    if (gts.size() > anchors.size())
        throw Error("more ground-truth boxes (" + std::to_string(gts.size()) +
                    ") than anchors (" + std::to_string(anchors.size()) + ")");
    Assignment as;
    as.positive.assign(anchors.size(), 0);
    as.responsible.reserve(gts.size());
    for (const GtBox& gt : gts) {
        int best = -1;
        double best_iou = -1;
        for (size_t ai = 0; ai < anchors.size(); ++ai) {
            if (as.positive[ai]) continue;
            double v = iou(gt.box, anchors[ai].box());
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(ai);
            }
        }
        as.positive[static_cast<size_t>(best)] = 1;
        as.responsible.push_back(best);
    }
    return as;
}

struct DetLoss {
    double cls = 0, bbox = 0, conf = 0;
    double total() const { return cls + bbox + conf; }
};

// Three-part anchor loss for one image, with optional gradient accumulation
// into dout (same shape as out; caller zeroes and scales).
//
//   class: mean cross-entropy over responsible anchors
//   bbox:  λ_bbox · mean squared error over the 4·N_pos encoded deltas
//   conf:  λ+ · mean over positives of (sigmoid(conf) − IoU(decoded, gt))²
//        + λ− · mean over negatives of sigmoid(conf)²
//
// The IoU inside the confidence target is treated as a constant label: the
// gradient does not flow through the decoded box into the deltas. The
// finite-difference tests therefore pin their operating point at
// conf = IoU, where that dropped path has zero first-order effect.
template <typename T>
inline DetLoss assign_and_loss(const Tensor<T>& out, int n, const std::vector<Anchor>& anchors,
                               const std::vector<GtBox>& gts, const DetectorConfig& cfg,
                               int img_w, int img_h, Tensor<T>* dout = nullptr) {
    const int gh = out.dim(1), gw = out.dim(2), ch = out.dim(3);
    if (ch != cfg.out_channels())
        throw Error("loss: output has " + std::to_string(ch) + " channels, config implies " +
                    std::to_string(cfg.out_channels()));
    if (anchors.size() != static_cast<size_t>(gh) * gw * cfg.anchors_per_cell)
        throw Error("loss: anchor list does not match the output grid");
    if (dout && !dout->same_shape(out))
        throw Error("loss: gradient tensor shape " + dout->shape_str() + " vs output " +
                    out.shape_str());
    for (const GtBox& gt : gts) {
        if (gt.cls < 0 || gt.cls >= cfg.num_classes)
            throw Error("loss: ground-truth class " + std::to_string(gt.cls) +
                        " outside [0," + std::to_string(cfg.num_classes) + ")");
        if (gt.box.w <= 0 || gt.box.h <= 0 || gt.box.x0() < 0 || gt.box.y0() < 0 ||
            gt.box.x1() > img_w || gt.box.y1() > img_h)
            throw Error("loss: ground-truth box outside the image");
    }

    const int C = cfg.num_classes, cpa = cfg.channels_per_anchor();
    Assignment as = assign_ground_truth(anchors, gts);
    const size_t npos = gts.size(), nneg = anchors.size() - npos;

    auto chan = [&](size_t ai, int c) {
        const Anchor& a = anchors[ai];
        const int k = static_cast<int>(ai) % cfg.anchors_per_cell;
        return ((static_cast<size_t>(n) * gh + a.i) * gw + a.j) * ch +
               static_cast<size_t>(k * cpa + c);
    };

    DetLoss loss;

    // positives: class CE, bbox MSE on deltas, confidence regression to IoU
    for (size_t g = 0; g < gts.size(); ++g) {
        const size_t ai = static_cast<size_t>(as.responsible[g]);
        const Anchor& a = anchors[ai];

        std::vector<double> logits(static_cast<size_t>(C));
        double mx = -1e300;
        for (int c = 0; c < C; ++c) {
            logits[static_cast<size_t>(c)] = static_cast<double>(out.v[chan(ai, c)]);
            mx = std::max(mx, logits[static_cast<size_t>(c)]);
        }
        double Z = 0;
        for (int c = 0; c < C; ++c) Z += std::exp(logits[static_cast<size_t>(c)] - mx);
        const double logZ = mx + std::log(Z);
        loss.cls += (logZ - logits[static_cast<size_t>(gts[g].cls)]) / static_cast<double>(npos);
        if (dout)
            for (int c = 0; c < C; ++c) {
                double p = std::exp(logits[static_cast<size_t>(c)] - logZ);
                double grad = (p - (c == gts[g].cls ? 1.0 : 0.0)) / static_cast<double>(npos);
                dout->v[chan(ai, c)] += static_cast<T>(grad);
            }

        double target[4], pred[4];
        encode_box(gts[g].box, a, target);
        for (int d = 0; d < 4; ++d) pred[d] = static_cast<double>(out.v[chan(ai, C + 1 + d)]);
        for (int d = 0; d < 4; ++d) {
            double diff = pred[d] - target[d];
            loss.bbox += cfg.lambda_bbox * diff * diff / (4.0 * static_cast<double>(npos));
            if (dout)
                dout->v[chan(ai, C + 1 + d)] +=
                    static_cast<T>(cfg.lambda_bbox * diff / (2.0 * static_cast<double>(npos)));
        }

        const double z = static_cast<double>(out.v[chan(ai, C)]);
        const double s = sigmoid(z);
        const double iou_target = iou(decode_box(a, pred), gts[g].box);
        const double diff = s - iou_target;
        loss.conf += cfg.lambda_conf_pos * diff * diff / static_cast<double>(npos);
        if (dout)
            dout->v[chan(ai, C)] += static_cast<T>(cfg.lambda_conf_pos * 2.0 * diff * s *
                                                   (1.0 - s) / static_cast<double>(npos));
    }

    // negatives: push confidence to zero
    if (nneg > 0) {
        for (size_t ai = 0; ai < anchors.size(); ++ai) {
            if (as.positive[ai]) continue;
            const double z = static_cast<double>(out.v[chan(ai, C)]);
            const double s = sigmoid(z);
            loss.conf += cfg.lambda_conf_neg * s * s / static_cast<double>(nneg);
            if (dout)
                dout->v[chan(ai, C)] += static_cast<T>(cfg.lambda_conf_neg * 2.0 * s * s *
                                                       (1.0 - s) / static_cast<double>(nneg));
        }
    }
    return loss;
}

// ---- the network -----------------------------------------------------------------------

class DetectorNet {
    Rng rng_{0}; // declared first: the layer constructors below consume it

public:
    DetectorConfig cfg;
    Conv2d<float> conv1;
    Relu<float> relu1;
    Fire<float> f2, f3, f4, f5, f6, f7, f8, f9, f10;
    MaxPool<float> pool1, pool2, pool_branch;
    Dropout<float> drop;
    Conv2d<float> convdet;

    DetectorNet(const DetectorConfig& config, uint64_t seed)
        : rng_(seed), cfg((config.validate(), config)), conv1(3, 64, 3, 1, Pad::Same, rng_),
          f2(64, 16, 64, 64, rng_), f3(128, 16, 64, 64, rng_), f4(128, 32, 128, 128, rng_),
          f5(256, 32, 128, 128, rng_), f6(384, 48, 192, 192, rng_), f7(384, 48, 192, 192, rng_),
          f8(384, 96, 384, 384, rng_), f9(768, 96, 384, 384, rng_),
          f10(768, 96, 384, 384, rng_), drop(config.dropout),
          convdet(768, config.out_channels(), 3, 1, Pad::Same, rng_) {}

    // x: [N, H, W, 3] with H and W divisible by 4, values in [0,1]
    Tensor<float> forward(const Tensor<float>& x, bool train, uint64_t dropout_seed = 0) {
        if (x.rank() != 4 || x.dim(3) != 3)
            throw Error("detector expects [N,H,W,3] input, got " + x.shape_str());
        if (x.dim(1) % kDetectorStride != 0)
            throw Error("detector input height " + std::to_string(x.dim(1)) +
                        " not divisible by " + std::to_string(kDetectorStride));
        if (x.dim(2) % kDetectorStride != 0)
            throw Error("detector input width " + std::to_string(x.dim(2)) +
                        " not divisible by " + std::to_string(kDetectorStride));
        Tensor<float> t = relu1.forward(conv1.forward(x, train), train);
        t = f3.forward(f2.forward(t, train), train);
        Tensor<float> p1 = pool1.forward(t, train);
        t = f5.forward(f4.forward(p1, train), train);
        Tensor<float> branch_a = pool_branch.forward(p1, train);
        Tensor<float> branch_b = pool2.forward(t, train);
        t = channel_concat(branch_a, branch_b);
        t = f7.forward(f6.forward(t, train), train);
        t = f10.forward(f9.forward(f8.forward(t, train), train), train);
        t = drop.forward(t, train, dropout_seed);
        return convdet.forward(t, train);
    }

    int out_channels() const { return cfg.out_channels(); }

    Tensor<float> backward(const Tensor<float>& dy) {
        Tensor<float> d = drop.backward(convdet.backward(dy));
        d = f8.backward(f9.backward(f10.backward(d)));
        d = f6.backward(f7.backward(d));
        auto [da, db] = channel_split(d, 128, 256);
        Tensor<float> dp1 = pool_branch.backward(da);
        Tensor<float> dt5 = pool2.backward(db);
        Tensor<float> dp1b = f4.backward(f5.backward(dt5));
        for (size_t i = 0; i < dp1.numel(); ++i) dp1.v[i] += dp1b.v[i];
        d = f2.backward(f3.backward(pool1.backward(dp1)));
        return conv1.backward(relu1.backward(d));
    }

    std::vector<Param<float>> params() {
        std::vector<Param<float>> p;
        auto add = [&](std::vector<Param<float>> q) {
            for (auto& e : q) p.push_back(e);
        };
        add(conv1.params("conv1"));
        add(f2.params("fire2"));
        add(f3.params("fire3"));
        add(f4.params("fire4"));
        add(f5.params("fire5"));
        add(f6.params("fire6"));
        add(f7.params("fire7"));
        add(f8.params("fire8"));
        add(f9.params("fire9"));
        add(f10.params("fire10"));
        add(convdet.params("convdet"));
        return p;
    }

};

inline DetectorNet build_detector(const DetectorConfig& cfg, uint64_t seed) {
    return DetectorNet(cfg, seed);
}

// ---- parameter snapshots (divergence recovery, determinism checks) ----------------------

inline std::vector<std::vector<float>> snapshot_params(std::vector<Param<float>>& params) {
    std::vector<std::vector<float>> snap;
    snap.reserve(params.size());
    for (auto& p : params) snap.push_back(p.value->v);
    return snap;
}

inline void restore_params(std::vector<Param<float>>& params,
                           const std::vector<std::vector<float>>& snap) {
    if (snap.size() != params.size()) throw Error("parameter snapshot does not match network");
    for (size_t i = 0; i < params.size(); ++i) params[i].value->v = snap[i];
}

// ---- training ----------------------------------------------------------------------------

struct EpochLog {
    int epoch = 0;
    double cls = 0, bbox = 0, conf = 0, total = 0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    bool diverged = false;
    std::string divergence_note;
    int64_t steps = 0;
};

namespace detector_detail {

// Copies an image into batch slot n, normalized to [0,1], replicating the
// rightmost column into any width padding.
inline void blit_normalized(const Image& img, Tensor<float>& x, int n) {
    const int H = x.dim(1), W = x.dim(2);
    for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
            Rgb c = img.get(std::min(xx, img.width() - 1), std::min(y, img.height() - 1));
            x.at(n, y, xx, 0) = static_cast<float>(c.r) / 255.0f;
            x.at(n, y, xx, 1) = static_cast<float>(c.g) / 255.0f;
            x.at(n, y, xx, 2) = static_cast<float>(c.b) / 255.0f;
        }
}

inline std::vector<GtBox> gt_boxes(const AnnotatedImage& a) {
    std::vector<GtBox> gts;
    gts.reserve(a.boxes.size());
    for (const WordBox& b : a.boxes) gts.push_back({{b.cx, b.cy, b.w, b.h}, b.cls});
    return gts;
}

inline int padded(int v) {
    return (v + kDetectorStride - 1) / kDetectorStride * kDetectorStride;
}

} // namespace detector_detail

// Seed-deterministic SGD training. Images are bucketed by (height, padded
// width) so each batch stacks into one tensor; batch composition and order
// reshuffle every epoch from the seed. A non-finite loss or gradient aborts
// the run and restores the last end-of-epoch weights. `on_epoch`, if given,
// observes each completed epoch's mean losses (it must not mutate the net).
inline TrainLog train_detector(DetectorNet& net, const std::vector<AnnotatedImage>& corpus,
                               int epochs, uint64_t seed,
                               const std::function<void(const EpochLog&)>& on_epoch = {}) {
    if (corpus.empty()) throw Error("training corpus is empty");
    if (epochs < 1) throw Error("epoch count must be >= 1");
    const DetectorConfig& cfg = net.cfg;

    std::map<std::pair<int, int>, std::vector<size_t>> buckets;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const Image& img = corpus[i].image;
        buckets[{detector_detail::padded(img.height()), detector_detail::padded(img.width())}]
            .push_back(i);
    }

    auto params = net.params();
    Sgd<float> sgd;
    sgd.lr = cfg.lr;
    sgd.decay = cfg.decay;

    std::map<std::pair<int, int>, std::vector<Anchor>> anchor_cache;
    auto anchors_for = [&](int h, int w) -> const std::vector<Anchor>& {
        auto key = std::make_pair(h / kDetectorStride, w / kDetectorStride);
        auto it = anchor_cache.find(key);
        if (it == anchor_cache.end())
            it = anchor_cache.emplace(key, generate_anchors(key.first, key.second, cfg)).first;
        return it->second;
    };

    TrainLog log;
    Rng rng(seed);
    auto last_good = snapshot_params(params);
    int64_t step = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        // batches: shuffled within buckets, then shuffled across buckets
        std::vector<std::vector<size_t>> batches;
        for (auto& [key, idxs] : buckets) {
            std::vector<size_t> order = idxs;
            rng.shuffle(order);
            for (size_t at = 0; at < order.size(); at += static_cast<size_t>(cfg.batch_size))
                batches.emplace_back(order.begin() + static_cast<long>(at),
                                     order.begin() +
                                         static_cast<long>(std::min(
                                             at + static_cast<size_t>(cfg.batch_size),
                                             order.size())));
        }
        rng.shuffle(batches);

        DetLoss epoch_sum;
        size_t epoch_batches = 0;
        bool failed = false;

        for (const auto& batch : batches) {
            const Image& first = corpus[batch[0]].image;
            const int H = detector_detail::padded(first.height());
            const int W = detector_detail::padded(first.width());
            const int B = static_cast<int>(batch.size());
            Tensor<float> x({B, H, W, 3});
            for (int b = 0; b < B; ++b)
                detector_detail::blit_normalized(corpus[batch[static_cast<size_t>(b)]].image, x,
                                                 b);

            Tensor<float> out = net.forward(x, true, rng.next());
            Tensor<float> dout(out.shape);
            DetLoss batch_loss;
            for (int b = 0; b < B; ++b) {
                DetLoss l = assign_and_loss(
                    out, b, anchors_for(H, W),
                    detector_detail::gt_boxes(corpus[batch[static_cast<size_t>(b)]]), cfg, W, H,
                    &dout);
                batch_loss.cls += l.cls / B;
                batch_loss.bbox += l.bbox / B;
                batch_loss.conf += l.conf / B;
            }
            for (float& v : dout.v) v /= static_cast<float>(B);

            if (!std::isfinite(batch_loss.total())) {
                restore_params(params, last_good);
                log.diverged = true;
                log.divergence_note = "non-finite loss at step " + std::to_string(step) +
                                      "; restored last end-of-epoch weights";
                failed = true;
                break;
            }
            try {
                net.backward(dout);
                sgd.step(params, step);
            } catch (const Error& e) {
                restore_params(params, last_good);
                log.diverged = true;
                log.divergence_note = std::string(e.what()) +
                                      "; restored last end-of-epoch weights";
                failed = true;
                break;
            }
            ++step;
            epoch_sum.cls += batch_loss.cls;
            epoch_sum.bbox += batch_loss.bbox;
            epoch_sum.conf += batch_loss.conf;
            ++epoch_batches;
        }

        if (epoch_batches > 0) {
            EpochLog el;
            el.epoch = epoch;
            el.cls = epoch_sum.cls / static_cast<double>(epoch_batches);
            el.bbox = epoch_sum.bbox / static_cast<double>(epoch_batches);
            el.conf = epoch_sum.conf / static_cast<double>(epoch_batches);
            el.total = el.cls + el.bbox + el.conf;
            log.epochs.push_back(el);
            if (on_epoch) on_epoch(el);
        }
        if (failed) break;
        last_good = snapshot_params(params);
    }
    log.steps = step;
    return log;
}

// ---- evaluation ----------------------------------------------------------------------------

// Runs the detector on one image of any size (sides padded up to the stride)
// and returns post-NMS detections in image pixel coordinates.
inline std::vector<Detection> detect_in_image(DetectorNet& net, const Image& img) {
    const int H = detector_detail::padded(img.height());
    const int W = detector_detail::padded(img.width());
    Tensor<float> x({1, H, W, 3});
    detector_detail::blit_normalized(img, x, 0);
    Tensor<float> out = net.forward(x, false);
    auto anchors = generate_anchors(H / kDetectorStride, W / kDetectorStride, net.cfg);
    return nms(decode(out, 0, anchors, net.cfg, W, H), net.cfg.nms_threshold);
}

inline size_t save_detector(DetectorNet& net, const std::string& path) {
    nlohmann::ordered_json desc;
    desc["kind"] = "detector";
    desc["num_classes"] = net.cfg.num_classes;
    desc["anchors_per_cell"] = net.cfg.anchors_per_cell;
    auto shapes = nlohmann::json::array();
    for (auto& [w, h] : net.cfg.anchor_shapes) shapes.push_back({w, h});
    desc["anchor_shapes"] = shapes;
    desc["nms_threshold"] = net.cfg.nms_threshold;
    auto params = net.params();
    return save_model(desc.dump(), params, path);
}

// Rebuilds the network from the file's own configuration descriptor.
inline DetectorNet load_detector(const std::string& path) {
    ModelFile mf = load_model(path);
    nlohmann::json desc = nlohmann::json::parse(mf.descriptor, nullptr, false);
    if (desc.is_discarded() || desc.value("kind", "") != "detector")
        throw ModelFormatError(ModelFormatError::Kind::BadDescriptor,
                               path + ": not a detector model");
    DetectorConfig cfg;
    try {
        cfg.num_classes = desc.at("num_classes").get<int>();
        cfg.anchors_per_cell = desc.at("anchors_per_cell").get<int>();
        cfg.anchor_shapes.clear();
        for (const auto& s : desc.at("anchor_shapes"))
            cfg.anchor_shapes.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
        cfg.nms_threshold = desc.at("nms_threshold").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(ModelFormatError::Kind::BadDescriptor,
                               path + ": descriptor missing detector fields: " + e.what());
    }
    DetectorNet net(cfg, 0);
    auto params = net.params();
    load_into(mf, params);
    return net;
}

struct MatchStats {
    size_t matched = 0;
    double iou_sum = 0;
};

// Detections visit by confidence (descending, stable); each claims its
// best-IoU unclaimed ground-truth box of the same class at IoU ≥ 0.5.
inline MatchStats match_detections(const std::vector<Detection>& dets,
                                   const std::vector<GtBox>& gts) {
    std::vector<size_t> order(dets.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return dets[a].conf > dets[b].conf; });
    std::vector<uint8_t> claimed(gts.size(), 0);
    MatchStats ms;
    for (size_t di : order) {
        int best = -1;
        double best_iou = -1;
        for (size_t g = 0; g < gts.size(); ++g) {
            if (claimed[g] || gts[g].cls != dets[di].cls) continue;
            double v = iou(dets[di].box, gts[g].box);
            if (v >= 0.5 && v > best_iou) {
                best_iou = v;
                best = static_cast<int>(g);
            }
        }
        if (best >= 0) {
            claimed[static_cast<size_t>(best)] = 1;
            ++ms.matched;
            ms.iou_sum += best_iou;
        }
    }
    return ms;
}

struct DetectorEval {
    double cls = 0, bbox = 0, conf = 0, total = 0;
    double mean_iou = 0, recall = 0;
    size_t images = 0, gt_boxes = 0;
};

inline DetectorEval evaluate_detector(DetectorNet& net,
                                      const std::vector<AnnotatedImage>& corpus) {
    if (corpus.empty()) throw Error("evaluation corpus is empty");
    const DetectorConfig& cfg = net.cfg;
    DetectorEval ev;
    size_t matched = 0;
    double iou_sum = 0;
    std::map<std::pair<int, int>, std::vector<Anchor>> anchor_cache;
    for (const AnnotatedImage& a : corpus) {
        const int H = detector_detail::padded(a.image.height());
        const int W = detector_detail::padded(a.image.width());
        Tensor<float> x({1, H, W, 3});
        detector_detail::blit_normalized(a.image, x, 0);
        Tensor<float> out = net.forward(x, false);
        auto key = std::make_pair(H / kDetectorStride, W / kDetectorStride);
        auto it = anchor_cache.find(key);
        if (it == anchor_cache.end())
            it = anchor_cache.emplace(key, generate_anchors(key.first, key.second, cfg)).first;
        const std::vector<Anchor>& anchors = it->second;

        std::vector<GtBox> gts = detector_detail::gt_boxes(a);
        DetLoss l = assign_and_loss(out, 0, anchors, gts, cfg, W, H);
        ev.cls += l.cls;
        ev.bbox += l.bbox;
        ev.conf += l.conf;

        std::vector<Detection> dets =
            nms(decode(out, 0, anchors, cfg, W, H), cfg.nms_threshold);
        MatchStats ms = match_detections(dets, gts);
        matched += ms.matched;
        iou_sum += ms.iou_sum;
        ev.gt_boxes += gts.size();
        ++ev.images;
    }
    ev.cls /= static_cast<double>(ev.images);
    ev.bbox /= static_cast<double>(ev.images);
    ev.conf /= static_cast<double>(ev.images);
    ev.total = ev.cls + ev.bbox + ev.conf;
    ev.recall = ev.gt_boxes ? static_cast<double>(matched) / static_cast<double>(ev.gt_boxes) : 0;
    ev.mean_iou = matched ? iou_sum / static_cast<double>(matched) : 0;
    return ev;
}

} // namespace diakrit
