#pragma once

// End-to-end orchestration: image → line localization → per-line diacritic
// detection → presence aggregation → language prediction; plus the evaluation
// and benchmark harnesses behind the CLI.
//
// Line localization is a deterministic projection-profile segmenter: global
// Otsu binarization, maximal row bands with at least 2 ink pixels (single-row
// gaps bridged, so dotted glyphs cannot split a line), columns trimmed to the
// band's ink extent.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "diakrit/corpus.hpp"
#include "diakrit/detector.hpp"
#include "diakrit/image.hpp"
#include "diakrit/langid.hpp"

namespace diakrit {

// ---- line localization ---------------------------------------------------------------

struct LineBox {
    int x = 0, y = 0, w = 0, h = 0;

    bool operator==(const LineBox&) const = default;
    bool contains(int px, int py) const {
        return px >= x && px < x + w && py >= y && py < y + h;
    }
};

namespace pipeline_detail {

// Global Otsu threshold on the gray histogram; ink is the minority side, so
// dark-on-light and light-on-dark text both binarize correctly.
inline std::vector<uint8_t> ink_mask(const Image& img) {
    const int W = img.width(), H = img.height();
    std::array<size_t, 256> hist{};
    std::vector<uint8_t> gray(static_cast<size_t>(W) * H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            Rgb c = img.get(x, y);
            uint8_t g = static_cast<uint8_t>((c.r + c.g + c.b) / 3);
            gray[static_cast<size_t>(y) * W + x] = g;
            ++hist[g];
        }
    const double total = static_cast<double>(W) * H;
    double sum_all = 0;
    for (int v = 0; v < 256; ++v) sum_all += static_cast<double>(v) * static_cast<double>(hist[static_cast<size_t>(v)]);
    double best_var = -1, sum_lo = 0, n_lo = 0;
    int best_t = 0;
    for (int t = 0; t < 255; ++t) {
        n_lo += static_cast<double>(hist[static_cast<size_t>(t)]);
        sum_lo += static_cast<double>(t) * static_cast<double>(hist[static_cast<size_t>(t)]);
        double n_hi = total - n_lo;
        if (n_lo == 0 || n_hi == 0) continue;
        double mu_lo = sum_lo / n_lo, mu_hi = (sum_all - sum_lo) / n_hi;
        double var = n_lo * n_hi * (mu_lo - mu_hi) * (mu_lo - mu_hi);
        if (var > best_var) {
            best_var = var;
            best_t = t;
        }
    }
    std::vector<uint8_t> mask(gray.size(), 0);
    if (best_var <= 0) return mask; // flat image: no ink
    size_t dark = 0;
    for (uint8_t g : gray)
        if (g <= best_t) ++dark;
    const bool ink_is_dark = dark * 2 <= gray.size();
    for (size_t i = 0; i < gray.size(); ++i)
        mask[i] = (gray[i] <= best_t) == ink_is_dark ? 1 : 0;
    return mask;
}

} // namespace pipeline_detail

inline std::vector<LineBox> localize_lines(const Image& img) {
    const int W = img.width(), H = img.height();
    std::vector<uint8_t> mask = pipeline_detail::ink_mask(img);
    std::vector<int> row_ink(static_cast<size_t>(H), 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) row_ink[static_cast<size_t>(y)] += mask[static_cast<size_t>(y) * W + x];

    constexpr int kNoiseFloor = 2;
    std::vector<std::pair<int, int>> bands; // [y0, y1] inclusive
    for (int y = 0; y < H; ++y) {
        if (row_ink[static_cast<size_t>(y)] < kNoiseFloor) continue;
        if (!bands.empty() && y - bands.back().second <= 2)
            bands.back().second = y; // bridge a gap of at most one blank row
        else
            bands.push_back({y, y});
    }

    std::vector<LineBox> lines;
    for (auto [y0, y1] : bands) {
        int x0 = W, x1 = -1;
        for (int y = y0; y <= y1; ++y)
            for (int x = 0; x < W; ++x)
                if (mask[static_cast<size_t>(y) * W + x]) {
                    x0 = std::min(x0, x);
                    x1 = std::max(x1, x);
                }
        if (x1 < x0) continue;
        lines.push_back({x0, y0, x1 - x0 + 1, y1 - y0 + 1});
    }
    return lines;
}

// ---- end-to-end identification --------------------------------------------------------

// Nearest-neighbor rescale of a line crop to the detector's training height.
inline Image scale_line_crop(const Image& img, const LineBox& lb) {
    const int out_h = kWordImageHeight;
    const int out_w = std::max(1, static_cast<int>(std::lround(
                                       static_cast<double>(lb.w) * out_h / lb.h)));
    Image out(out_w, out_h);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            int sx = lb.x + std::min(lb.w - 1, static_cast<int>(static_cast<double>(x) * lb.w / out_w));
            int sy = lb.y + std::min(lb.h - 1, static_cast<int>(static_cast<double>(y) * lb.h / out_h));
            out.set(x, y, img.get(sx, sy));
        }
    return out;
}

struct PipelineResult {
    LanguagePrediction prediction;
    std::vector<Detection> detections; // original-image coordinates
    std::vector<LineBox> lines;
    PresenceVector presence;
};

inline PipelineResult identify_language(const Image& img, DetectorNet& det, LangidNet& lid,
                                        double min_confidence = 0.5) {
    PipelineResult res;
    res.lines = localize_lines(img);
    for (const LineBox& lb : res.lines) {
        Image crop = scale_line_crop(img, lb);
        const double sx = static_cast<double>(lb.w) / crop.width();
        const double sy = static_cast<double>(lb.h) / crop.height();
        for (Detection d : detect_in_image(det, crop)) {
            d.box.cx = lb.x + d.box.cx * sx;
            d.box.cy = lb.y + d.box.cy * sy;
            d.box.w *= sx;
            d.box.h *= sy;
            res.detections.push_back(d);
        }
    }
    res.presence = presence_from_detections(res.detections, min_confidence);
    res.prediction = predict(lid, res.presence);
    return res;
}

// ---- evaluation ------------------------------------------------------------------------

struct LangScore {
    size_t tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
};

struct EvalReport {
    std::array<LangScore, kNumLanguages> per_lang{};
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    // confusion[truth][predicted]; the extra final column counts indeterminate
    std::array<std::array<size_t, kNumLanguages + 1>, kNumLanguages> confusion{};
    size_t images = 0;
};

// One-vs-rest scores over argmax predictions; an indeterminate prediction is
// a miss for the true language and a hit for no one.
inline EvalReport
score_predictions(const std::vector<std::pair<Lang, std::optional<Lang>>>& pairs) {
    EvalReport r;
    r.images = pairs.size();
    for (const auto& [truth, pred] : pairs) {
        const size_t t = static_cast<size_t>(truth);
        const size_t p = pred ? static_cast<size_t>(*pred) : static_cast<size_t>(kNumLanguages);
        ++r.confusion[t][p];
        if (pred && *pred == truth) {
            ++r.per_lang[t].tp;
        } else {
            ++r.per_lang[t].fn;
            if (pred) ++r.per_lang[static_cast<size_t>(*pred)].fp;
        }
    }
    for (LangScore& s : r.per_lang) {
        s.precision = (s.tp + s.fp) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
        s.recall = (s.tp + s.fn) ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
        s.f1 = (s.precision + s.recall) > 0
                   ? 2 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
        r.macro_precision += s.precision / kNumLanguages;
        r.macro_recall += s.recall / kNumLanguages;
        r.macro_f1 += s.f1 / kNumLanguages;
    }
    return r;
}

namespace pipeline_detail {

inline Lang require_label(const AnnotatedImage& a, size_t index) {
    if (!a.lang)
        throw DataError("test image " + std::to_string(index) + " has no language label");
    return *a.lang;
}

} // namespace pipeline_detail

// Full-pipeline evaluation: detector finds the diacritics in each image.
inline EvalReport eval_langid(const std::vector<AnnotatedImage>& testset, DetectorNet& det,
                              LangidNet& lid, double min_confidence = 0.5) {
    std::vector<std::pair<Lang, std::optional<Lang>>> pairs;
    pairs.reserve(testset.size());
    for (size_t i = 0; i < testset.size(); ++i) {
        Lang truth = pipeline_detail::require_label(testset[i], i);
        PipelineResult res = identify_language(testset[i].image, det, lid, min_confidence);
        pairs.push_back({truth, res.prediction.language});
    }
    return score_predictions(pairs);
}

// Classifier-only evaluation: presence vectors come from the ground-truth
// annotations, isolating the language identifier from detector mistakes.
inline EvalReport eval_langid_gt(const std::vector<AnnotatedImage>& testset, LangidNet& lid) {
    std::vector<std::pair<Lang, std::optional<Lang>>> pairs;
    pairs.reserve(testset.size());
    for (size_t i = 0; i < testset.size(); ++i) {
        Lang truth = pipeline_detail::require_label(testset[i], i);
        PresenceVector v;
        for (const WordBox& b : testset[i].boxes) v.set(b.cls);
        pairs.push_back({truth, predict(lid, v).language});
    }
    return score_predictions(pairs);
}

// ---- benchmark -------------------------------------------------------------------------

struct StageStats {
    double median_ms = 0, p95_ms = 0;
};

struct BenchReport {
    size_t detector_bytes = 0, langid_bytes = 0;
    StageStats localize, detect, langid, total;
    size_t runs = 0;
    std::string hardware;
};

namespace pipeline_detail {

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    size_t idx = static_cast<size_t>(std::lround(q * static_cast<double>(v.size() - 1)));
    return v[idx];
}

inline std::string hardware_descriptor() {
    std::string model = "unknown cpu";
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        auto at = line.find("model name");
        if (at != std::string::npos) {
            auto colon = line.find(':');
            if (colon != std::string::npos) {
                model = line.substr(colon + 1);
                while (!model.empty() && model.front() == ' ') model.erase(model.begin());
            }
            break;
        }
    }
    return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " threads";
}

} // namespace pipeline_detail

inline BenchReport bench_pipeline(DetectorNet& det, LangidNet& lid,
                                  const std::vector<AnnotatedImage>& images,
                                  size_t detector_bytes, size_t langid_bytes, int runs = 50) {
    if (images.empty()) throw Error("benchmark needs at least one sample image");
    if (runs < 1) throw Error("benchmark needs at least one run");
    using clock = std::chrono::steady_clock;
    auto ms = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double, std::milli>(b - a).count();
    };
    std::vector<double> t_loc, t_det, t_lid, t_tot;
    for (int r = 0; r < runs; ++r) {
        const Image& img = images[static_cast<size_t>(r) % images.size()].image;
        auto c0 = clock::now();
        std::vector<LineBox> lines = localize_lines(img);
        auto c1 = clock::now();
        std::vector<Detection> dets;
        for (const LineBox& lb : lines) {
            Image crop = scale_line_crop(img, lb);
            const double sx = static_cast<double>(lb.w) / crop.width();
            const double sy = static_cast<double>(lb.h) / crop.height();
            for (Detection d : detect_in_image(det, crop)) {
                d.box.cx = lb.x + d.box.cx * sx;
                d.box.cy = lb.y + d.box.cy * sy;
                d.box.w *= sx;
                d.box.h *= sy;
                dets.push_back(d);
            }
        }
        auto c2 = clock::now();
        predict(lid, presence_from_detections(dets));
        auto c3 = clock::now();
        t_loc.push_back(ms(c0, c1));
        t_det.push_back(ms(c1, c2));
        t_lid.push_back(ms(c2, c3));
        t_tot.push_back(ms(c0, c3));
    }
    BenchReport rep;
    rep.detector_bytes = detector_bytes;
    rep.langid_bytes = langid_bytes;
    rep.runs = static_cast<size_t>(runs);
    rep.hardware = pipeline_detail::hardware_descriptor();
    rep.localize = {pipeline_detail::percentile(t_loc, 0.5), pipeline_detail::percentile(t_loc, 0.95)};
    rep.detect = {pipeline_detail::percentile(t_det, 0.5), pipeline_detail::percentile(t_det, 0.95)};
    rep.langid = {pipeline_detail::percentile(t_lid, 0.5), pipeline_detail::percentile(t_lid, 0.95)};
    rep.total = {pipeline_detail::percentile(t_tot, 0.5), pipeline_detail::percentile(t_tot, 0.95)};
    return rep;
}

} // namespace diakrit
