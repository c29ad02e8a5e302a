// Command-line front end: synthetic corpus generation, detector and
// language-classifier training, single-image detection, end-to-end language
// identification, evaluation, and benchmarking.
//
// Exit codes: 0 success, 1 usage error, 2 data/model/runtime error.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "diakrit/corpus.hpp"
#include "diakrit/detector.hpp"
#include "diakrit/diacritic_table.hpp"
#include "diakrit/io.hpp"
#include "diakrit/langid.hpp"
#include "diakrit/pipeline.hpp"

namespace {

using namespace diakrit;
using nlohmann::ordered_json;

// ---- shared option plumbing ---------------------------------------------------------

constexpr const char* kDefaultCorpusDir = "data/corpus";

std::vector<std::string> lang_name_list() {
    std::vector<std::string> names;
    for (auto n : lang_names()) names.emplace_back(n);
    return names;
}

Lang parse_lang(const std::string& name) {
    auto l = lang_from_name(name);
    if (!l) throw DataError("unknown language: " + name); // unreachable behind IsMember
    return *l;
}

std::string lowercase_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

// `corpus` names either a text file or a directory holding <language>.txt.
std::string corpus_text_for(const std::string& corpus, Lang lang) {
    namespace fs = std::filesystem;
    fs::path p(corpus);
    if (fs::is_directory(p)) p /= lowercase_ascii(lang_name(lang)) + ".txt";
    if (!fs::exists(p))
        throw DataError("no corpus text for " + std::string(lang_name(lang)) + ": " +
                        p.string());
    std::vector<uint8_t> bytes = read_file(p.string());
    return std::string(bytes.begin(), bytes.end());
}

// Largest seed-stable word sample not exceeding `want`. select_words shuffles
// the full vocabulary before truncating, so smaller requests are prefixes of
// larger ones and the bisection is deterministic.
std::vector<std::string> select_up_to(const std::string& text, Lang lang, size_t want,
                                      uint64_t seed) {
    try {
        return select_words(text, lang, want, seed);
    } catch (const DataError&) {
        size_t lo = 0, hi = want; // feasible, infeasible
        while (hi - lo > 1) {
            size_t mid = lo + (hi - lo) / 2;
            try {
                select_words(text, lang, mid, seed);
                lo = mid;
            } catch (const DataError&) {
                hi = mid;
            }
        }
        return select_words(text, lang, lo, seed); // lo == 0 rethrows the diagnostic
    }
}

// ---- render-style randomization --------------------------------------------------------

// Random contrast pair plus per-image font, scale, and spacing. Ink stays at
// least ~60 gray levels away from the ground so binarization cannot fail, and
// one image in five is inverted (light ink on dark ground).
RenderStyle random_style(Rng& rng, int scale) {
    RenderStyle s;
    s.font_id = static_cast<int>(rng.range(0, Font::kNumVariants - 1));
    s.glyph_height = Font::variant(s.font_id).cell_height() * scale;
    s.spacing = static_cast<int>(rng.range(1, 2));
    auto dark = [&] { return static_cast<uint8_t>(rng.range(0, 90)); };
    auto light = [&] { return static_cast<uint8_t>(rng.range(160, 255)); };
    s.fg = {dark(), dark(), dark()};
    s.bg = {light(), light(), light()};
    if (rng.chance(0.2)) std::swap(s.fg, s.bg);
    s.seed = rng.next();
    return s;
}

// ---- JSON shaping ---------------------------------------------------------------------

ordered_json prediction_json(const LanguagePrediction& p) {
    ordered_json j;
    if (p.language)
        j["language"] = std::string(lang_name(*p.language));
    else
        j["language"] = nullptr;
    j["confidence"] = p.confidence;
    j["indeterminate"] = p.indeterminate();
    ordered_json probs;
    for (int i = 0; i < kNumLanguages; ++i)
        probs[std::string(lang_names()[static_cast<size_t>(i)])] =
            p.probs[static_cast<size_t>(i)];
    j["probs"] = probs;
    return j;
}

void print_prediction(const LanguagePrediction& p) {
    if (p.indeterminate()) {
        std::printf("indeterminate: no diacritic evidence\n");
        return;
    }
    std::printf("language: %s (confidence %.4f)\n",
                std::string(lang_name(*p.language)).c_str(), p.confidence);
}

ordered_json detections_json(const std::vector<Detection>& dets) {
    const DiacriticTable& table = DiacriticTable::instance();
    ordered_json arr = ordered_json::array();
    for (const Detection& d : dets) {
        ordered_json j;
        j["cx"] = d.box.cx;
        j["cy"] = d.box.cy;
        j["w"] = d.box.w;
        j["h"] = d.box.h;
        j["class"] = d.cls;
        j["char"] = utf8_encode(table.codepoint(d.cls));
        j["conf"] = d.conf;
        arr.push_back(std::move(j));
    }
    return arr;
}

ordered_json eval_json(const EvalReport& r, const std::string& mode) {
    ordered_json j;
    j["mode"] = mode;
    j["images"] = r.images;
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    ordered_json per;
    for (int i = 0; i < kNumLanguages; ++i) {
        const LangScore& s = r.per_lang[static_cast<size_t>(i)];
        ordered_json e;
        e["tp"] = s.tp;
        e["fp"] = s.fp;
        e["fn"] = s.fn;
        e["precision"] = s.precision;
        e["recall"] = s.recall;
        e["f1"] = s.f1;
        per[std::string(lang_names()[static_cast<size_t>(i)])] = std::move(e);
    }
    j["per_language"] = per;
    ordered_json labels = ordered_json::array();
    for (auto n : lang_names()) labels.push_back(std::string(n));
    labels.push_back("indeterminate");
    ordered_json rows;
    for (int t = 0; t < kNumLanguages; ++t) {
        ordered_json row = ordered_json::array();
        for (int p = 0; p <= kNumLanguages; ++p)
            row.push_back(r.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)]);
        rows[std::string(lang_names()[static_cast<size_t>(t)])] = std::move(row);
    }
    j["confusion"] = ordered_json{{"predicted", labels}, {"rows", rows}};
    return j;
}

void print_eval(const EvalReport& r, const std::string& mode) {
    std::printf("mode: %s, images: %zu\n", mode.c_str(), r.images);
    std::printf("%-12s %9s %9s %9s\n", "language", "precision", "recall", "f1");
    for (int i = 0; i < kNumLanguages; ++i) {
        const LangScore& s = r.per_lang[static_cast<size_t>(i)];
        std::printf("%-12s %9.4f %9.4f %9.4f\n",
                    std::string(lang_names()[static_cast<size_t>(i)]).c_str(), s.precision,
                    s.recall, s.f1);
    }
    std::printf("%-12s %9.4f %9.4f %9.4f\n", "macro", r.macro_precision, r.macro_recall,
                r.macro_f1);
}

size_t file_size_of(const std::string& path) {
    std::error_code ec;
    auto n = std::filesystem::file_size(path, ec);
    if (ec) throw DataError("cannot stat " + path + ": " + ec.message());
    return static_cast<size_t>(n);
}

// ---- subcommand bodies -----------------------------------------------------------------

struct GenOpts {
    std::string lang;
    int count = 0;
    std::string out;
    uint64_t seed = 0;
    std::string corpus = kDefaultCorpusDir;
    std::string format = "png";
    bool json = false;
};

void run_gen_words(const GenOpts& o) {
    Lang lang = parse_lang(o.lang);
    std::string text = corpus_text_for(o.corpus, lang);
    std::vector<std::string> vocab =
        select_up_to(text, lang, static_cast<size_t>(o.count), o.seed);
    Rng rng(o.seed);
    std::vector<AnnotatedImage> images;
    images.reserve(static_cast<size_t>(o.count));
    for (int i = 0; i < o.count; ++i) {
        RenderStyle style = random_style(rng, static_cast<int>(rng.range(1, 2)));
        images.push_back(render_word(vocab[static_cast<size_t>(i) % vocab.size()], style));
    }
    write_corpus(images, o.out, o.format);
    if (o.json) {
        ordered_json j{{"lang", std::string(lang_name(lang))},
                       {"images", images.size()},
                       {"vocabulary", vocab.size()},
                       {"out", o.out}};
        std::printf("%s\n", j.dump().c_str());
    } else {
        std::printf("wrote %zu %s word images (vocabulary %zu words) to %s\n", images.size(),
                    std::string(lang_name(lang)).c_str(), vocab.size(), o.out.c_str());
    }
}

void run_gen_test(const GenOpts& o) {
    Lang lang = parse_lang(o.lang);
    std::string text = corpus_text_for(o.corpus, lang);
    std::vector<std::string> vocab = select_up_to(text, lang, 100000, o.seed);
    Rng rng(o.seed);
    std::vector<AnnotatedImage> images;
    images.reserve(static_cast<size_t>(o.count));
    const int usable = kTestImageSize - 8; // canvas minus margins
    for (int i = 0; i < o.count; ++i) {
        std::optional<AnnotatedImage> img;
        for (int attempt = 0; attempt < 100 && !img; ++attempt) {
            const int scale = static_cast<int>(rng.range(1, 2));
            RenderStyle style = random_style(rng, scale);
            const Font& font = Font::variant(style.font_id);
            const int adv = font.advance() + style.spacing;
            const int max_chars = (usable / scale + style.spacing) / adv;
            const int line_h = font.cell_height() * scale;
            const int max_lines = std::max(1, (usable + 4) / (line_h + 4));
            const int nlines = static_cast<int>(rng.range(2, std::max<int64_t>(2, std::min(5, max_lines))));
            std::vector<std::string> lines;
            for (int li = 0; li < nlines; ++li) {
                const int target_words = static_cast<int>(rng.range(1, 3));
                std::string line;
                int chars = 0;
                for (int w = 0; w < target_words; ++w) {
                    const std::string& word =
                        vocab[static_cast<size_t>(rng.below(vocab.size()))];
                    const int wlen = static_cast<int>(utf8_decode(word).size());
                    const int extra = (line.empty() ? 0 : 1) + wlen;
                    if (chars + extra > max_chars) break;
                    if (!line.empty()) line += ' ';
                    line += word;
                    chars += extra;
                }
                if (line.empty()) { // single word too wide for the budget: take the shortest
                    const std::string* best = nullptr;
                    for (const std::string& w : vocab)
                        if (!best || w.size() < best->size()) best = &w;
                    line = *best;
                }
                lines.push_back(std::move(line));
            }
            try {
                img = render_test_image(lines, lang, style);
            } catch (const DataError&) {
                // overflow with a pathological draw: redraw deterministically
            }
        }
        if (!img)
            throw DataError("could not fit any text for " + std::string(lang_name(lang)) +
                            " into the test raster after 100 draws");
        images.push_back(std::move(*img));
    }
    write_corpus(images, o.out, o.format);
    if (o.json) {
        ordered_json j{{"lang", std::string(lang_name(lang))},
                       {"images", images.size()},
                       {"vocabulary", vocab.size()},
                       {"out", o.out}};
        std::printf("%s\n", j.dump().c_str());
    } else {
        std::printf("wrote %zu %s test images (%dx%d) to %s\n", images.size(),
                    std::string(lang_name(lang)).c_str(), kTestImageSize, kTestImageSize,
                    o.out.c_str());
    }
}

struct TrainDetOpts {
    std::string corpus;
    std::string out;
    int epochs = 40;
    uint64_t seed = 0;
    double lr = DetectorConfig{}.lr;
    int batch = DetectorConfig{}.batch_size;
    double nms = DetectorConfig{}.nms_threshold;
    bool no_fit_anchors = false;
    bool json = false;
};

void run_train_detector(const TrainDetOpts& o) {
    std::vector<AnnotatedImage> corpus = read_corpus(o.corpus);
    if (corpus.empty()) throw DataError("corpus directory holds no images: " + o.corpus);

    DetectorConfig cfg;
    cfg.lr = o.lr;
    cfg.batch_size = o.batch;
    cfg.nms_threshold = o.nms;
    size_t total_boxes = 0;
    for (const AnnotatedImage& a : corpus) total_boxes += a.boxes.size();
    if (!o.no_fit_anchors) {
        std::vector<std::pair<double, double>> wh;
        wh.reserve(total_boxes);
        for (const AnnotatedImage& a : corpus)
            for (const WordBox& b : a.boxes) wh.push_back({b.w, b.h});
        if (static_cast<int>(wh.size()) >= cfg.anchors_per_cell)
            cfg.anchor_shapes = fit_anchor_shapes(wh, cfg.anchors_per_cell);
        else
            std::fprintf(stderr, "too few boxes to fit anchors; keeping default priors\n");
    }
    cfg.validate();

    std::fprintf(stderr,
                 "training detector: %zu images, %zu boxes, lr %g, batch %d, "
                 "%d epochs, seed %llu\n",
                 corpus.size(), total_boxes, cfg.lr, cfg.batch_size, o.epochs,
                 static_cast<unsigned long long>(o.seed));
    DetectorNet net(cfg, o.seed);
    const auto t0 = std::chrono::steady_clock::now();
    TrainLog log = train_detector(net, corpus, o.epochs, o.seed, [&](const EpochLog& e) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr,
                     "epoch %3d/%d  cls %.4f  bbox %.4f  conf %.4f  total %.4f  (%.0fs)\n",
                     e.epoch + 1, o.epochs, e.cls, e.bbox, e.conf, e.total, secs);
        std::fflush(stderr);
    });
    if (log.diverged) std::fprintf(stderr, "warning: %s\n", log.divergence_note.c_str());

    size_t bytes = save_detector(net, o.out);
    if (o.json) {
        ordered_json epochs = ordered_json::array();
        for (const EpochLog& e : log.epochs)
            epochs.push_back({{"epoch", e.epoch},
                              {"cls", e.cls},
                              {"bbox", e.bbox},
                              {"conf", e.conf},
                              {"total", e.total}});
        ordered_json j{{"images", corpus.size()}, {"steps", log.steps},
                       {"diverged", log.diverged}, {"epochs", epochs},
                       {"model", o.out},           {"bytes", bytes}};
        if (log.diverged) j["divergence_note"] = log.divergence_note;
        std::printf("%s\n", j.dump().c_str());
    } else {
        std::printf("trained %d epochs (%lld steps) on %zu images; wrote %s (%zu bytes)\n",
                    o.epochs, static_cast<long long>(log.steps), corpus.size(), o.out.c_str(),
                    bytes);
        if (!log.epochs.empty())
            std::printf("final losses: cls %.4f bbox %.4f conf %.4f total %.4f\n",
                        log.epochs.back().cls, log.epochs.back().bbox, log.epochs.back().conf,
                        log.epochs.back().total);
    }
}

struct TrainLangidOpts {
    std::string corpus = kDefaultCorpusDir;
    std::string out;
    uint64_t seed = 0;
    int samples = 1000;
    int epochs = 20;
    bool json = false;
};

void run_train_langid(const TrainLangidOpts& o) {
    std::map<Lang, std::string> text_by_lang;
    for (Lang l : all_langs()) text_by_lang[l] = corpus_text_for(o.corpus, l);
    VectorDataset ds = gen_training_vectors(text_by_lang, o.samples, o.seed);
    LangidNet net(o.seed);
    LangidTrainLog log = train_langid(net, ds, o.epochs, o.seed);
    size_t bytes = save_langid(net, o.out);
    const double final_acc = log.val_accuracy.empty() ? 0.0 : log.val_accuracy.back();
    if (o.json) {
        ordered_json j{{"train_vectors", ds.train.size()},
                       {"val_vectors", ds.val.size()},
                       {"epochs", o.epochs},
                       {"train_loss", log.train_loss},
                       {"val_accuracy", log.val_accuracy},
                       {"model", o.out},
                       {"bytes", bytes}};
        std::printf("%s\n", j.dump().c_str());
    } else {
        std::printf("trained on %zu vectors (%zu validation); final validation accuracy "
                    "%.4f; wrote %s (%zu bytes)\n",
                    ds.train.size(), ds.val.size(), final_acc, o.out.c_str(), bytes);
    }
}

struct DetectOpts {
    std::string model;
    std::string image;
    std::string out;
    double min_conf = 0.5;
    bool json = false;
};

void run_detect(const DetectOpts& o) {
    DetectorNet net = load_detector(o.model);
    Image img = image_read(o.image);
    std::vector<Detection> dets;
    for (const Detection& d : detect_in_image(net, img))
        if (d.conf >= o.min_conf) dets.push_back(d);
    ordered_json arr = detections_json(dets);
    if (!o.out.empty()) {
        std::ofstream f(o.out);
        if (!f) throw Error("cannot open for writing: " + o.out);
        f << arr.dump(2) << "\n";
        if (!f) throw Error("write failed: " + o.out);
    }
    if (o.json) {
        std::printf("%s\n", arr.dump().c_str());
    } else if (o.out.empty()) {
        const DiacriticTable& table = DiacriticTable::instance();
        for (const Detection& d : dets)
            std::printf("%s (class %d) conf %.3f at (%.1f, %.1f) %.1fx%.1f\n",
                        utf8_encode(table.codepoint(d.cls)).c_str(), d.cls, d.conf, d.box.cx,
                        d.box.cy, d.box.w, d.box.h);
        std::printf("%zu detections above confidence %.2f\n", dets.size(), o.min_conf);
    } else {
        std::printf("wrote %zu detections to %s\n", dets.size(), o.out.c_str());
    }
}

struct IdentifyOpts {
    std::string image;
    std::string detector;
    std::string langid;
    double min_conf = 0.5;
    bool json = false;
};

void run_identify(const IdentifyOpts& o) {
    DetectorNet det = load_detector(o.detector);
    LangidNet lid = load_langid(o.langid);
    Image img = image_read(o.image);
    PipelineResult res = identify_language(img, det, lid, o.min_conf);
    if (o.json) {
        ordered_json j = prediction_json(res.prediction);
        j["lines"] = res.lines.size();
        j["detections"] = res.detections.size();
        std::printf("%s\n", j.dump().c_str());
    } else {
        print_prediction(res.prediction);
        std::printf("%zu lines, %zu detections\n", res.lines.size(), res.detections.size());
    }
}

struct IdentifyTextOpts {
    std::string model;
    std::string text;
    bool json = false;
};

void run_identify_text(const IdentifyTextOpts& o) {
    LangidNet net = load_langid(o.model);
    LanguagePrediction p = predict(net, presence_from_text(o.text));
    if (o.json)
        std::printf("%s\n", prediction_json(p).dump().c_str());
    else
        print_prediction(p);
}

struct EvalOpts {
    std::string testset;
    std::string detector;
    std::string langid;
    bool gt_presence = false;
    double min_conf = 0.5;
    bool json = false;
};

void run_eval(const EvalOpts& o) {
    std::vector<AnnotatedImage> testset = read_corpus(o.testset);
    if (testset.empty()) throw DataError("test set directory holds no images: " + o.testset);
    LangidNet lid = load_langid(o.langid);
    EvalReport r;
    std::string mode;
    if (o.gt_presence) {
        mode = "gt-presence";
        r = eval_langid_gt(testset, lid);
    } else {
        mode = "detector";
        DetectorNet det = load_detector(o.detector);
        r = eval_langid(testset, det, lid, o.min_conf);
    }
    if (o.json)
        std::printf("%s\n", eval_json(r, mode).dump().c_str());
    else
        print_eval(r, mode);
}

struct BenchOpts {
    std::string detector;
    std::string langid;
    std::string images;
    int runs = 50;
    bool json = false;
};

void run_bench(const BenchOpts& o) {
    std::vector<AnnotatedImage> imgs = read_corpus(o.images);
    if (imgs.empty()) throw DataError("image directory holds no images: " + o.images);
    DetectorNet det = load_detector(o.detector);
    LangidNet lid = load_langid(o.langid);
    const size_t det_bytes = file_size_of(o.detector);
    const size_t lid_bytes = file_size_of(o.langid);
    BenchReport r = bench_pipeline(det, lid, imgs, det_bytes, lid_bytes, o.runs);
    auto stage = [](const StageStats& s) {
        return ordered_json{{"median", s.median_ms}, {"p95", s.p95_ms}};
    };
    ordered_json j{{"hardware", r.hardware},
                   {"sizes_bytes",
                    ordered_json{{"detector", r.detector_bytes},
                                 {"langid", r.langid_bytes},
                                 {"total", r.detector_bytes + r.langid_bytes}}},
                   {"latency_ms", ordered_json{{"localize", stage(r.localize)},
                                               {"detect", stage(r.detect)},
                                               {"langid", stage(r.langid)},
                                               {"total", stage(r.total)}}},
                   {"runs", r.runs}};
    if (o.json) {
        std::printf("%s\n", j.dump().c_str());
    } else {
        std::printf("hardware: %s\n", r.hardware.c_str());
        std::printf("sizes: detector %zu bytes, langid %zu bytes, total %zu bytes\n",
                    r.detector_bytes, r.langid_bytes, r.detector_bytes + r.langid_bytes);
        std::printf("%-10s %10s %10s\n", "stage", "median ms", "p95 ms");
        std::printf("%-10s %10.2f %10.2f\n", "localize", r.localize.median_ms,
                    r.localize.p95_ms);
        std::printf("%-10s %10.2f %10.2f\n", "detect", r.detect.median_ms, r.detect.p95_ms);
        std::printf("%-10s %10.2f %10.2f\n", "langid", r.langid.median_ms, r.langid.p95_ms);
        std::printf("%-10s %10.2f %10.2f  (%zu runs)\n", "total", r.total.median_ms,
                    r.total.p95_ms, r.runs);
    }
}

void run_export_table(bool json) {
    const DiacriticTable& table = DiacriticTable::instance();
    if (!json) {
        std::printf("%s", table.to_csv().c_str());
        return;
    }
    ordered_json arr = ordered_json::array();
    for (int i = 0; i < kNumDiacritics; ++i) {
        char32_t cp = table.codepoint(i);
        ordered_json langs = ordered_json::array();
        for (Lang l : table.languages_of(cp)) langs.push_back(std::string(lang_name(l)));
        arr.push_back(
            {{"index", i}, {"char", utf8_encode(cp)}, {"languages", std::move(langs)}});
    }
    std::printf("%s\n", arr.dump().c_str());
}

// ---- wiring -----------------------------------------------------------------------------

void add_gen_options(CLI::App* sub, GenOpts& o) {
    sub->add_option("--lang", o.lang, "target language")
        ->required()
        ->check(CLI::IsMember(lang_name_list()));
    sub->add_option("--count", o.count, "number of images to generate")
        ->required()
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "RNG seed (default 0)");
    sub->add_option("--corpus", o.corpus,
                    "corpus text file, or directory holding <language>.txt (default " +
                        std::string(kDefaultCorpusDir) + ")");
    sub->add_option("--format", o.format, "image format (default png)")
        ->check(CLI::IsMember({"png", "ppm"}));
    sub->add_flag("--json", o.json, "print a JSON summary to stdout");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"language identification for rendered text images via diacritic detection"};
    app.require_subcommand(1);

    auto gw = std::make_shared<GenOpts>();
    add_gen_options(app.add_subcommand("gen-words",
                                       "generate annotated word images (height 16)"),
                    *gw);

    auto gt = std::make_shared<GenOpts>();
    add_gen_options(app.add_subcommand(
                        "gen-test", "generate labeled multi-line 150x150 test images"),
                    *gt);

    auto td = std::make_shared<TrainDetOpts>();
    {
        CLI::App* sub = app.add_subcommand("train-detector",
                                           "train the diacritic detector on a word corpus");
        sub->add_option("--corpus", td->corpus, "annotated image corpus directory")
            ->required();
        sub->add_option("--out", td->out, "output model file")->required();
        sub->add_option("--epochs", td->epochs, "training epochs (default 40)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", td->seed, "RNG seed (default 0)");
        sub->add_option("--lr", td->lr, "learning rate")->check(CLI::PositiveNumber);
        sub->add_option("--batch", td->batch, "batch size")->check(CLI::PositiveNumber);
        sub->add_option("--nms", td->nms, "NMS IoU threshold")->check(CLI::Range(1e-9, 0.999999));
        sub->add_flag("--no-fit-anchors", td->no_fit_anchors,
                      "keep default anchor priors instead of fitting them to the corpus");
        sub->add_flag("--json", td->json, "print a JSON training log to stdout");
    }

    auto tl = std::make_shared<TrainLangidOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "train-langid", "train the language classifier on diacritic presence vectors");
        sub->add_option("--corpus", tl->corpus,
                        "directory holding <language>.txt corpus texts (default " +
                            std::string(kDefaultCorpusDir) + ")");
        sub->add_option("--out", tl->out, "output model file")->required();
        sub->add_option("--seed", tl->seed, "RNG seed (default 0)");
        sub->add_option("--samples", tl->samples, "presence vectors per language (default 1000)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--epochs", tl->epochs, "training epochs (default 20)")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--json", tl->json, "print a JSON training log to stdout");
    }

    auto de = std::make_shared<DetectOpts>();
    {
        CLI::App* sub =
            app.add_subcommand("detect", "run the diacritic detector on one image");
        sub->add_option("--model", de->model, "detector model file")->required();
        sub->add_option("--image", de->image, "input image (png or ppm)")->required();
        sub->add_option("--out", de->out, "write detections to this JSON file");
        sub->add_option("--min-conf", de->min_conf, "confidence floor (default 0.5)")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_flag("--json", de->json, "print detections as JSON to stdout");
    }

    auto id = std::make_shared<IdentifyOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "identify", "identify the language of the text in an image");
        sub->add_option("--image", id->image, "input image (png or ppm)")->required();
        sub->add_option("--detector", id->detector, "detector model file")->required();
        sub->add_option("--langid", id->langid, "language classifier model file")->required();
        sub->add_option("--min-conf", id->min_conf,
                        "detection confidence floor (default 0.5)")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_flag("--json", id->json, "print the prediction as one-line JSON");
    }

    auto it = std::make_shared<IdentifyTextOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "identify-text", "identify the language of a UTF-8 string by its diacritics");
        sub->add_option("--model", it->model, "language classifier model file")->required();
        sub->add_option("--text", it->text, "UTF-8 text to classify")->required();
        sub->add_flag("--json", it->json, "print the prediction as one-line JSON");
    }

    auto ev = std::make_shared<EvalOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "eval", "score language predictions over a labeled test set");
        sub->add_option("--testset", ev->testset, "labeled test corpus directory")
            ->required();
        sub->add_option("--langid", ev->langid, "language classifier model file")->required();
        sub->add_option("--detector", ev->detector,
                        "detector model file (required unless --gt-presence)");
        sub->add_flag("--gt-presence", ev->gt_presence,
                      "score from ground-truth presence vectors instead of detections");
        sub->add_option("--min-conf", ev->min_conf,
                        "detection confidence floor (default 0.5)")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_flag("--json", ev->json, "print the report as JSON");
    }

    auto be = std::make_shared<BenchOpts>();
    {
        CLI::App* sub = app.add_subcommand(
            "bench", "measure model sizes and per-stage pipeline latency");
        sub->add_option("--detector", be->detector, "detector model file")->required();
        sub->add_option("--langid", be->langid, "language classifier model file")->required();
        sub->add_option("--images", be->images, "sample image corpus directory")->required();
        sub->add_option("--runs", be->runs, "timed pipeline runs (default 50)")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--json", be->json, "print the report as JSON");
    }

    bool table_json = false;
    {
        CLI::App* sub = app.add_subcommand(
            "export-table", "print the 85-class diacritic table (CSV by default)");
        sub->add_flag("--json", table_json, "print the table as JSON");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // help exits 0; any usage problem exits 1
    }

    try {
        if (app.got_subcommand("gen-words")) run_gen_words(*gw);
        else if (app.got_subcommand("gen-test")) run_gen_test(*gt);
        else if (app.got_subcommand("train-detector")) run_train_detector(*td);
        else if (app.got_subcommand("train-langid")) run_train_langid(*tl);
        else if (app.got_subcommand("detect")) run_detect(*de);
        else if (app.got_subcommand("identify")) run_identify(*id);
        else if (app.got_subcommand("identify-text")) run_identify_text(*it);
        else if (app.got_subcommand("eval")) {
            if (!ev->gt_presence && ev->detector.empty()) {
                std::fprintf(stderr, "eval: --detector is required unless --gt-presence is set\n");
                return 1;
            }
            run_eval(*ev);
        } else if (app.got_subcommand("bench")) run_bench(*be);
        else if (app.got_subcommand("export-table")) run_export_table(table_json);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
