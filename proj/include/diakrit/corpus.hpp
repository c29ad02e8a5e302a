#pragma once

// Synthetic dataset generation: word images (height 16, variable width) with
// per-diacritic boxes, and 150x150 multi-line test images with a language
// label. Rendering is integer-scale pixel replication followed by trim-to-ink
// and nearest-neighbor resample, tracked through a per-pixel glyph id map so
// boxes stay tight in final coordinates.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "diakrit/diacritic_table.hpp"
#include "diakrit/font.hpp"
#include "diakrit/image.hpp"
#include "diakrit/rng.hpp"

namespace diakrit {

struct RenderStyle {
    int font_id = 0;
    int glyph_height = 12; // nominal; realized as an integer scale of the cell height
    Rgb fg{0, 0, 0};
    Rgb bg{255, 255, 255};
    int spacing = 1; // blank columns between glyph cells
    uint64_t seed = 0;
};

struct WordBox {
    double cx = 0, cy = 0, w = 0, h = 0;
    int cls = -1;
    bool operator==(const WordBox&) const = default;
};

struct GlyphPlacement {
    char32_t cp = 0;
    int index = 0; // position in the rendered text
    InkBox box;    // final raster coordinates, inclusive
    int cls = -1;  // canonical class, or -1 for non-diacritics
};

struct AnnotatedImage {
    Image image;
    std::optional<Lang> lang;
    std::vector<WordBox> boxes;
    // generator-side ground truth, not serialized:
    std::vector<GlyphPlacement> glyphs;
    std::vector<InkBox> line_boxes;
    std::string text;
};

namespace render_detail {

// per-pixel owner map; -1 = background
struct Sheet {
    int w = 0, h = 0;
    std::vector<int32_t> id;

    Sheet() = default;
    Sheet(int w_, int h_) : w(w_), h(h_), id(static_cast<size_t>(w_) * h_, -1) {}
    int32_t at(int x, int y) const { return id[static_cast<size_t>(y) * w + x]; }
    void set(int x, int y, int32_t v) { id[static_cast<size_t>(y) * w + x] = v; }
};

inline Sheet layout_word(const std::u32string& word, const Font& font, int spacing) {
    const int n = static_cast<int>(word.size());
    const int adv = font.advance() + spacing;
    Sheet s(font.advance() * n + spacing * (n - 1), font.cell_height());
    for (int i = 0; i < n; ++i) {
        const GlyphBitmap& g = font.glyph(word[static_cast<size_t>(i)]);
        for (int y = 0; y < g.h; ++y)
            for (int x = 0; x < g.w; ++x)
                if (g.at(x, y)) s.set(i * adv + x, y, i);
    }
    return s;
}

inline Sheet scale_sheet(const Sheet& s, int k) {
    if (k == 1) return s;
    Sheet out(s.w * k, s.h * k);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) out.set(x, y, s.at(x / k, y / k));
    return out;
}

inline std::optional<Sheet> trim_sheet(const Sheet& s) {
    int x0 = s.w, y0 = s.h, x1 = -1, y1 = -1;
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x)
            if (s.at(x, y) >= 0) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return std::nullopt;
    Sheet out(x1 - x0 + 1, y1 - y0 + 1);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) out.set(x, y, s.at(x0 + x, y0 + y));
    return out;
}

inline Sheet resample_sheet(const Sheet& s, int w, int h) {
    Sheet out(w, h);
    for (int y = 0; y < h; ++y) {
        int sy = std::min(s.h - 1, static_cast<int>((y + 0.5) * s.h / h));
        for (int x = 0; x < w; ++x) {
            int sx = std::min(s.w - 1, static_cast<int>((x + 0.5) * s.w / w));
            out.set(x, y, s.at(sx, sy));
        }
    }
    return out;
}

inline int scale_for(const RenderStyle& style, const Font& font) {
    int k = (style.glyph_height + font.cell_height() / 2) / font.cell_height();
    return std::max(1, k);
}

inline uint8_t jittered(int base, Rng& rng) {
    int v = base + static_cast<int>(rng.range(-6, 6));
    return static_cast<uint8_t>(std::clamp(v, 0, 255));
}

inline Image colorize(const Sheet& s, const RenderStyle& style) {
    Rng rng(style.seed);
    Image img(s.w, s.h);
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            Rgb base = s.at(x, y) >= 0 ? style.fg : style.bg;
            img.set(x, y, {jittered(base.r, rng), jittered(base.g, rng), jittered(base.b, rng)});
        }
    return img;
}

// extents of every owner id present in the sheet, then boxes for diacritics
// and a placement log entry for every inked glyph
inline void harvest(const Sheet& s, const std::u32string& text, int id_offset,
                    std::vector<WordBox>& boxes, std::vector<GlyphPlacement>& glyphs) {
    std::map<int32_t, InkBox> extent;
    for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            int32_t id = s.at(x, y);
            if (id < 0) continue;
            auto [it, fresh] = extent.emplace(id, InkBox{x, y, x, y});
            if (!fresh) {
                it->second.x0 = std::min(it->second.x0, x);
                it->second.y0 = std::min(it->second.y0, y);
                it->second.x1 = std::max(it->second.x1, x);
                it->second.y1 = std::max(it->second.y1, y);
            }
        }
    for (const auto& [id, box] : extent) {
        char32_t cp = text[static_cast<size_t>(id - id_offset)];
        auto cls = DiacriticTable::instance().canonical_index(cp);
        glyphs.push_back({cp, id, box, cls.value_or(-1)});
        if (cls)
            boxes.push_back({(box.x0 + box.x1 + 1) / 2.0, (box.y0 + box.y1 + 1) / 2.0,
                             static_cast<double>(box.width()), static_cast<double>(box.height()),
                             *cls});
    }
}

inline std::u32string decode_checked(const std::string& word, const Font& font) {
    std::u32string w = utf8_decode(word);
    for (char32_t cp : w)
        if (!font.covers(cp))
            throw DataError("cannot render codepoint '" + utf8_encode(cp) + "' (U+" +
                            [cp] {
                                char buf[16];
                                std::snprintf(buf, sizeof buf, "%04X", static_cast<uint32_t>(cp));
                                return std::string(buf);
                            }() +
                            ") with font variant " + std::to_string(font.id()));
    return w;
}

} // namespace render_detail

constexpr int kWordImageHeight = 16;
constexpr int kTestImageSize = 150;

inline AnnotatedImage render_word(const std::string& word, const RenderStyle& style) {
    using namespace render_detail;
    const Font& font = Font::variant(style.font_id);
    std::u32string text = decode_checked(word, font);
    if (text.empty()) throw DataError("cannot render empty word");

    Sheet sheet = layout_word(text, font, std::max(0, style.spacing));
    sheet = scale_sheet(sheet, scale_for(style, font));
    auto trimmed = trim_sheet(sheet);
    if (!trimmed) throw DataError("word '" + word + "' renders no ink");

    int w16 = std::max(1, static_cast<int>(
                              trimmed->w * static_cast<double>(kWordImageHeight) / trimmed->h +
                              0.5));
    Sheet final = resample_sheet(*trimmed, w16, kWordImageHeight);

    AnnotatedImage out;
    out.image = colorize(final, style);
    out.text = word;
    harvest(final, text, 0, out.boxes, out.glyphs);
    int x1 = -1, y1 = -1, x0 = final.w, y0 = final.h;
    for (const auto& g : out.glyphs) {
        x0 = std::min(x0, g.box.x0);
        y0 = std::min(y0, g.box.y0);
        x1 = std::max(x1, g.box.x1);
        y1 = std::max(y1, g.box.y1);
    }
    out.line_boxes.push_back({x0, y0, x1, y1});
    return out;
}

inline AnnotatedImage render_test_image(const std::vector<std::string>& lines, Lang lang,
                                        const RenderStyle& style) {
    using namespace render_detail;
    if (lines.empty()) throw DataError("test image needs at least one line");
    const Font& font = Font::variant(style.font_id);
    const int margin = 4, leading_gap = 4;

    std::vector<Sheet> sheets;
    std::vector<std::u32string> texts;
    for (const std::string& line : lines) {
        std::u32string text = decode_checked(line, font);
        if (text.empty()) throw DataError("test image line is empty");
        Sheet s = layout_word(text, font, std::max(0, style.spacing));
        s = scale_sheet(s, scale_for(style, font));
        auto trimmed = trim_sheet(s);
        if (!trimmed) throw DataError("test image line '" + line + "' renders no ink");
        sheets.push_back(std::move(*trimmed));
        texts.push_back(std::move(text));
    }

    int total_h = 0, max_w = 0;
    for (const Sheet& s : sheets) {
        total_h += s.h;
        max_w = std::max(max_w, s.w);
    }
    total_h += leading_gap * static_cast<int>(sheets.size() - 1);
    if (total_h > kTestImageSize - 2 * margin || max_w > kTestImageSize - 2 * margin)
        throw DataError("text overflow: lines do not fit the test raster");

    Sheet canvas(kTestImageSize, kTestImageSize);
    AnnotatedImage out;
    out.lang = lang;
    std::u32string all_text;
    int y_cursor = margin;
    for (size_t i = 0; i < sheets.size(); ++i) {
        const Sheet& s = sheets[i];
        int id_offset = static_cast<int>(all_text.size());
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x)
                if (s.at(x, y) >= 0) canvas.set(margin + x, y_cursor + y, s.at(x, y) + id_offset);
        out.line_boxes.push_back({margin, y_cursor, margin + s.w - 1, y_cursor + s.h - 1});
        if (!out.text.empty()) out.text += '\n';
        out.text += lines[i];
        all_text += texts[i];
        y_cursor += s.h + leading_gap;
    }
    harvest(canvas, all_text, 0, out.boxes, out.glyphs);
    out.image = colorize(canvas, style);
    if (out.boxes.empty())
        throw DataError("test image contains no diacritic; regenerate with qualifying words");
    return out;
}

// ---- word selection ----------------------------------------------------------

inline std::vector<std::string> select_words(const std::string& corpus_text, Lang lang, size_t n,
                                             uint64_t seed) {
    if (corpus_text.empty()) throw DataError("empty corpus text");
    const DiacriticTable& table = DiacriticTable::instance();

    std::set<std::u32string> vocab;
    std::u32string all = utf8_decode(corpus_text);
    size_t i = 0;
    while (i < all.size()) {
        while (i < all.size() && (all[i] == U' ' || all[i] == U'\n' || all[i] == U'\r' ||
                                  all[i] == U'\t'))
            ++i;
        size_t start = i;
        while (i < all.size() && all[i] != U' ' && all[i] != U'\n' && all[i] != U'\r' &&
               all[i] != U'\t')
            ++i;
        if (i == start) continue;
        std::u32string tok = all.substr(start, i - start);
        // strip surrounding punctuation, keep letters/diacritics only
        size_t a = 0, b = tok.size();
        auto is_letter = [&](char32_t c) {
            return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z') ||
                   table.contains(c);
        };
        while (a < b && !is_letter(tok[a])) ++a;
        while (b > a && !is_letter(tok[b - 1])) --b;
        if (a >= b) continue;
        tok = tok.substr(a, b - a);

        bool all_letters = true, has_own = false, has_foreign = false;
        for (char32_t c : tok) {
            if (!is_letter(c)) {
                all_letters = false;
                break;
            }
            if (table.contains(c)) {
                if (table.in_row(lang, c))
                    has_own = true;
                else
                    has_foreign = true;
            }
        }
        if (all_letters && has_own && !has_foreign) vocab.insert(tok);
    }

    if (vocab.size() < n)
        throw DataError("language " + std::string(lang_name(lang)) + ": only " +
                        std::to_string(vocab.size()) + " qualifying words, need " +
                        std::to_string(n));

    std::vector<std::u32string> sorted(vocab.begin(), vocab.end());
    Rng rng(seed);
    rng.shuffle(sorted);
    std::vector<std::string> out;
    out.reserve(n);
    for (size_t k = 0; k < n; ++k) out.push_back(utf8_encode(sorted[k]));
    return out;
}

// ---- corpus serialization ------------------------------------------------------

inline void write_corpus(const std::vector<AnnotatedImage>& images, const std::string& dir,
                         const std::string& format = "png") {
    if (format != "png" && format != "ppm") throw DataError("unknown image format: " + format);
    std::filesystem::create_directories(dir);
    std::ofstream ann(std::filesystem::path(dir) / "annotations.jsonl");
    if (!ann) throw Error("cannot write annotations in " + dir);
    char name[32];
    for (size_t i = 0; i < images.size(); ++i) {
        std::snprintf(name, sizeof name, "img_%06zu.%s", i, format.c_str());
        image_write((std::filesystem::path(dir) / name).string(), images[i].image);
        nlohmann::ordered_json j;
        j["image"] = name;
        if (images[i].lang)
            j["lang"] = std::string(lang_name(*images[i].lang));
        else
            j["lang"] = nullptr;
        auto boxes = nlohmann::json::array();
        for (const WordBox& b : images[i].boxes)
            boxes.push_back({b.cx, b.cy, b.w, b.h, b.cls});
        j["boxes"] = boxes;
        ann << j.dump() << "\n";
    }
    if (!ann) throw Error("write failed for annotations in " + dir);
}

inline std::vector<AnnotatedImage> read_corpus(const std::string& dir) {
    std::filesystem::path root(dir);
    if (!std::filesystem::is_directory(root)) throw DataError("no such corpus directory: " + dir);
    std::filesystem::path ann_path = root / "annotations.jsonl";
    if (!std::filesystem::exists(ann_path)) return {}; // empty corpus

    std::ifstream ann(ann_path);
    if (!ann) throw Error("cannot open " + ann_path.string());
    std::vector<AnnotatedImage> out;
    std::string line;
    int lineno = 0;
    while (std::getline(ann, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw DataError(ann_path.string() + ":" + std::to_string(lineno) + ": " + msg);
        };
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) fail("malformed JSON");
        if (!j.contains("image") || !j["image"].is_string()) fail("missing image field");
        AnnotatedImage img;
        try {
            img.image = image_read((root / j["image"].get<std::string>()).string());
        } catch (const Error& e) {
            fail(e.what());
        }
        if (j.contains("lang") && !j["lang"].is_null()) {
            if (!j["lang"].is_string()) fail("lang must be a string or null");
            auto lang = lang_from_name(j["lang"].get<std::string>());
            if (!lang) fail("unknown language: " + j["lang"].get<std::string>());
            img.lang = *lang;
        }
        if (!j.contains("boxes") || !j["boxes"].is_array()) fail("missing boxes array");
        for (const auto& jb : j["boxes"]) {
            if (!jb.is_array() || jb.size() != 5) fail("box must be [cx,cy,w,h,class]");
            for (int k = 0; k < 4; ++k)
                if (!jb[k].is_number()) fail("box coordinate must be a number");
            if (!jb[4].is_number_integer()) fail("box class must be an integer");
            WordBox b{jb[0].get<double>(), jb[1].get<double>(), jb[2].get<double>(),
                      jb[3].get<double>(), jb[4].get<int>()};
            if (b.cls < 0 || b.cls >= kNumDiacritics) fail("box class out of range");
            if (b.w <= 0 || b.h <= 0) fail("box has non-positive size");
            if (b.cx - b.w / 2 < 0 || b.cx + b.w / 2 > img.image.width() ||
                b.cy - b.h / 2 < 0 || b.cy + b.h / 2 > img.image.height())
                fail("box exceeds raster bounds");
            img.boxes.push_back(b);
        }
        out.push_back(std::move(img));
    }
    return out;
}

} // namespace diakrit
