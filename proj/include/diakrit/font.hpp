#pragma once

// Embedded fixed-cell bitmap fonts. Two variants are compiled in:
//   variant 0: 5x7 base glyphs, cell 5x12  (3 mark rows, 7 base rows, 2 descender rows)
//   variant 1: 4x6 base glyphs, cell 4x11  (3 mark rows, 6 base rows, 2 descender rows)
// Accented characters are composed at load time from a base glyph plus a mark
// bitmap; marks sit flush against the base ink (no blank row in between) so a
// rendered line stays vertically connected for projection-profile splitting.
// Construction validates coverage (letters, digits, all 85 diacritic classes)
// and that every covered glyph bitmap is pairwise distinct.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diakrit/diacritic_table.hpp"
#include "diakrit/error.hpp"
#include "diakrit/utf8.hpp"

namespace diakrit {

struct GlyphBitmap {
    int w = 0, h = 0;
    std::vector<uint8_t> bits; // row-major, 0 or 1

    bool at(int x, int y) const { return bits[static_cast<size_t>(y) * w + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<size_t>(y) * w + x] = v ? 1 : 0; }
    bool operator==(const GlyphBitmap&) const = default;
};

struct InkBox {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1; // inclusive
    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
};

inline std::optional<InkBox> ink_box(const GlyphBitmap& g) {
    InkBox b{g.w, g.h, -1, -1};
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x)
            if (g.at(x, y)) {
                b.x0 = std::min(b.x0, x);
                b.y0 = std::min(b.y0, y);
                b.x1 = std::max(b.x1, x);
                b.y1 = std::max(b.y1, y);
            }
    if (b.x1 < 0) return std::nullopt;
    return b;
}

enum class Mark {
    Acute,
    Grave,
    Circumflex,
    Diaeresis,
    Tilde,
    Ring,
    Breve,
    Caron,
    DoubleAcute,
    Cedilla, // the only below-baseline mark
};

inline bool mark_below(Mark m) { return m == Mark::Cedilla; }

// base + mark recipe for a composed diacritic; standalone glyphs (ß Æ æ Œ œ Ø ø)
// have no recipe and carry their own bitmaps.
struct Decomposition {
    char32_t base;
    Mark mark;
};

namespace fontdata {

struct CharDef {
    const char* cp;   // utf-8, single codepoint
    const char* rows; // '|'-separated, '#' = ink
};

// ---- marks (shared by both variants) ----------------------------------------

inline const std::vector<std::pair<Mark, const char*>>& mark_defs() {
    static const std::vector<std::pair<Mark, const char*>> defs = {
        {Mark::Acute, ".#|#."},
        {Mark::Grave, "#.|.#"},
        {Mark::Circumflex, ".#.|#.#"},
        {Mark::Diaeresis, "#.#"},
        {Mark::Tilde, ".##|##."},
        {Mark::Ring, ".#.|#.#|.#."},
        {Mark::Breve, "#..#|.##."},
        {Mark::Caron, "#.#|.#."},
        {Mark::DoubleAcute, ".#.#|#.#."},
        {Mark::Cedilla, ".#|##"},
    };
    return defs;
}

// ---- decomposition of the 78 composed diacritic classes ---------------------

inline const std::vector<std::pair<const char*, std::pair<const char*, Mark>>>& decomp_defs() {
    using P = std::pair<const char*, std::pair<const char*, Mark>>;
    static const std::vector<P> defs = {
        {"Á", {"A", Mark::Acute}},      {"á", {"a", Mark::Acute}},
        {"É", {"E", Mark::Acute}},      {"é", {"e", Mark::Acute}},
        {"Í", {"I", Mark::Acute}},      {"í", {"ı", Mark::Acute}},
        {"Ó", {"O", Mark::Acute}},      {"ó", {"o", Mark::Acute}},
        {"Ú", {"U", Mark::Acute}},      {"ú", {"u", Mark::Acute}},
        {"Ý", {"Y", Mark::Acute}},      {"ý", {"y", Mark::Acute}},
        {"À", {"A", Mark::Grave}},      {"à", {"a", Mark::Grave}},
        {"È", {"E", Mark::Grave}},      {"è", {"e", Mark::Grave}},
        {"Ì", {"I", Mark::Grave}},      {"ì", {"ı", Mark::Grave}},
        {"Ò", {"O", Mark::Grave}},      {"ò", {"o", Mark::Grave}},
        {"Ù", {"U", Mark::Grave}},      {"ù", {"u", Mark::Grave}},
        {"Â", {"A", Mark::Circumflex}}, {"â", {"a", Mark::Circumflex}},
        {"Ê", {"E", Mark::Circumflex}}, {"ê", {"e", Mark::Circumflex}},
        {"Î", {"I", Mark::Circumflex}}, {"î", {"ı", Mark::Circumflex}},
        {"Ô", {"O", Mark::Circumflex}}, {"ô", {"o", Mark::Circumflex}},
        {"Û", {"U", Mark::Circumflex}}, {"û", {"u", Mark::Circumflex}},
        {"Ä", {"A", Mark::Diaeresis}},  {"ä", {"a", Mark::Diaeresis}},
        {"Ë", {"E", Mark::Diaeresis}},  {"ë", {"e", Mark::Diaeresis}},
        {"Ï", {"I", Mark::Diaeresis}},  {"ï", {"ı", Mark::Diaeresis}},
        {"Ö", {"O", Mark::Diaeresis}},  {"ö", {"o", Mark::Diaeresis}},
        {"Ü", {"U", Mark::Diaeresis}},  {"ü", {"u", Mark::Diaeresis}},
        {"Ñ", {"N", Mark::Tilde}},      {"ñ", {"n", Mark::Tilde}},
        {"Ã", {"A", Mark::Tilde}},      {"ã", {"a", Mark::Tilde}},
        {"Õ", {"O", Mark::Tilde}},      {"õ", {"o", Mark::Tilde}},
        {"Å", {"A", Mark::Ring}},       {"å", {"a", Mark::Ring}},
        {"ů", {"u", Mark::Ring}},
        {"Ă", {"A", Mark::Breve}},      {"ă", {"a", Mark::Breve}},
        {"Č", {"C", Mark::Caron}},      {"č", {"c", Mark::Caron}},
        {"Ď", {"D", Mark::Caron}},      {"ď", {"d", Mark::Caron}},
        {"Ě", {"E", Mark::Caron}},      {"ě", {"e", Mark::Caron}},
        {"Ň", {"N", Mark::Caron}},      {"ň", {"n", Mark::Caron}},
        {"Ř", {"R", Mark::Caron}},      {"ř", {"r", Mark::Caron}},
        {"Š", {"S", Mark::Caron}},      {"š", {"s", Mark::Caron}},
        {"Ť", {"T", Mark::Caron}},      {"ť", {"t", Mark::Caron}},
        {"Ž", {"Z", Mark::Caron}},      {"ž", {"z", Mark::Caron}},
        {"Ő", {"O", Mark::DoubleAcute}}, {"ő", {"o", Mark::DoubleAcute}},
        {"Ű", {"U", Mark::DoubleAcute}}, {"ű", {"u", Mark::DoubleAcute}},
        {"ç", {"c", Mark::Cedilla}},
        {"Ş", {"S", Mark::Cedilla}},    {"ş", {"s", Mark::Cedilla}},
        {"Ţ", {"T", Mark::Cedilla}},    {"ţ", {"t", Mark::Cedilla}},
    };
    return defs;
}

// ---- variant 0: 5x7 bases, 9 rows per def (7 base + 2 descender) -------------

inline const std::vector<CharDef>& font0_defs() {
    static const std::vector<CharDef> defs = {
        {"A", ".###.|#...#|#...#|#####|#...#|#...#|#...#|.....|....."},
        {"B", "####.|#...#|#...#|####.|#...#|#...#|####.|.....|....."},
        {"C", ".###.|#...#|#....|#....|#....|#...#|.###.|.....|....."},
        {"D", "####.|#...#|#...#|#...#|#...#|#...#|####.|.....|....."},
        {"E", "#####|#....|#....|####.|#....|#....|#####|.....|....."},
        {"F", "#####|#....|#....|####.|#....|#....|#....|.....|....."},
        {"G", ".###.|#...#|#....|#.###|#...#|#...#|.###.|.....|....."},
        {"H", "#...#|#...#|#...#|#####|#...#|#...#|#...#|.....|....."},
        {"I", ".###.|..#..|..#..|..#..|..#..|..#..|.###.|.....|....."},
        {"J", "..###|...#.|...#.|...#.|...#.|#..#.|.##..|.....|....."},
        {"K", "#...#|#..#.|#.#..|##...|#.#..|#..#.|#...#|.....|....."},
        {"L", "#....|#....|#....|#....|#....|#....|#####|.....|....."},
        {"M", "#...#|##.##|#.#.#|#.#.#|#...#|#...#|#...#|.....|....."},
        {"N", "#...#|##..#|#.#.#|#..##|#...#|#...#|#...#|.....|....."},
        {"O", ".###.|#...#|#...#|#...#|#...#|#...#|.###.|.....|....."},
        {"P", "####.|#...#|#...#|####.|#....|#....|#....|.....|....."},
        {"Q", ".###.|#...#|#...#|#...#|#.#.#|#..#.|.##.#|.....|....."},
        {"R", "####.|#...#|#...#|####.|#.#..|#..#.|#...#|.....|....."},
        {"S", ".####|#....|#....|.###.|....#|....#|####.|.....|....."},
        {"T", "#####|..#..|..#..|..#..|..#..|..#..|..#..|.....|....."},
        {"U", "#...#|#...#|#...#|#...#|#...#|#...#|.###.|.....|....."},
        {"V", "#...#|#...#|#...#|#...#|#...#|.#.#.|..#..|.....|....."},
        {"W", "#...#|#...#|#...#|#.#.#|#.#.#|##.##|#...#|.....|....."},
        {"X", "#...#|#...#|.#.#.|..#..|.#.#.|#...#|#...#|.....|....."},
        {"Y", "#...#|#...#|.#.#.|..#..|..#..|..#..|..#..|.....|....."},
        {"Z", "#####|....#|...#.|..#..|.#...|#....|#####|.....|....."},
        {"a", ".....|.....|.###.|....#|.####|#...#|.####|.....|....."},
        {"b", "#....|#....|####.|#...#|#...#|#...#|####.|.....|....."},
        {"c", ".....|.....|.###.|#....|#....|#....|.###.|.....|....."},
        {"d", "....#|....#|.####|#...#|#...#|#...#|.####|.....|....."},
        {"e", ".....|.....|.###.|#...#|#####|#....|.###.|.....|....."},
        {"f", "..##.|.#...|.#...|###..|.#...|.#...|.#...|.....|....."},
        {"g", ".....|.....|.####|#...#|#...#|#...#|.####|....#|.###."},
        {"h", "#....|#....|####.|#...#|#...#|#...#|#...#|.....|....."},
        {"i", ".....|..#..|.....|.##..|..#..|..#..|.###.|.....|....."},
        {"j", ".....|...#.|.....|..##.|...#.|...#.|...#.|...#.|.##.."},
        {"k", "#....|#....|#..#.|#.#..|##...|#.#..|#..#.|.....|....."},
        {"l", ".##..|..#..|..#..|..#..|..#..|..#..|.###.|.....|....."},
        {"m", ".....|.....|##.#.|#.#.#|#.#.#|#.#.#|#.#.#|.....|....."},
        {"n", ".....|.....|#.##.|##..#|#...#|#...#|#...#|.....|....."},
        {"o", ".....|.....|.###.|#...#|#...#|#...#|.###.|.....|....."},
        {"p", ".....|.....|####.|#...#|#...#|#...#|####.|#....|#...."},
        {"q", ".....|.....|.####|#...#|#...#|#...#|.####|....#|....#"},
        {"r", ".....|.....|#.##.|##..#|#....|#....|#....|.....|....."},
        {"s", ".....|.....|.####|#....|.###.|....#|####.|.....|....."},
        {"t", ".....|.#...|####.|.#...|.#...|.#..#|..##.|.....|....."},
        {"u", ".....|.....|#...#|#...#|#...#|#..##|.##.#|.....|....."},
        {"v", ".....|.....|#...#|#...#|#...#|.#.#.|..#..|.....|....."},
        {"w", ".....|.....|#...#|#.#.#|#.#.#|#.#.#|.#.#.|.....|....."},
        {"x", ".....|.....|#...#|.#.#.|..#..|.#.#.|#...#|.....|....."},
        {"y", ".....|.....|#...#|#...#|#...#|#..##|.##.#|....#|.###."},
        {"z", ".....|.....|#####|...#.|..#..|.#...|#####|.....|....."},
        {"ı", ".....|.....|.##..|..#..|..#..|..#..|.###.|.....|....."},
        {"0", ".###.|#...#|#..##|#.#.#|##..#|#...#|.###.|.....|....."},
        {"1", "..#..|.##..|..#..|..#..|..#..|..#..|.###.|.....|....."},
        {"2", ".###.|#...#|....#|...#.|..#..|.#...|#####|.....|....."},
        {"3", ".###.|#...#|....#|..##.|....#|#...#|.###.|.....|....."},
        {"4", "...#.|..##.|.#.#.|#..#.|#####|...#.|...#.|.....|....."},
        {"5", "#####|#....|####.|....#|....#|#...#|.###.|.....|....."},
        {"6", ".###.|#....|#....|####.|#...#|#...#|.###.|.....|....."},
        {"7", "#####|....#|...#.|..#..|.#...|.#...|.#...|.....|....."},
        {"8", ".###.|#...#|#...#|.###.|#...#|#...#|.###.|.....|....."},
        {"9", ".###.|#...#|#...#|.####|....#|....#|.###.|.....|....."},
        {"ß", ".##..|#..#.|#..#.|#.##.|#...#|#...#|#.##.|.....|....."},
        {"Æ", ".####|#.#..|#.#..|#.###|###..|#.#..|#.###|.....|....."},
        {"æ", ".....|.....|####.|..#.#|.####|#.#..|.####|.....|....."},
        {"Œ", ".####|#.#..|#.#..|#.##.|#.#..|#.#..|.####|.....|....."},
        {"œ", ".....|.....|.####|#.#.#|#.###|#.#..|.####|.....|....."},
        {"Ø", ".####|#...#|#..##|#.#.#|##..#|#...#|####.|.....|....."},
        {"ø", ".....|.....|.####|#..##|#.#.#|##..#|####.|.....|....."},
    };
    return defs;
}

// ---- variant 1: 4x6 bases, 8 rows per def (6 base + 2 descender) -------------

inline const std::vector<CharDef>& font1_defs() {
    static const std::vector<CharDef> defs = {
        {"A", ".##.|#..#|####|#..#|#..#|#..#|....|...."},
        {"B", "###.|#..#|###.|#..#|#..#|###.|....|...."},
        {"C", ".###|#...|#...|#...|#...|.###|....|...."},
        {"D", "###.|#..#|#..#|#..#|#..#|###.|....|...."},
        {"E", "####|#...|###.|#...|#...|####|....|...."},
        {"F", "####|#...|###.|#...|#...|#...|....|...."},
        {"G", ".###|#...|#.##|#..#|#..#|.###|....|...."},
        {"H", "#..#|#..#|####|#..#|#..#|#..#|....|...."},
        {"I", "###.|.#..|.#..|.#..|.#..|###.|....|...."},
        {"J", ".###|..#.|..#.|..#.|#.#.|.#..|....|...."},
        {"K", "#..#|#.#.|##..|##..|#.#.|#..#|....|...."},
        {"L", "#...|#...|#...|#...|#...|####|....|...."},
        {"M", "#..#|####|####|#..#|#..#|#..#|....|...."},
        {"N", "#..#|##.#|##.#|#.##|#.##|#..#|....|...."},
        {"O", ".##.|#..#|#..#|#..#|#..#|.##.|....|...."},
        {"P", "###.|#..#|#..#|###.|#...|#...|....|...."},
        {"Q", ".##.|#..#|#..#|#..#|#.##|.###|....|...."},
        {"R", "###.|#..#|#..#|###.|#.#.|#..#|....|...."},
        {"S", ".###|#...|.##.|...#|...#|###.|....|...."},
        {"T", "####|.#..|.#..|.#..|.#..|.#..|....|...."},
        {"U", "#..#|#..#|#..#|#..#|#..#|.##.|....|...."},
        {"V", "#..#|#..#|#..#|#..#|.##.|.#..|....|...."},
        {"W", "#..#|#..#|#..#|####|####|#..#|....|...."},
        {"X", "#..#|#..#|.##.|.##.|#..#|#..#|....|...."},
        {"Y", "#..#|#..#|.##.|.#..|.#..|.#..|....|...."},
        {"Z", "####|...#|..#.|.#..|#...|####|....|...."},
        {"a", "....|....|.###|#..#|#..#|.###|....|...."},
        {"b", "#...|#...|###.|#..#|#..#|###.|....|...."},
        {"c", "....|....|.###|#...|#...|.###|....|...."},
        {"d", "...#|...#|.###|#..#|#..#|.###|....|...."},
        {"e", "....|....|.##.|####|#...|.##.|....|...."},
        {"f", "..##|.#..|###.|.#..|.#..|.#..|....|...."},
        {"g", "....|....|.###|#..#|#..#|.###|...#|.##."},
        {"h", "#...|#...|###.|#..#|#..#|#..#|....|...."},
        {"i", "....|.#..|....|.#..|.#..|.#..|....|...."},
        {"j", "....|..#.|....|..#.|..#.|..#.|..#.|##.."},
        {"k", "#...|#...|#.#.|##..|#.#.|#..#|....|...."},
        {"l", ".#..|.#..|.#..|.#..|.#..|.##.|....|...."},
        {"m", "....|....|###.|#.#.|#.#.|#.#.|....|...."},
        {"n", "....|....|###.|#..#|#..#|#..#|....|...."},
        {"o", "....|....|.##.|#..#|#..#|.##.|....|...."},
        {"p", "....|....|###.|#..#|#..#|###.|#...|#..."},
        {"q", "....|....|.###|#..#|#..#|.###|...#|...#"},
        {"r", "....|....|#.##|##..|#...|#...|....|...."},
        {"s", "....|....|.###|##..|..##|###.|....|...."},
        {"t", "....|.#..|###.|.#..|.#..|.##.|....|...."},
        {"u", "....|....|#..#|#..#|#..#|.###|....|...."},
        {"v", "....|....|#..#|#..#|.##.|.#..|....|...."},
        {"w", "....|....|#..#|#..#|####|.#.#|....|...."},
        {"x", "....|....|#..#|.##.|.##.|#..#|....|...."},
        {"y", "....|....|#..#|#..#|#..#|.###|...#|.##."},
        {"z", "....|....|####|..#.|.#..|####|....|...."},
        {"ı", "....|....|.#..|.#..|.#..|.##.|....|...."},
        {"0", ".##.|#..#|#.##|##.#|#..#|.##.|....|...."},
        {"1", ".#..|##..|.#..|.#..|.#..|###.|....|...."},
        {"2", "###.|...#|..#.|.#..|#...|####|....|...."},
        {"3", "###.|...#|.##.|...#|...#|###.|....|...."},
        {"4", "#..#|#..#|####|...#|...#|...#|....|...."},
        {"5", "####|#...|###.|...#|...#|###.|....|...."},
        {"6", ".###|#...|###.|#..#|#..#|.##.|....|...."},
        {"7", "####|...#|..#.|.#..|.#..|.#..|....|...."},
        {"8", ".##.|#..#|.##.|#..#|#..#|.##.|....|...."},
        {"9", ".##.|#..#|#..#|.###|...#|##..|....|...."},
        {"ß", ".##.|#..#|#.#.|#..#|#..#|#.#.|....|...."},
        {"Æ", ".###|#.#.|####|#.#.|#.#.|#.##|....|...."},
        {"æ", "....|....|.###|#.#.|####|.##.|....|...."},
        {"Œ", ".###|#.#.|#.##|#.#.|#.#.|.###|....|...."},
        {"œ", "....|....|####|#.##|#.#.|####|....|...."},
        {"Ø", ".###|#.##|#.##|##.#|##.#|###.|....|...."},
        {"ø", "....|....|.###|#.##|##.#|###.|....|...."},
    };
    return defs;
}

inline GlyphBitmap parse_rows(const std::string& rows, int expect_w, int expect_h,
                              const std::string& what) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (true) {
        size_t bar = rows.find('|', start);
        lines.push_back(rows.substr(start, bar == std::string::npos ? bar : bar - start));
        if (bar == std::string::npos) break;
        start = bar + 1;
    }
    if (expect_h >= 0 && static_cast<int>(lines.size()) != expect_h)
        throw Error("font: " + what + ": expected " + std::to_string(expect_h) + " rows, got " +
                    std::to_string(lines.size()));
    GlyphBitmap g;
    g.h = static_cast<int>(lines.size());
    g.w = expect_w >= 0 ? expect_w : static_cast<int>(lines[0].size());
    g.bits.assign(static_cast<size_t>(g.w) * g.h, 0);
    for (int y = 0; y < g.h; ++y) {
        if (static_cast<int>(lines[y].size()) != g.w)
            throw Error("font: " + what + ": row " + std::to_string(y) + " width mismatch");
        for (int x = 0; x < g.w; ++x) {
            char c = lines[y][static_cast<size_t>(x)];
            if (c != '.' && c != '#') throw Error("font: " + what + ": bad cell char");
            g.set(x, y, c == '#');
        }
    }
    return g;
}

} // namespace fontdata

inline std::optional<Decomposition> decompose(char32_t cp) {
    static const std::map<char32_t, Decomposition> table = [] {
        std::map<char32_t, Decomposition> t;
        for (const auto& [cp_utf8, rhs] : fontdata::decomp_defs()) {
            std::u32string k = utf8_decode(cp_utf8);
            std::u32string b = utf8_decode(rhs.first);
            if (k.size() != 1 || b.size() != 1) throw Error("font: bad decomposition entry");
            t[k[0]] = Decomposition{b[0], rhs.second};
        }
        return t;
    }();
    auto it = table.find(cp);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

inline const GlyphBitmap& mark_bitmap(Mark m) {
    static const std::map<Mark, GlyphBitmap> table = [] {
        std::map<Mark, GlyphBitmap> t;
        for (const auto& [mark, rows] : fontdata::mark_defs())
            t[mark] = fontdata::parse_rows(rows, -1, -1, "mark");
        if (t.size() != 10) throw Error("font: expected 10 marks");
        for (auto i = t.begin(); i != t.end(); ++i)
            for (auto j = std::next(i); j != t.end(); ++j)
                if (i->second == j->second) throw Error("font: duplicate mark bitmaps");
        return t;
    }();
    return table.at(m);
}

class Font {
public:
    static constexpr int kNumVariants = 2;

    static const Font& variant(int id) {
        static const Font f0(0, 5, 7, 2, fontdata::font0_defs());
        static const Font f1(1, 4, 6, 2, fontdata::font1_defs());
        if (id == 0) return f0;
        if (id == 1) return f1;
        throw DataError("font: no such variant: " + std::to_string(id));
    }

    int id() const { return id_; }
    int cell_width() const { return cell_w_; }
    int cell_height() const { return cell_h_; }
    // advance per glyph before inter-glyph spacing; fixed-cell font
    int advance() const { return cell_w_; }
    // last row of the base zone; descenders and the cedilla hang below it
    int baseline() const { return 3 + base_rows_ - 1; }

    bool covers(char32_t cp) const { return glyphs_.count(cp) != 0; }

    const GlyphBitmap& glyph(char32_t cp) const {
        auto it = glyphs_.find(cp);
        if (it == glyphs_.end())
            throw DataError("font " + std::to_string(id_) + ": uncovered codepoint " +
                            utf8_encode(cp));
        return it->second;
    }

    const std::vector<char32_t>& covered() const { return covered_; }

private:
    Font(int id, int cell_w, int base_rows, int desc_rows,
         const std::vector<fontdata::CharDef>& defs)
        : id_(id), cell_w_(cell_w), base_rows_(base_rows), desc_rows_(desc_rows),
          cell_h_(3 + base_rows + desc_rows) {
        for (const auto& def : defs) {
            std::u32string k = utf8_decode(def.cp);
            if (k.size() != 1) throw Error("font: multi-codepoint glyph key");
            GlyphBitmap body = fontdata::parse_rows(def.rows, cell_w_, base_rows_ + desc_rows_,
                                                    std::string("glyph ") + def.cp);
            GlyphBitmap cell{cell_w_, cell_h_, {}};
            cell.bits.assign(static_cast<size_t>(cell_w_) * cell_h_, 0);
            for (int y = 0; y < body.h; ++y)
                for (int x = 0; x < body.w; ++x)
                    if (body.at(x, y)) cell.set(x, y + 3, true);
            if (!glyphs_.emplace(k[0], std::move(cell)).second)
                throw Error(std::string("font: duplicate glyph ") + def.cp);
        }

        // space: full cell, no ink
        GlyphBitmap space{cell_w_, cell_h_, {}};
        space.bits.assign(static_cast<size_t>(cell_w_) * cell_h_, 0);
        glyphs_.emplace(U' ', space);

        // composited accents
        for (char32_t cp : DiacriticTable::instance().all_codepoints()) {
            if (glyphs_.count(cp)) continue; // standalone, already present
            auto d = decompose(cp);
            if (!d) throw Error("font: no bitmap and no decomposition for " + utf8_encode(cp));
            glyphs_.emplace(cp, composite(*d, utf8_encode(cp)));
        }

        validate();
        for (const auto& [cp, g] : glyphs_) covered_.push_back(cp);
    }

    GlyphBitmap composite(const Decomposition& d, const std::string& what) const {
        auto bit = glyphs_.find(d.base);
        if (bit == glyphs_.end())
            throw Error("font: missing base glyph for " + what);
        GlyphBitmap cell = bit->second;
        auto box = ink_box(cell);
        if (!box) throw Error("font: empty base glyph for " + what);
        const GlyphBitmap& mark = mark_bitmap(d.mark);
        int top = mark_below(d.mark) ? box->y1 + 1 : box->y0 - mark.h;
        if (top < 0 || top + mark.h > cell_h_)
            throw Error("font: mark does not fit for " + what);
        int d2 = box->width() - mark.w; // floor division keeps wide marks centered
        int left = box->x0 + (d2 >= 0 ? d2 / 2 : (d2 - 1) / 2);
        left = std::max(0, std::min(left, cell_w_ - mark.w));
        for (int y = 0; y < mark.h; ++y)
            for (int x = 0; x < mark.w; ++x)
                if (mark.at(x, y)) cell.set(left + x, top + y, true);
        return cell;
    }

    void validate() const {
        // required coverage: ascii letters, digits, space, all 85 classes
        for (char32_t c = U'A'; c <= U'Z'; ++c) require(c);
        for (char32_t c = U'a'; c <= U'z'; ++c) require(c);
        for (char32_t c = U'0'; c <= U'9'; ++c) require(c);
        require(U' ');
        for (char32_t cp : DiacriticTable::instance().all_codepoints()) require(cp);

        // all covered glyphs inked except space; pairwise distinct bitmaps
        std::map<std::vector<uint8_t>, char32_t> seen;
        for (const auto& [cp, g] : glyphs_) {
            if (cp != U' ' && !ink_box(g))
                throw Error("font: blank glyph " + utf8_encode(cp));
            auto [it, fresh] = seen.emplace(g.bits, cp);
            if (!fresh)
                throw Error("font " + std::to_string(id_) + ": glyphs " + utf8_encode(it->second) +
                            " and " + utf8_encode(cp) + " are identical");
        }
    }

    void require(char32_t cp) const {
        if (!glyphs_.count(cp))
            throw Error("font " + std::to_string(id_) + ": missing required glyph " +
                        utf8_encode(cp));
    }

    int id_, cell_w_, base_rows_, desc_rows_, cell_h_;
    std::map<char32_t, GlyphBitmap> glyphs_;
    std::vector<char32_t> covered_;
};

} // namespace diakrit
