#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "diakrit/corpus.hpp"

using namespace diakrit;

namespace {

int canon(const char* utf8) {
    auto idx = DiacriticTable::instance().canonical_index(utf8_decode(utf8)[0]);
    EXPECT_TRUE(idx.has_value());
    return *idx;
}

// independent oracle: a box count must equal the number of codepoints that
// carry a canonical class index
int diacritic_occurrences(const std::string& word) {
    int n = 0;
    for (char32_t cp : utf8_decode(word))
        if (DiacriticTable::instance().canonical_index(cp)) ++n;
    return n;
}

bool dark(const Image& img, int x, int y) { return img.gray(x, y) < 0.5; }

bool row_has_ink(const Image& img, int y) {
    for (int x = 0; x < img.width(); ++x)
        if (dark(img, x, y)) return true;
    return false;
}

RenderStyle style_for(int font, int scale, uint64_t seed = 7) {
    RenderStyle s;
    s.font_id = font;
    s.glyph_height = Font::variant(font).cell_height() * scale;
    s.seed = seed;
    return s;
}

} // namespace

TEST(RenderWord, HeightIsAlways16AndWidthGrowsWithLength) {
    for (int font = 0; font < 2; ++font)
        for (int scale = 1; scale <= 2; ++scale) {
            AnnotatedImage a = render_word("ño", style_for(font, scale));
            AnnotatedImage b = render_word("ñoñoño", style_for(font, scale));
            EXPECT_EQ(a.image.height(), 16);
            EXPECT_EQ(b.image.height(), 16);
            EXPECT_GT(b.image.width(), a.image.width() * 2);
        }
}

TEST(RenderWord, SingleDiacriticWord) {
    AnnotatedImage img = render_word("año", style_for(0, 1));
    ASSERT_EQ(img.boxes.size(), 1u);
    EXPECT_EQ(img.boxes[0].cls, canon("ñ"));
}

TEST(RenderWord, PlainWordHasNoBoxes) {
    AnnotatedImage img = render_word("casa", style_for(0, 1));
    EXPECT_TRUE(img.boxes.empty());
}

TEST(RenderWord, OneBoxPerDiacriticOccurrence) {
    // box count == diacritic codepoint count, checked against an independent
    // occurrence counter; the per-box class must match the placement log
    const char* words[] = {"año", "casa", "Ërrör", "häßlich", "çŞţ", "crème", "ůůů"};
    for (const char* w : words) {
        AnnotatedImage img = render_word(w, style_for(1, 1));
        EXPECT_EQ(static_cast<int>(img.boxes.size()), diacritic_occurrences(w)) << w;
        for (const WordBox& b : img.boxes) {
            bool matched = false;
            for (const GlyphPlacement& g : img.glyphs)
                if (g.cls == b.cls && g.box.x0 + (g.box.x1 + 1) == static_cast<int>(2 * b.cx) &&
                    g.box.y0 + (g.box.y1 + 1) == static_cast<int>(2 * b.cy))
                    matched = true;
            EXPECT_TRUE(matched) << w << " box class " << b.cls;
        }
    }
}

TEST(RenderWord, ErrorCasesNameTheProblem) {
    try {
        render_word("€uro", style_for(0, 1));
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("20AC"), std::string::npos);
    }
    EXPECT_THROW(render_word("", style_for(0, 1)), DataError);
    EXPECT_THROW(render_word("   ", style_for(0, 1)), DataError); // spaces render no ink
}

TEST(RenderWord, DeterministicForFixedStyle) {
    RenderStyle s = style_for(0, 2, 12345);
    AnnotatedImage a = render_word("Ërrör", s);
    AnnotatedImage b = render_word("Ërrör", s);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.boxes, b.boxes);

    s.seed = 999; // different jitter, same geometry
    AnnotatedImage c = render_word("Ërrör", s);
    EXPECT_EQ(c.image.width(), a.image.width());
    EXPECT_EQ(c.boxes, a.boxes);
    EXPECT_NE(c.image, a.image);
}

TEST(RenderWord, BoxesInBoundsAndTight) {
    for (int font = 0; font < 2; ++font)
        for (int scale = 1; scale <= 2; ++scale) {
            AnnotatedImage img = render_word("Šärgaßö", style_for(font, scale));
            ASSERT_EQ(img.boxes.size(), 4u);
            for (const WordBox& b : img.boxes) {
                EXPECT_GE(b.cls, 0);
                EXPECT_LT(b.cls, kNumDiacritics);
                EXPECT_GT(b.w, 0);
                EXPECT_GT(b.h, 0);
                int x0 = static_cast<int>(b.cx - b.w / 2), x1 = static_cast<int>(b.cx + b.w / 2) - 1;
                int y0 = static_cast<int>(b.cy - b.h / 2), y1 = static_cast<int>(b.cy + b.h / 2) - 1;
                EXPECT_GE(x0, 0);
                EXPECT_GE(y0, 0);
                EXPECT_LT(x1, img.image.width());
                EXPECT_LT(y1, img.image.height());
                // tight: every box edge touches at least one dark pixel
                bool top = false, bottom = false, left = false, right = false;
                for (int x = x0; x <= x1; ++x) {
                    top |= dark(img.image, x, y0);
                    bottom |= dark(img.image, x, y1);
                }
                for (int y = y0; y <= y1; ++y) {
                    left |= dark(img.image, x0, y);
                    right |= dark(img.image, x1, y);
                }
                EXPECT_TRUE(top && bottom && left && right) << "class " << b.cls;
            }
        }
}

TEST(RenderWord, InkRowsContiguousForDiacriticWords) {
    // words with a diacritic never have a blank row inside the glyph band,
    // so row-profile line splitting sees one line per word
    std::vector<std::string> words;
    for (char32_t cp : DiacriticTable::instance().all_codepoints())
        words.push_back(utf8_encode(cp));
    words.insert(words.end(), {"çift", "íji", "Ëij", "ăj", "ßig"});
    for (int font = 0; font < 2; ++font)
        for (const std::string& w : words) {
            AnnotatedImage img = render_word(w, style_for(font, 1));
            for (int y = 0; y < img.image.height(); ++y)
                EXPECT_TRUE(row_has_ink(img.image, y)) << "font " << font << " word " << w
                                                       << " row " << y;
        }
}

TEST(RenderWord, GlyphLogCoversEveryInkedGlyph) {
    AnnotatedImage img = render_word("año", style_for(0, 1));
    ASSERT_EQ(img.glyphs.size(), 3u);
    EXPECT_EQ(img.glyphs[0].cp, U'a');
    EXPECT_EQ(img.glyphs[1].cp, utf8_decode("ñ")[0]);
    EXPECT_EQ(img.glyphs[2].cp, U'o');
    EXPECT_EQ(img.glyphs[0].cls, -1);
    EXPECT_EQ(img.glyphs[1].cls, canon("ñ"));
    // left-to-right placement
    EXPECT_LT(img.glyphs[0].box.x1, img.glyphs[1].box.x0);
    EXPECT_LT(img.glyphs[1].box.x1, img.glyphs[2].box.x0);
}

TEST(RenderTestImage, DimensionsLanguageAndBoxes) {
    std::vector<std::string> lines = {"forêt", "déjà"};
    AnnotatedImage img = render_test_image(lines, Lang::French, style_for(0, 2));
    EXPECT_EQ(img.image.width(), kTestImageSize);
    EXPECT_EQ(img.image.height(), kTestImageSize);
    ASSERT_TRUE(img.lang.has_value());
    EXPECT_EQ(*img.lang, Lang::French);
    EXPECT_EQ(img.boxes.size(), 3u); // ê, é, à
    ASSERT_EQ(img.line_boxes.size(), 2u);
    EXPECT_LT(img.line_boxes[0].y1, img.line_boxes[1].y0);

    // every glyph's ink is inside its line band; every box inside some line
    for (const GlyphPlacement& g : img.glyphs) {
        bool inside = false;
        for (const InkBox& lb : img.line_boxes)
            inside |= g.box.y0 >= lb.y0 && g.box.y1 <= lb.y1 && g.box.x0 >= lb.x0 &&
                      g.box.x1 <= lb.x1;
        EXPECT_TRUE(inside);
    }
}

TEST(RenderTestImage, ErrorsOnOverflowAndNoDiacritic) {
    std::vector<std::string> too_wide = {"ñññññññññññññññññññññññññññññññññññ"};
    EXPECT_THROW(render_test_image(too_wide, Lang::Spanish, style_for(0, 2)), DataError);

    std::vector<std::string> too_tall(30, "ño");
    EXPECT_THROW(render_test_image(too_tall, Lang::Spanish, style_for(0, 1)), DataError);

    std::vector<std::string> plain = {"casa", "sol"};
    EXPECT_THROW(render_test_image(plain, Lang::Spanish, style_for(0, 1)), DataError);

    EXPECT_THROW(render_test_image({}, Lang::Spanish, style_for(0, 1)), DataError);
}

TEST(RenderTestImage, Deterministic) {
    std::vector<std::string> lines = {"mañana", "año"};
    AnnotatedImage a = render_test_image(lines, Lang::Spanish, style_for(1, 1, 42));
    AnnotatedImage b = render_test_image(lines, Lang::Spanish, style_for(1, 1, 42));
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.boxes, b.boxes);
}

TEST(SelectWords, PicksExactlyTheQualifyingWords) {
    auto words = select_words("mañana casa año", Lang::Spanish, 2, 1);
    std::set<std::string> got(words.begin(), words.end());
    EXPECT_EQ(got, (std::set<std::string>{"mañana", "año"}));
}

TEST(SelectWords, ErrorsWhenTooFewQualify) {
    EXPECT_THROW(select_words("casa sol luna", Lang::Spanish, 1, 1), DataError);
    EXPECT_THROW(select_words("", Lang::Spanish, 1, 1), DataError);
    try {
        select_words("mañana casa", Lang::Spanish, 5, 1);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("Spanish"), std::string::npos);
        EXPECT_NE(msg.find("1"), std::string::npos);
        EXPECT_NE(msg.find("5"), std::string::npos);
    }
}

TEST(SelectWords, ExcludesForeignDiacriticsAndPunctuation) {
    // café carries é, not in the Spanish row; punctuation must be stripped
    auto words = select_words("¡mañana! café (año),", Lang::Spanish, 2, 3);
    std::set<std::string> got(words.begin(), words.end());
    EXPECT_EQ(got, (std::set<std::string>{"mañana", "año"}));

    // the same text read as French yields café only
    auto fr = select_words("¡mañana! café (año),", Lang::French, 1, 3);
    EXPECT_EQ(fr[0], "café");
}

TEST(SelectWords, SeedDeterminesSelection) {
    std::string text;
    for (int i = 0; i < 40; ++i) text += "palabra" + std::string(1, char('a' + i % 26)) + "ñ ";
    auto a = select_words(text, Lang::Spanish, 10, 5);
    auto b = select_words(text, Lang::Spanish, 10, 5);
    EXPECT_EQ(a, b);
    std::set<std::vector<std::string>> variants;
    for (uint64_t seed = 0; seed < 8; ++seed)
        variants.insert(select_words(text, Lang::Spanish, 10, seed));
    EXPECT_GT(variants.size(), 1u);
}

TEST(Corpus, WriteReadRoundTrip) {
    std::vector<AnnotatedImage> imgs;
    for (int i = 0; i < 5; ++i)
        imgs.push_back(render_word("Ärger", style_for(i % 2, 1 + i % 2, 100 + i)));
    imgs.push_back(render_test_image({"mañana", "año"}, Lang::Spanish, style_for(0, 1, 9)));

    auto dir = std::filesystem::temp_directory_path() / "diakrit_corpus_rt";
    std::filesystem::remove_all(dir);
    write_corpus(imgs, dir.string());
    auto back = read_corpus(dir.string());
    ASSERT_EQ(back.size(), imgs.size());
    for (size_t i = 0; i < imgs.size(); ++i) {
        EXPECT_EQ(back[i].image, imgs[i].image) << i;
        EXPECT_EQ(back[i].boxes, imgs[i].boxes) << i;
        EXPECT_EQ(back[i].lang, imgs[i].lang) << i;
    }
    std::filesystem::remove_all(dir);
}

TEST(Corpus, PpmFormatRoundTrip) {
    std::vector<AnnotatedImage> imgs = {render_word("año", style_for(0, 1))};
    auto dir = std::filesystem::temp_directory_path() / "diakrit_corpus_ppm";
    std::filesystem::remove_all(dir);
    write_corpus(imgs, dir.string(), "ppm");
    EXPECT_TRUE(std::filesystem::exists(dir / "img_000000.ppm"));
    auto back = read_corpus(dir.string());
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].image, imgs[0].image);
    std::filesystem::remove_all(dir);
}

TEST(Corpus, ReadErrorsCarryFileAndLine) {
    auto dir = std::filesystem::temp_directory_path() / "diakrit_corpus_bad";
    std::filesystem::remove_all(dir);
    std::vector<AnnotatedImage> imgs = {render_word("año", style_for(0, 1))};
    write_corpus(imgs, dir.string());

    {
        std::ofstream ann(dir / "annotations.jsonl", std::ios::app);
        ann << "{not json\n";
    }
    try {
        read_corpus(dir.string());
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
    }

    // box outside the raster
    {
        std::ofstream ann(dir / "annotations.jsonl");
        ann << R"({"image":"img_000000.png","lang":null,"boxes":[[500,8,4,4,0]]})" << "\n";
    }
    EXPECT_THROW(read_corpus(dir.string()), DataError);

    // class out of range
    {
        std::ofstream ann(dir / "annotations.jsonl");
        ann << R"({"image":"img_000000.png","lang":null,"boxes":[[8,8,4,4,85]]})" << "\n";
    }
    EXPECT_THROW(read_corpus(dir.string()), DataError);

    std::filesystem::remove_all(dir);
}

TEST(Corpus, EmptyDirectoryIsEmptyCorpus) {
    auto dir = std::filesystem::temp_directory_path() / "diakrit_corpus_empty";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    EXPECT_TRUE(read_corpus(dir.string()).empty());
    std::filesystem::remove_all(dir);
    EXPECT_THROW(read_corpus(dir.string()), DataError);
}
