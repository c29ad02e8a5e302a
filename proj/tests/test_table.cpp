#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "diakrit/diacritic_table.hpp"

using namespace diakrit;

namespace {

// Independent transcription of the incidence table, kept separate from the
// library's copy so a slip in either one fails loudly.
const std::map<std::string, std::string>& golden_rows() {
    static const std::map<std::string, std::string> rows = {
        {"Spanish", "Á á Ñ ñ"},
        {"German", "Ä ä Ö ö Ü ü ß"},
        {"French", "À à Â â É é È è Ê ê Ë ë Î î Ï ï Ô ô Œ œ Û û ç"},
        {"Italian", "À à Ì ì Ò ò Ù ù"},
        {"Romanian", "Â â Ă ă Ş ş Ţ ţ"},
        {"Finnish", "Ä ä Ö ö"},
        {"Hungarian", "Á á É é Í í Ó ó Ö ö Ő ő Ü ü Ű ű"},
        {"Estonian", "Ä ä Õ õ Ö ö Š š"},
        {"Danish", "Å å Æ æ Ø ø"},
        {"Dutch", "Ë ë Ï ï"},
        {"Swedish", "Ä ä Å å Ö ö"},
        {"Portuguese", "Á á Ã ã Ê ê Ô ô Õ õ ç"},
        {"Czech", "Á á É é Ě ě Í í Ó ó Ú ú ů Ý ý Č č Ď ď Ň ň Ř ř Š š Ť ť Ž ž"},
    };
    return rows;
}

std::u32string golden_row(const std::string& lang) {
    std::u32string out;
    for (char32_t cp : utf8_decode(golden_rows().at(lang)))
        if (cp != U' ') out.push_back(cp);
    return out;
}

char32_t cp1(const char* utf8) {
    std::u32string s = utf8_decode(utf8);
    EXPECT_EQ(s.size(), 1u);
    return s[0];
}

} // namespace

TEST(DiacriticTable, UnionHasExactly85Classes) {
    const auto& t = DiacriticTable::instance();
    EXPECT_EQ(t.all_codepoints().size(), 85u);

    std::set<char32_t> uni;
    for (const auto& [lang, row] : golden_rows())
        for (char32_t cp : golden_row(lang)) uni.insert(cp);
    EXPECT_EQ(uni.size(), 85u);
}

TEST(DiacriticTable, MembershipMatchesGoldenRowsExactly) {
    const auto& t = DiacriticTable::instance();
    for (const auto& [name, _] : golden_rows()) {
        auto lang = lang_from_name(name);
        ASSERT_TRUE(lang.has_value()) << name;
        std::u32string expect = golden_row(name);
        std::set<char32_t> expect_set(expect.begin(), expect.end());
        std::set<char32_t> got_set(t.row(*lang).begin(), t.row(*lang).end());
        EXPECT_EQ(got_set, expect_set) << name;
        EXPECT_EQ(t.row(*lang), expect) << name << " row order";
    }
}

TEST(DiacriticTable, IndexFollowsRowOrderUnionFirstOccurrenceWins) {
    const auto& t = DiacriticTable::instance();
    // Recompute the rule from the golden rows, in language id order.
    std::u32string expected_order;
    std::set<char32_t> seen;
    for (int i = 0; i < kNumLanguages; ++i) {
        for (char32_t cp : golden_row(std::string(lang_name(static_cast<Lang>(i))))) {
            if (seen.insert(cp).second) expected_order.push_back(cp);
        }
    }
    ASSERT_EQ(expected_order.size(), 85u);
    for (int i = 0; i < 85; ++i) {
        EXPECT_EQ(t.codepoint(i), expected_order[static_cast<size_t>(i)]) << "index " << i;
        EXPECT_EQ(t.canonical_index(expected_order[static_cast<size_t>(i)]), i);
    }
}

TEST(DiacriticTable, CanonicalIndexExamples) {
    const auto& t = DiacriticTable::instance();
    EXPECT_EQ(t.canonical_index(cp1("Á")), 0);
    EXPECT_EQ(t.canonical_index(U'a'), std::nullopt);
    EXPECT_EQ(t.canonical_index(U'x'), std::nullopt);
    int defined = 0;
    for (char32_t cp = 0; cp < 0x500; ++cp)
        if (t.canonical_index(cp)) ++defined;
    EXPECT_EQ(defined, 85);
}

TEST(DiacriticTable, CanonicalIndexRoundTripsAndIsInjective) {
    const auto& t = DiacriticTable::instance();
    std::set<int> indices;
    for (char32_t cp : t.all_codepoints()) {
        auto idx = t.canonical_index(cp);
        ASSERT_TRUE(idx.has_value());
        EXPECT_TRUE(indices.insert(*idx).second) << "duplicate index " << *idx;
        EXPECT_EQ(t.codepoint(*idx), cp);
    }
    EXPECT_EQ(indices.size(), 85u);
    EXPECT_EQ(*indices.begin(), 0);
    EXPECT_EQ(*indices.rbegin(), 84);
}

TEST(DiacriticTable, LanguagesOfExamples) {
    const auto& t = DiacriticTable::instance();
    auto langs_of = [&](const char* c) { return t.languages_of(cp1(c)); };

    EXPECT_EQ(langs_of("ß"), std::vector<Lang>{Lang::German});
    std::vector<Lang> expect_oe = {Lang::German, Lang::Finnish, Lang::Hungarian, Lang::Estonian,
                                   Lang::Swedish};
    EXPECT_EQ(langs_of("ö"), expect_oe);
    EXPECT_TRUE(t.languages_of(U'x').empty());
}

TEST(DiacriticTable, EveryTableEntryBelongsToSomeLanguage) {
    const auto& t = DiacriticTable::instance();
    for (char32_t cp : t.all_codepoints()) EXPECT_FALSE(t.languages_of(cp).empty());
}

TEST(DiacriticTable, UniqueDiacriticExamples) {
    const auto& t = DiacriticTable::instance();
    EXPECT_EQ(t.unique_diacritics(Lang::Spanish), utf8_decode("Ññ"));
    EXPECT_EQ(t.unique_diacritics(Lang::German), utf8_decode("ß"));
    EXPECT_TRUE(t.unique_diacritics(Lang::Finnish).empty());
}

TEST(DiacriticTable, ExactlyNineLanguagesHaveUniqueDiacritics) {
    const auto& t = DiacriticTable::instance();
    std::set<std::string> empty_unique;
    int nonempty = 0;
    for (Lang l : all_langs()) {
        if (t.unique_diacritics(l).empty())
            empty_unique.insert(std::string(lang_name(l)));
        else
            ++nonempty;
    }
    EXPECT_EQ(nonempty, 9);
    std::set<std::string> expect = {"Finnish", "Dutch", "Swedish", "Estonian"};
    EXPECT_EQ(empty_unique, expect);
}

TEST(DiacriticTable, MultiplicitySumAtLeast85) {
    const auto& t = DiacriticTable::instance();
    size_t with_multiplicity = 0;
    for (Lang l : all_langs()) with_multiplicity += t.row(l).size();
    EXPECT_GE(with_multiplicity, 85u);
    EXPECT_EQ(with_multiplicity, 134u); // sum of the thirteen row lengths
}

TEST(DiacriticTable, CsvExportHasOneLinePerClass) {
    const auto& t = DiacriticTable::instance();
    std::string csv = t.to_csv();
    std::istringstream in(csv);
    std::string line;
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_EQ(line, "index,codepoint,languages");
    int n = 0;
    while (std::getline(in, line)) {
        ASSERT_FALSE(line.empty());
        EXPECT_EQ(line.find(std::to_string(n) + ","), 0u) << line;
        ++n;
    }
    EXPECT_EQ(n, 85);
    EXPECT_NE(csv.find("0,Á,Spanish;Hungarian;Portuguese;Czech"), std::string::npos);
}
