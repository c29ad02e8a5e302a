#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diakrit/error.hpp"
#include "diakrit/utf8.hpp"

namespace diakrit {

inline constexpr int kNumLanguages = 13;
inline constexpr int kNumDiacritics = 85;

enum class Lang : int {
    Spanish = 0,
    German,
    French,
    Italian,
    Romanian,
    Finnish,
    Hungarian,
    Estonian,
    Danish,
    Dutch,
    Swedish,
    Portuguese,
    Czech,
};

inline const std::array<std::string_view, kNumLanguages>& lang_names() {
    static const std::array<std::string_view, kNumLanguages> names = {
        "Spanish", "German",  "French",  "Italian", "Romanian", "Finnish", "Hungarian",
        "Estonian", "Danish", "Dutch",   "Swedish", "Portuguese", "Czech",
    };
    return names;
}

inline std::string_view lang_name(Lang l) { return lang_names()[static_cast<int>(l)]; }

inline std::optional<Lang> lang_from_name(std::string_view name) {
    const auto& names = lang_names();
    for (int i = 0; i < kNumLanguages; ++i)
        if (names[i] == name) return static_cast<Lang>(i);
    return std::nullopt;
}

inline std::array<Lang, kNumLanguages> all_langs() {
    std::array<Lang, kNumLanguages> out{};
    for (int i = 0; i < kNumLanguages; ++i) out[i] = static_cast<Lang>(i);
    return out;
}

// Registry of the 85 diacritic characters across the 13 languages.
//
// The global class index of a character is its position in the union of the
// per-language rows, taken in language id order with first occurrence
// winning. Case variants are distinct classes. Immutable after construction.
class DiacriticTable {
public:
    static const DiacriticTable& instance() {
        static const DiacriticTable table;
        return table;
    }

    // Global class index in [0, 85), or nullopt for anything else.
    std::optional<int> canonical_index(char32_t cp) const {
        auto it = index_.find(cp);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(char32_t cp) const { return index_.count(cp) != 0; }

    // Inverse of canonical_index.
    char32_t codepoint(int index) const { return ordered_.at(static_cast<size_t>(index)); }

    const std::u32string& all_codepoints() const { return ordered_; }

    // Languages whose row contains cp, in language id order. Empty if none.
    std::vector<Lang> languages_of(char32_t cp) const {
        std::vector<Lang> out;
        for (int i = 0; i < kNumLanguages; ++i) {
            if (rows_[i].find(cp) != std::u32string::npos) out.push_back(static_cast<Lang>(i));
        }
        return out;
    }

    // A language's full row, in row order.
    const std::u32string& row(Lang l) const { return rows_[static_cast<int>(l)]; }

    bool in_row(Lang l, char32_t cp) const {
        return rows_[static_cast<int>(l)].find(cp) != std::u32string::npos;
    }

    // Row members that belong to no other language's row.
    std::u32string unique_diacritics(Lang l) const {
        std::u32string out;
        for (char32_t cp : rows_[static_cast<int>(l)]) {
            if (languages_of(cp).size() == 1) out.push_back(cp);
        }
        return out;
    }

    // Audit export: one line per class, `index,codepoint,languages`, languages
    // joined with ';' in id order.
    std::string to_csv() const {
        std::string out = "index,codepoint,languages\n";
        for (int i = 0; i < kNumDiacritics; ++i) {
            char32_t cp = ordered_[static_cast<size_t>(i)];
            out += std::to_string(i);
            out += ',';
            utf8_append(out, cp);
            out += ',';
            bool first = true;
            for (Lang l : languages_of(cp)) {
                if (!first) out += ';';
                out += lang_name(l);
                first = false;
            }
            out += '\n';
        }
        return out;
    }

private:
    DiacriticTable() {
        static constexpr std::string_view kRowsUtf8[kNumLanguages] = {
            "ÁáÑñ",                                            // Spanish
            "ÄäÖöÜüß",                                         // German
            "ÀàÂâÉéÈèÊêËëÎîÏïÔôŒœÛûç",                         // French
            "ÀàÌìÒòÙù",                                        // Italian
            "ÂâĂăŞşŢţ",                                        // Romanian
            "ÄäÖö",                                            // Finnish
            "ÁáÉéÍíÓóÖöŐőÜüŰű",                                // Hungarian
            "ÄäÕõÖöŠš",                                        // Estonian
            "ÅåÆæØø",                                          // Danish
            "ËëÏï",                                            // Dutch
            "ÄäÅåÖö",                                          // Swedish
            "ÁáÃãÊêÔôÕõç",                                     // Portuguese
            "ÁáÉéĚěÍíÓóÚúůÝýČčĎďŇňŘřŠšŤťŽž",                   // Czech
        };
        for (int i = 0; i < kNumLanguages; ++i) {
            rows_[i] = utf8_decode(kRowsUtf8[i]);
            for (char32_t cp : rows_[i]) {
                if (index_.emplace(cp, static_cast<int>(ordered_.size())).second)
                    ordered_.push_back(cp);
            }
        }
        if (static_cast<int>(ordered_.size()) != kNumDiacritics)
            throw Error("diacritic table: union has " + std::to_string(ordered_.size()) +
                        " entries, expected 85");
    }

    std::array<std::u32string, kNumLanguages> rows_;
    std::u32string ordered_;
    std::map<char32_t, int> index_;
};

} // namespace diakrit
