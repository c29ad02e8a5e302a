#include <gtest/gtest.h>

#include "diakrit/utf8.hpp"

using namespace diakrit;

TEST(Utf8, DecodesAsciiAndMultibyte) {
    std::u32string s = utf8_decode("aÁ€\xF0\x9F\x98\x80"); // 1,2,3,4-byte sequences
    ASSERT_EQ(s.size(), 4u);
    EXPECT_EQ(s[0], U'a');
    EXPECT_EQ(s[1], U'Á');
    EXPECT_EQ(s[2], U'€');
    EXPECT_EQ(s[3], U'\U0001F600');
}

TEST(Utf8, EncodeRoundTrips) {
    const char* samples[] = {"", "plain", "Ërrör", "ščřž", "ÆØßŒ", "a\xF0\x9F\x98\x80z"};
    for (const char* s : samples) EXPECT_EQ(utf8_encode(utf8_decode(s)), s);
}

TEST(Utf8, RejectsMalformedInput) {
    EXPECT_THROW(utf8_decode("\x80"), DataError);         // bare continuation
    EXPECT_THROW(utf8_decode("\xC3"), DataError);         // truncated 2-byte
    EXPECT_THROW(utf8_decode("\xE0\x80\x80"), DataError); // overlong
    EXPECT_THROW(utf8_decode("\xC0\xAF"), DataError);     // overlong slash
    EXPECT_THROW(utf8_decode("\xED\xA0\x80"), DataError); // surrogate
    EXPECT_THROW(utf8_decode("\xF5\x80\x80\x80"), DataError); // > U+10FFFF
    EXPECT_THROW(utf8_decode("\xC3\x41"), DataError);     // bad continuation byte
}

TEST(Utf8, IteratorFormTracksPosition) {
    std::string s = "aÁb";
    size_t pos = 0;
    EXPECT_EQ(utf8_next(s, pos), U'a');
    EXPECT_EQ(pos, 1u);
    EXPECT_EQ(utf8_next(s, pos), U'Á');
    EXPECT_EQ(pos, 3u);
    EXPECT_EQ(utf8_next(s, pos), U'b');
    EXPECT_EQ(pos, 4u);
}
