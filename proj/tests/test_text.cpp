#include <gtest/gtest.h>

#include <sstream>

#include "wata/csv.hpp"
#include "wata/text.hpp"
#include "wata/tokenize.hpp"

using namespace wata;

TEST(Text, Utf8RoundTrip) {
  const std::string s = "caf\xC3\xA9 \xE2\x80\x99 \xF0\x9F\x92\x89";
  EXPECT_EQ(text::to_utf8(text::to_u32(s)), s);
}

TEST(Text, TruncatedSequenceBecomesReplacement) {
  const std::string s = "ab\xE2\x80";
  const auto u = text::to_u32(s);
  ASSERT_GE(u.size(), 3u);
  EXPECT_EQ(u[2], text::kReplacement);
}

TEST(Text, CasefoldCoversLatinAndGreek) {
  EXPECT_EQ(text::casefold("VACCINE"), "vaccine");
  EXPECT_EQ(text::casefold("\xC3\x89T\xC3\x89"), "\xC3\xA9t\xC3\xA9");  // ÉTÉ
  EXPECT_EQ(text::casefold("\xCE\xA3"), "\xCF\x83");                      // Σ
}

TEST(Tokenize, WorkedExamples) {
  EXPECT_EQ(tokenize("Get your vaccine! #VaccineMaitri @WHO"),
            (std::vector<std::string>{"#vaccinemaitri", "@who", "get", "vaccine", "your"}));
  EXPECT_EQ(tokenize("vaccine Vaccine VACCINE"), std::vector<std::string>{"vaccine"});
  EXPECT_EQ(tokenize("see https://example.com now"), (std::vector<std::string>{"now", "see"}));
}

TEST(Tokenize, ApostrophesStayInsideWords) {
  EXPECT_EQ(tokenize_sequence("don\xE2\x80\x99t can't 'quoted'"),
            (std::vector<std::string>{"don't", "can't", "quoted"}));
}

TEST(Tokenize, HashOnlyWhenLeading) {
  EXPECT_EQ(tokenize_sequence("a#b # #c"), (std::vector<std::string>{"a", "b", "#c"}));
}

TEST(Tokenize, UrlsWithoutSchemeAreStripped) {
  EXPECT_EQ(tokenize("read www.example.org/x today"), (std::vector<std::string>{"read", "today"}));
}

TEST(Tokenize, EmojiSplitsWords) {
  EXPECT_EQ(tokenize_sequence("jab\xF0\x9F\x92\x89" "done"), (std::vector<std::string>{"jab", "done"}));
}

TEST(Csv, QuotedRowRoundTrip) {
  const std::vector<std::string> fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::istringstream in(csv::row(fields));
  auto back = csv::read_row(in);
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, fields);
  EXPECT_FALSE(csv::read_row(in));
}

TEST(Csv, DoublesRoundTripExactly) {
  for (double v : {0.0, 12.5, 1.0 / 3.0, 6.02214076e23, 5e-324, 0.1}) {
    EXPECT_EQ(csv::parse_double(csv::format_double(v)), v);
  }
  EXPECT_THROW(csv::parse_double("1.0x"), std::invalid_argument);
}
