#pragma once

// Country assignment from free-text profile locations using a gazetteer of
// country names and large cities that belong to a single country.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "wata/csv.hpp"
#include "wata/ingest.hpp"
#include "wata/text.hpp"

namespace wata {

/// Label of the partition holding tweets whose author declared no recognised location.
inline constexpr std::string_view kUnassigned = "none";

namespace geo_detail {

inline bool is_segment_break(char32_t c) {
  return c == ',' || c == ';' || c == '/' || c == '|' || c == '(' || c == ')' || c == '\n' || c == 0xB7 ||
         c == 0x2022;
}

}  // namespace geo_detail

/// Splits a place string into comma-like segments of case-folded words.
/// Periods vanish ("U.K." -> "uk"); hyphens and apostrophes stay inside words.
inline std::vector<std::vector<std::string>> place_segments(std::string_view raw) {
  std::vector<std::vector<std::string>> segments(1);
  std::u32string word;
  const auto flush_word = [&] {
    if (!word.empty()) segments.back().push_back(text::to_utf8(word));
    word.clear();
  };
  for (std::size_t pos = 0; pos < raw.size();) {
    const char32_t c = text::fold_char(text::decode_utf8(raw, pos));
    if (c == '.') continue;
    if (text::is_word_char(c) || ((c == '-' || text::is_apostrophe(c)) && !word.empty())) {
      word.push_back(c == 0x2019 ? U'\'' : c);
    } else if (geo_detail::is_segment_break(c)) {
      flush_word();
      if (!segments.back().empty()) segments.emplace_back();
    } else {
      flush_word();
    }
  }
  flush_word();
  if (segments.back().empty()) segments.pop_back();
  return segments;
}

inline std::string normalize_place(std::string_view name) {
  std::vector<std::string> words;
  for (auto& seg : place_segments(name))
    for (auto& w : seg) words.push_back(std::move(w));
  return text::join(words, " ");
}

enum class PlaceKind { kCountry, kCity };

struct Gazetteer {
  std::unordered_map<std::string, std::string> country_names;
  std::unordered_map<std::string, std::string> city_names;
  std::size_t max_phrase_words = 0;
  std::vector<std::string> warnings;

  bool empty() const { return country_names.empty() && city_names.empty(); }

  void add(std::string_view name, std::string_view iso2, PlaceKind kind) {
    const std::string key = normalize_place(name);
    if (key.empty()) throw std::invalid_argument("gazetteer: empty place name");
    std::string code(text::trim(iso2));
    if (code.size() != 2 || !std::isalpha(static_cast<unsigned char>(code[0])) ||
        !std::isalpha(static_cast<unsigned char>(code[1])))
      throw std::invalid_argument("gazetteer: bad country code '" + code + "' for " + key);
    for (char& ch : code) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    auto& table = kind == PlaceKind::kCountry ? country_names : city_names;
    auto [it, inserted] = table.try_emplace(key, code);
    if (!inserted && it->second != code) {
      throw std::invalid_argument(std::string("gazetteer: ") + (kind == PlaceKind::kCity ? "city" : "country") +
                                  " '" + key + "' maps to both " + it->second + " and " + code);
    }
    max_phrase_words = std::max(max_phrase_words, text::split_whitespace(key).size());
  }
};

/// Reads `name,ISO2[,kind]` lines; kind defaults to city. Blank lines, '#'
/// comments and a `name,iso2,kind` header are skipped. A city listed under two countries is
/// rejected with an error naming it.
inline Gazetteer load_gazetteer(std::istream& in) {
  Gazetteer g;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (auto fields = csv::read_row(in)) {
    ++line_no;
    if (fields->size() == 1 && text::trim((*fields)[0]).empty()) continue;
    if (!fields->empty() && text::trim((*fields)[0]).starts_with("#")) continue;
    if (fields->size() != 2 && fields->size() != 3)
      throw std::invalid_argument("gazetteer line " + std::to_string(line_no) + ": expected name,ISO2[,kind]");
    const auto kind = fields->size() == 3 ? text::ascii_lower(text::trim((*fields)[2])) : std::string("city");
    const bool header = !seen_data && text::ascii_lower(text::trim((*fields)[0])) == "name";
    seen_data = true;
    if (header) continue;
    PlaceKind k;
    if (kind == "country") {
      k = PlaceKind::kCountry;
    } else if (kind == "city") {
      k = PlaceKind::kCity;
    } else {
      throw std::invalid_argument("gazetteer line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
    }
    g.add((*fields)[0], (*fields)[1], k);
  }
  if (g.empty()) g.warnings.push_back("gazetteer is empty; every location will be unassigned");
  return g;
}

inline Gazetteer load_gazetteer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("gazetteer: cannot open " + path);
  return load_gazetteer(in);
}

struct CountryAssignment {
  std::string author_id;
  std::optional<std::string> country;
  std::optional<std::string> matched_token;

  std::string label() const { return country.value_or(std::string(kUnassigned)); }
};

/// Scans phrases left to right, preferring the longest gazetteer phrase at each
/// position. A match directly preceded by "new" is discarded, so "New England"
/// or "New Mexico" do not fire unless listed as phrases themselves. Country
/// matches win over city matches; the first of the winning kind is used.
inline CountryAssignment assign_country(std::string_view location, const Gazetteer& g) {
  CountryAssignment out;
  std::optional<std::pair<std::string, std::string>> first_country, first_city;
  for (const auto& words : place_segments(location)) {
    std::size_t i = 0;
    while (i < words.size()) {
      bool matched = false;
      const std::size_t longest = std::min(g.max_phrase_words, words.size() - i);
      for (std::size_t n = longest; n >= 1 && !matched; --n) {
        std::string phrase = words[i];
        for (std::size_t k = 1; k < n; ++k) phrase += " " + words[i + k];
        const auto country = g.country_names.find(phrase);
        const auto city = g.city_names.find(phrase);
        if (country == g.country_names.end() && city == g.city_names.end()) continue;
        matched = true;
        const bool blocked = i > 0 && words[i - 1] == "new";
        if (!blocked) {
          if (country != g.country_names.end() && !first_country) first_country.emplace(phrase, country->second);
          if (city != g.city_names.end() && !first_city) first_city.emplace(phrase, city->second);
        }
        i += n;
      }
      if (!matched) ++i;
    }
  }
  const auto& winner = first_country ? first_country : first_city;
  if (winner) {
    out.matched_token = winner->first;
    out.country = winner->second;
  }
  return out;
}

/// One assignment per author, taken from the location on the author's latest
/// record (ties: largest tweet_id). Keyed and ordered by author_id.
inline std::map<std::string, CountryAssignment> assign_authors(const std::vector<TweetRecord>& records,
                                                                const Gazetteer& g) {
  std::map<std::string, const TweetRecord*> latest;
  for (const auto& r : records) {
    auto [it, inserted] = latest.try_emplace(r.author_id, &r);
    if (!inserted && std::tie(r.timestamp, r.tweet_id) > std::tie(it->second->timestamp, it->second->tweet_id))
      it->second = &r;
  }
  std::map<std::string, CountryAssignment> out;
  for (const auto& [author, rec] : latest) {
    auto a = assign_country(rec->author_location, g);
    a.author_id = author;
    out.emplace(author, std::move(a));
  }
  return out;
}

struct CountryShare {
  std::string label;
  std::size_t count = 0;
  double percent = 0;
};

/// Percentage of `total` held by each row, in the given order.
inline std::vector<CountryShare> country_shares(const std::vector<std::pair<std::string, std::size_t>>& counts,
                                                std::size_t total) {
  if (total == 0) throw std::invalid_argument("country_shares: total is zero");
  std::vector<CountryShare> out;
  for (const auto& [label, n] : counts) {
    if (n > total) throw std::invalid_argument("country_shares: count exceeds total for " + label);
    out.push_back({label, n, 100.0 * static_cast<double>(n) / static_cast<double>(total)});
  }
  return out;
}

/// Rounds a percentage to one decimal place, as printed in tables.
inline std::string format_percent(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", std::round(pct * 10.0) / 10.0);
  return buf;
}

}  // namespace wata
