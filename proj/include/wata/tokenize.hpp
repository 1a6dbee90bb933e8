#pragma once

// Tweet tokenization. Tokens are case-folded maximal runs of letters, digits
// and internal apostrophes, optionally carrying a single leading '#' or '@'.
// URLs are stripped first.

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "wata/text.hpp"

namespace wata {

/// Removes URLs: everything from an http://, https:// or www. marker to the
/// end of the whitespace-delimited piece containing it.
inline std::string strip_urls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto rest = s.substr(i);
    const bool at_piece_start = i == 0 || text::is_space(static_cast<unsigned char>(s[i - 1]));
    const bool marker = text::starts_with_icase(rest, "http://") || text::starts_with_icase(rest, "https://") ||
                        (text::starts_with_icase(rest, "www.") && (at_piece_start || !std::isalnum(static_cast<unsigned char>(s[i - 1]))));
    if (marker) {
      while (i < s.size() && !text::is_space(static_cast<unsigned char>(s[i]))) ++i;
      out.push_back(' ');
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

/// Tokens in text order, duplicates retained.
inline std::vector<std::string> tokenize_sequence(std::string_view raw) {
  const std::u32string s = text::to_u32(strip_urls(raw));
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    char32_t prefix = 0;
    std::size_t start = i;
    if ((s[i] == '#' || s[i] == '@') && i + 1 < n && text::is_word_char(s[i + 1]) &&
        (i == 0 || !text::is_word_char(s[i - 1]))) {
      prefix = s[i];
      start = i + 1;
    } else if (!text::is_word_char(s[i])) {
      ++i;
      continue;
    }
    std::size_t end = start;
    while (end < n) {
      if (text::is_word_char(s[end])) {
        ++end;
      } else if (text::is_apostrophe(s[end]) && end > start && end + 1 < n && text::is_word_char(s[end + 1])) {
        ++end;
      } else {
        break;
      }
    }
    std::u32string token;
    if (prefix) token.push_back(prefix);
    for (std::size_t k = start; k < end; ++k) token.push_back(s[k] == 0x2019 ? U'\'' : text::fold_char(s[k]));
    tokens.push_back(text::to_utf8(token));
    i = end;
  }
  return tokens;
}

/// Presence semantics: each distinct term once, sorted.
inline std::vector<std::string> tokenize(std::string_view text) {
  auto tokens = tokenize_sequence(text);
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

}  // namespace wata
