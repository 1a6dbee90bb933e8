#pragma once

// Author gender from first-name lexicons and declared pronouns, and the
// male-vs-female term comparison within one country.

#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wata/csv.hpp"
#include "wata/termstats.hpp"
#include "wata/text.hpp"

namespace wata {

enum class Gender { kMale, kFemale, kNonbinary, kUnknown };
enum class GenderBasis { kName, kPronouns, kNone };

inline std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::kMale: return "male";
    case Gender::kFemale: return "female";
    case Gender::kNonbinary: return "nonbinary";
    case Gender::kUnknown: break;
  }
  return "unknown";
}

inline std::string_view to_string(GenderBasis b) {
  switch (b) {
    case GenderBasis::kName: return "name";
    case GenderBasis::kPronouns: return "pronouns";
    case GenderBasis::kNone: break;
  }
  return "none";
}

inline constexpr double kMinGenderProportion = 0.9;

class GenderLexicon {
 public:
  struct Entry {
    Gender gender;
    double proportion;
  };

  /// Adds a name. Entries below the 0.9 threshold are refused (returns false);
  /// a repeated name is an error.
  bool add(std::string_view name, Gender gender, double proportion) {
    if (gender != Gender::kMale && gender != Gender::kFemale)
      throw std::invalid_argument("gender lexicon: only male/female entries are allowed");
    if (!(proportion >= 0.0 && proportion <= 1.0))
      throw std::invalid_argument("gender lexicon: proportion outside [0,1] for " + std::string(name));
    const std::string key = text::casefold(text::trim(name));
    if (key.empty()) throw std::invalid_argument("gender lexicon: empty name");
    if (entries_.count(key) || refused_.count(key))
      throw std::invalid_argument("gender lexicon: duplicate name '" + key + "'");
    if (proportion < kMinGenderProportion) {
      refused_.insert({key, Entry{gender, proportion}});
      return false;
    }
    entries_.insert({key, Entry{gender, proportion}});
    return true;
  }

  void remove(std::string_view name) { entries_.erase(text::casefold(name)); }

  std::optional<Entry> lookup(std::string_view folded_name) const {
    auto it = entries_.find(std::string(folded_name));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  std::size_t below_threshold() const { return refused_.size(); }

 private:
  std::unordered_map<std::string, Entry> entries_;
  std::unordered_map<std::string, Entry> refused_;
};

/// Reads `name,gender,proportion` rows (optional header, '#' comments).
inline GenderLexicon load_gender_lexicon(std::istream& in) {
  GenderLexicon lex;
  std::size_t line_no = 0;
  while (auto f = csv::read_row(in)) {
    ++line_no;
    if (f->size() == 1 && text::trim((*f)[0]).empty()) continue;
    if (text::trim((*f)[0]).starts_with("#")) continue;
    if (f->size() != 3)
      throw std::invalid_argument("gender lexicon line " + std::to_string(line_no) + ": expected name,gender,proportion");
    const auto g = text::ascii_lower(text::trim((*f)[1]));
    if (line_no == 1 && text::ascii_lower(text::trim((*f)[0])) == "name" && g == "gender") continue;
    Gender gender;
    if (g == "male" || g == "m") {
      gender = Gender::kMale;
    } else if (g == "female" || g == "f") {
      gender = Gender::kFemale;
    } else {
      throw std::invalid_argument("gender lexicon line " + std::to_string(line_no) + ": unknown gender '" + g + "'");
    }
    double proportion;
    try {
      proportion = csv::parse_double(text::trim((*f)[2]));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("gender lexicon line " + std::to_string(line_no) + ": bad proportion");
    }
    lex.add((*f)[0], gender, proportion);
  }
  return lex;
}

inline GenderLexicon load_gender_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("gender lexicon: cannot open " + path);
  return load_gender_lexicon(in);
}

struct GenderAssignment {
  std::string author_id;
  Gender gender = Gender::kUnknown;
  GenderBasis basis = GenderBasis::kNone;
};

inline bool declares_they_them(std::string_view bio) {
  static const std::regex pattern(R"((^|[^a-z])they\s*/\s*them($|[^a-z]))", std::regex::icase);
  return std::regex_search(bio.begin(), bio.end(), pattern);
}

/// First whitespace-delimited token of the display name, case-folded, with
/// leading and trailing non-letters removed.
inline std::string first_name(std::string_view display_name) {
  const auto tokens = text::split_whitespace(display_name);
  if (tokens.empty()) return {};
  std::u32string s = text::to_u32(text::casefold(tokens.front()));
  std::size_t lo = 0, hi = s.size();
  while (lo < hi && !text::is_word_char(s[lo])) ++lo;
  while (hi > lo && !text::is_word_char(s[hi - 1])) --hi;
  return text::to_utf8(s.substr(lo, hi - lo));
}

/// Declared they/them pronouns take precedence over the name lookup.
inline GenderAssignment infer_gender(std::string_view display_name, std::string_view bio, const GenderLexicon& lex) {
  GenderAssignment out;
  if (declares_they_them(bio)) {
    out.gender = Gender::kNonbinary;
    out.basis = GenderBasis::kPronouns;
    return out;
  }
  if (auto entry = lex.lookup(first_name(display_name))) {
    out.gender = entry->gender;
    out.basis = GenderBasis::kName;
  }
  return out;
}

struct GenderedTerms {
  std::vector<TermScore> male;
  std::vector<TermScore> female;
  std::size_t male_tweets = 0;
  std::size_t female_tweets = 0;
  std::size_t nonbinary_tweets = 0;
  std::size_t unknown_tweets = 0;
};

inline constexpr std::string_view kMaleLabel = "male";
inline constexpr std::string_view kFemaleLabel = "female";

/// Within `country`, compares male-authored with female-authored documents in
/// both directions. `gender_of` maps a document's external id to its author's gender.
inline GenderedTerms gendered_terms(std::string_view country, const TermIndex& index,
                                    const std::function<Gender(std::size_t external_id)>& gender_of,
                                    const RankOptions& opts) {
  GenderedTerms out;
  const TermIndex split = index.relabel([&](std::size_t doc) -> std::optional<std::string> {
    if (index.label_of(doc) != country) return std::nullopt;
    switch (gender_of(index.external_id(doc))) {
      case Gender::kMale: ++out.male_tweets; return std::string(kMaleLabel);
      case Gender::kFemale: ++out.female_tweets; return std::string(kFemaleLabel);
      case Gender::kNonbinary: ++out.nonbinary_tweets; return std::nullopt;
      case Gender::kUnknown: ++out.unknown_tweets; return std::nullopt;
    }
    return std::nullopt;
  });
  if (out.male_tweets == 0 || out.female_tweets == 0) return out;
  const std::vector<std::string> male{std::string(kMaleLabel)}, female{std::string(kFemaleLabel)};
  out.male = rank_terms(kMaleLabel, female, split, opts);
  out.female = rank_terms(kFemaleLabel, male, split, opts);
  return out;
}

inline void write_gendered_terms(std::ostream& out, const GenderedTerms& terms) {
  std::vector<std::string> header{"direction"};
  for (const auto& h : term_list_header()) header.push_back(h);
  out << csv::row(header);
  for (const auto* list : {&terms.male, &terms.female}) {
    for (const auto& s : *list) {
      std::vector<std::string> f{s.partition};
      for (auto& x : term_list_fields(s)) f.push_back(std::move(x));
      out << csv::row(f);
    }
  }
}

inline GenderedTerms read_gendered_terms(std::istream& in) {
  GenderedTerms out;
  auto header = csv::read_row(in);
  if (!header || header->empty() || (*header)[0] != "direction") throw std::invalid_argument("gender terms: bad header");
  while (auto row = csv::read_row(in)) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    auto s = parse_term_fields(*row, 1, (*row)[0]);
    if (s.partition == kMaleLabel) {
      out.male.push_back(std::move(s));
    } else if (s.partition == kFemaleLabel) {
      out.female.push_back(std::move(s));
    } else {
      throw std::invalid_argument("gender terms: unknown direction '" + s.partition + "'");
    }
  }
  return out;
}

}  // namespace wata
