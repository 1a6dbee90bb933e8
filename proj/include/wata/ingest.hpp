#pragma once

// Archived tweet ingestion: newline-delimited JSON records, keyword queries
// and language filtering.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wata/text.hpp"
#include "wata/tokenize.hpp"

namespace wata {

using Timestamp = std::chrono::sys_seconds;

struct TweetRecord {
  std::string tweet_id;
  std::string text;
  std::string author_id;
  std::string author_location;
  std::string author_bio;
  Timestamp timestamp{};
  std::string language;
  // Display name of the author; only needed for gender inference.
  std::string author_name;

  friend bool operator==(const TweetRecord&, const TweetRecord&) = default;
};

/// Parses `YYYY-MM-DDTHH:MM:SS[.fff](Z|+00:00)`. Returns nullopt on any defect,
/// including out-of-range calendar fields or a non-UTC offset.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  using namespace std::chrono;
  const auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':')
    return std::nullopt;
  const auto y = digits(0, 4), mo = digits(5, 2), d = digits(8, 2);
  const auto h = digits(11, 2), mi = digits(14, 2), se = digits(17, 2);
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
  }
  const std::string_view zone = s.substr(pos);
  if (zone != "Z" && zone != "+00:00" && zone != "+0000") return std::nullopt;
  const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *se > 59) return std::nullopt;
  return sys_days{ymd} + hours{*h} + minutes{*mi} + seconds{*se};
}

inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

inline nlohmann::ordered_json to_json(const TweetRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.tweet_id;
  j["text"] = r.text;
  j["author_id"] = r.author_id;
  j["author_location"] = r.author_location;
  j["author_bio"] = r.author_bio;
  j["created_at"] = format_timestamp(r.timestamp);
  j["lang"] = r.language;
  if (!r.author_name.empty()) j["author_name"] = r.author_name;
  return j;
}

inline std::string serialize(const TweetRecord& r) { return to_json(r).dump(); }

/// Per-reason counts of skipped input lines. Merge is associative and commutative.
struct IngestErrorReport {
  std::map<std::string, std::size_t> reasons;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [_, c] : reasons) n += c;
    return n;
  }
  bool empty() const { return reasons.empty(); }
  void add(const std::string& reason, std::size_t n = 1) { reasons[reason] += n; }
  void merge(const IngestErrorReport& other) {
    for (const auto& [k, c] : other.reasons) reasons[k] += c;
  }
  std::string to_text() const {
    std::string out;
    for (const auto& [k, c] : reasons) out += k + ": " + std::to_string(c) + "\n";
    return out;
  }
};

struct ParseError {
  std::string reason;
};

/// Parses one line. On failure returns the skip reason instead of a record.
inline std::variant<TweetRecord, ParseError> parse_tweet_line(std::string_view line) {
  if (text::trim(line).empty()) return ParseError{"blank_line"};
  nlohmann::json j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return ParseError{"bad_json"};

  const auto required = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };
  const auto optional = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::string{};
    if (!it->is_string()) return std::nullopt;
    return it->get<std::string>();
  };

  TweetRecord r;
  for (auto [key, field] : {std::pair{"id", &r.tweet_id}, std::pair{"text", &r.text},
                            std::pair{"author_id", &r.author_id}, std::pair{"lang", &r.language}}) {
    auto v = required(key);
    if (!v) return ParseError{std::string("missing_") + key};
    *field = std::move(*v);
  }
  if (r.tweet_id.empty()) return ParseError{"missing_id"};
  for (auto [key, field] : {std::pair{"author_location", &r.author_location},
                            std::pair{"author_bio", &r.author_bio}, std::pair{"author_name", &r.author_name}}) {
    auto v = optional(key);
    if (!v) return ParseError{std::string("bad_") + key};
    *field = std::move(*v);
  }
  auto created = required("created_at");
  if (!created) return ParseError{"missing_created_at"};
  auto ts = parse_timestamp(*created);
  if (!ts) return ParseError{"bad_timestamp"};
  r.timestamp = *ts;
  return r;
}

struct CollectionWindow {
  std::chrono::sys_days from;
  std::chrono::sys_days to;  // inclusive

  bool contains(Timestamp t) const { return t >= from && t < to + std::chrono::days{1}; }
};

/// The collection period of the original study.
inline CollectionWindow default_collection_window() {
  using namespace std::chrono;
  return {sys_days{2020y / December / 5}, sys_days{2021y / March / 21}};
}

inline std::optional<std::chrono::sys_days> parse_date(std::string_view s) {
  auto ts = parse_timestamp(std::string(s) + "T00:00:00Z");
  if (!ts) return std::nullopt;
  return std::chrono::floor<std::chrono::days>(*ts);
}

struct ParsedStream {
  std::vector<TweetRecord> records;
  IngestErrorReport report;
};

/// Parses a line-oriented stream. Malformed lines, repeated tweet ids and
/// (when a window is given) out-of-window records are skipped and counted.
inline ParsedStream parse_tweet_stream(std::istream& in, std::optional<CollectionWindow> window = std::nullopt) {
  ParsedStream out;
  std::unordered_set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    auto parsed = parse_tweet_line(line);
    if (auto* err = std::get_if<ParseError>(&parsed)) {
      out.report.add(err->reason);
      continue;
    }
    auto& rec = std::get<TweetRecord>(parsed);
    if (window && !window->contains(rec.timestamp)) {
      out.report.add("outside_window");
      continue;
    }
    if (!seen.insert(rec.tweet_id).second) {
      out.report.add("duplicate_id");
      continue;
    }
    out.records.push_back(std::move(rec));
  }
  if (in.bad()) throw std::runtime_error("ingest: read failure");
  return out;
}

inline ParsedStream parse_tweet_file(const std::string& path, std::optional<CollectionWindow> window = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest: cannot open " + path);
  return parse_tweet_stream(in, window);
}

inline void write_records(std::ostream& out, const std::vector<TweetRecord>& records) {
  for (const auto& r : records) out << serialize(r) << '\n';
}

class QuerySet {
 public:
  QuerySet(std::initializer_list<std::string_view> keywords) : QuerySet(std::vector<std::string>(keywords.begin(), keywords.end())) {}

  explicit QuerySet(const std::vector<std::string>& keywords) {
    for (const auto& k : keywords) {
      std::string folded = text::casefold(text::trim(k));
      if (folded.empty()) throw std::invalid_argument("query keyword is empty");
      if (text::split_whitespace(folded).size() != 1)
        throw std::invalid_argument("query keyword must be a single token: " + folded);
      if (folded.front() == '#') folded.erase(0, 1);
      keywords_.insert(std::move(folded));
    }
    if (keywords_.empty()) throw std::invalid_argument("query set is empty");
  }

  static QuerySet vaccine_defaults() {
    return QuerySet{"vaccine", "vaccination", "vaccinating", "vaccinated", "CovidVaccination", "CovidVaccine",
                    "CovidVaccineFacts"};
  }

  const std::set<std::string>& keywords() const { return keywords_; }
  bool contains(const std::string& folded) const { return keywords_.count(folded) != 0; }

 private:
  std::set<std::string> keywords_;
};

/// Whole-token, case-insensitive match; a leading '#' on a text token is ignored.
inline bool match_query(const TweetRecord& record, const QuerySet& queries) {
  for (const auto& token : tokenize_sequence(record.text)) {
    std::string_view t = token;
    if (!t.empty() && t.front() == '#') t.remove_prefix(1);
    if (queries.contains(std::string(t))) return true;
  }
  return false;
}

inline std::string primary_subtag(std::string_view tag) {
  const auto cut = tag.find_first_of("-_");
  return text::ascii_lower(text::trim(tag.substr(0, cut)));
}

inline bool filter_language(const TweetRecord& record, std::string_view lang) {
  const auto want = primary_subtag(lang);
  return !want.empty() && primary_subtag(record.language) == want;
}

}  // namespace wata
