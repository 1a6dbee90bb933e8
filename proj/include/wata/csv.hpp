#pragma once

// Minimal RFC 4180 reading/writing plus shortest round-trip number formatting.

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace wata::csv {

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  out.push_back('\n');
  return out;
}

/// Reads one record, which may span physical lines inside quotes.
/// Returns nullopt at end of input.
inline std::optional<std::vector<std::string>> read_row(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (;;) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cur.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          cur.push_back(c);
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(cur));
        cur.clear();
      } else if (c != '\r' || i + 1 != line.size()) {
        cur.push_back(c);
      }
    }
    if (!quoted) break;
    if (!std::getline(in, line)) throw std::runtime_error("csv: unterminated quoted field");
    cur.push_back('\n');
  }
  fields.push_back(std::move(cur));
  return fields;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("csv: not a number: " + std::string(s));
  return v;
}

inline std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::invalid_argument("csv: not an integer: " + std::string(s));
  return v;
}

}  // namespace wata::csv
