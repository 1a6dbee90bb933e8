#pragma once

// Duplicate and near-duplicate removal, and the one tweet per author per
// calendar month limit.

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "wata/ingest.hpp"
#include "wata/random.hpp"
#include "wata/text.hpp"

namespace wata {

struct DedupOptions {
  // Strict mode keeps the original letter case in the key.
  bool strict = false;
};

/// Key under which two tweets count as duplicates: hashtag and @username
/// tokens removed, whitespace collapsed, case folded unless strict.
struct DedupKey {
  std::string normalized_text;
  friend bool operator==(const DedupKey&, const DedupKey&) = default;
};

inline DedupKey normalize_for_dedup(std::string_view text, DedupOptions opts = {}) {
  std::vector<std::string> kept;
  for (auto& token : text::split_whitespace(text)) {
    if (token.front() == '#' || token.front() == '@') continue;
    kept.push_back(opts.strict ? std::move(token) : text::casefold(token));
  }
  return {text::join(kept, " ")};
}

/// Keeps, for every distinct key, the earliest record (ties: smallest tweet_id).
/// Survivors are returned in input order.
inline std::vector<TweetRecord> remove_duplicates(const std::vector<TweetRecord>& records, DedupOptions opts = {}) {
  std::unordered_map<std::string, std::size_t> winner;
  winner.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto key = normalize_for_dedup(records[i].text, opts).normalized_text;
    auto [it, inserted] = winner.try_emplace(std::move(key), i);
    if (inserted) continue;
    const auto& cur = records[it->second];
    const auto& cand = records[i];
    if (std::tie(cand.timestamp, cand.tweet_id) < std::tie(cur.timestamp, cur.tweet_id)) it->second = i;
  }
  std::vector<char> keep(records.size(), 0);
  for (const auto& [_, idx] : winner) keep[idx] = 1;
  std::vector<TweetRecord> out;
  out.reserve(winner.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

struct MonthBucket {
  std::string author_id;
  std::chrono::year_month year_month;

  auto operator<=>(const MonthBucket& o) const {
    if (auto c = author_id <=> o.author_id; c != 0) return c;
    if (auto c = static_cast<int>(year_month.year()) <=> static_cast<int>(o.year_month.year()); c != 0) return c;
    return static_cast<unsigned>(year_month.month()) <=> static_cast<unsigned>(o.year_month.month());
  }
  bool operator==(const MonthBucket&) const = default;
};

inline MonthBucket month_bucket(const TweetRecord& r) {
  const std::chrono::year_month_day ymd{std::chrono::floor<std::chrono::days>(r.timestamp)};
  return {r.author_id, ymd.year() / ymd.month()};
}

/// Keeps one uniformly chosen record per (author, UTC calendar month).
/// The draw for a bucket depends only on the seed, the bucket and its members,
/// so it is stable under input reordering and unrelated records.
inline std::vector<TweetRecord> limit_user_monthly(const std::vector<TweetRecord>& records, std::uint64_t seed) {
  std::map<MonthBucket, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < records.size(); ++i) buckets[month_bucket(records[i])].push_back(i);

  std::vector<char> keep(records.size(), 0);
  for (auto& [bucket, members] : buckets) {
    if (members.size() == 1) {
      keep[members.front()] = 1;
      continue;
    }
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(records[a].timestamp, records[a].tweet_id) < std::tie(records[b].timestamp, records[b].tweet_id);
    });
    const std::string key = bucket.author_id + '\x1f' + std::to_string(static_cast<int>(bucket.year_month.year())) +
                            '-' + std::to_string(static_cast<unsigned>(bucket.year_month.month()));
    rng::Engine eng(rng::derive(seed, key));
    keep[members[rng::uniform_below(eng, members.size())]] = 1;
  }
  std::vector<TweetRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

}  // namespace wata
