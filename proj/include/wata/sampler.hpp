#pragma once

// Reproducible samples of tweets containing a term, for reading terms in context.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "wata/ingest.hpp"
#include "wata/random.hpp"
#include "wata/termstats.hpp"

namespace wata {

inline constexpr std::size_t kDefaultSampleSize = 20;

struct SampleRequest {
  std::string term;
  std::string partition;
  std::size_t n = kDefaultSampleSize;
  std::uint64_t seed = 0;
};

/// Uniform sample without replacement of min(n, matches) records from the
/// partition whose term set contains the term, ordered by timestamp then id.
/// `store[external_id]` must hold the record each index document was built from.
inline std::vector<TweetRecord> sample_tweets(const SampleRequest& req, const TermIndex& index,
                                              const std::vector<TweetRecord>& store) {
  if (req.n == 0) throw std::invalid_argument("sample_tweets: n must be at least 1");
  if (!index.has_partition(req.partition))
    throw std::out_of_range("sample_tweets: unknown partition '" + req.partition + "'");
  std::vector<TweetRecord> out;
  const auto id = index.id_of(req.term);
  if (!id) return out;

  std::vector<std::size_t> pool;
  for (std::size_t doc : index.documents_in(req.partition))
    if (index.contains(doc, *id)) pool.push_back(doc);

  const std::size_t take = std::min(req.n, pool.size());
  rng::Engine eng(rng::derive(req.seed, req.partition + '\x1f' + req.term));
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng::uniform_below(eng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  for (std::size_t i = 0; i < take; ++i) out.push_back(store.at(index.external_id(pool[i])));
  std::sort(out.begin(), out.end(), [](const TweetRecord& a, const TweetRecord& b) {
    return std::tie(a.timestamp, a.tweet_id) < std::tie(b.timestamp, b.tweet_id);
  });
  return out;
}

}  // namespace wata
