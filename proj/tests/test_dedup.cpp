#include <gtest/gtest.h>

#include <map>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>

#include "support/synthetic.hpp"
#include "wata/dedup.hpp"

using namespace wata;
using synth::at;
using synth::tweet;

TEST(Dedup, NormalizeExamples) {
  EXPECT_EQ(normalize_for_dedup("Vaccine NOW! #covid @who").normalized_text, "vaccine now!");
  EXPECT_EQ(normalize_for_dedup("Vaccine now!").normalized_text,
            normalize_for_dedup("vaccine   now! #uk").normalized_text);
  EXPECT_EQ(normalize_for_dedup("#covid @who").normalized_text, "");
  EXPECT_EQ(normalize_for_dedup("Vaccine NOW", {.strict = true}).normalized_text, "Vaccine NOW");
}

TEST(Dedup, RemoveExamples) {
  const auto t = at(2021, 1, 1);
  std::vector<TweetRecord> same{tweet("1", "same text", "a", t), tweet("2", "same text", "b", t + std::chrono::seconds(1))};
  auto out = remove_duplicates(same);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].tweet_id, "1");

  std::vector<TweetRecord> near{tweet("1", "great vaccine news #nhs @bbc", "a", t + std::chrono::seconds(5)),
                                tweet("2", "great vaccine news", "b", t)};
  out = remove_duplicates(near);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].tweet_id, "2");

  std::vector<TweetRecord> distinct;
  for (int i = 0; i < 10; ++i) distinct.push_back(tweet(std::to_string(i), "text " + std::to_string(i), "a", t));
  EXPECT_EQ(remove_duplicates(distinct).size(), 10u);
  EXPECT_TRUE(remove_duplicates({}).empty());
}

TEST(Dedup, EmptyKeysShareOneSurvivor) {
  const auto t = at(2021, 1, 1);
  auto out = remove_duplicates({tweet("1", "#a", "x", t), tweet("2", "@b #c", "y", t), tweet("3", "real", "z", t)});
  EXPECT_EQ(out.size(), 2u);
}

TEST(Limit, OnePerMonth) {
  std::vector<TweetRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(tweet(std::to_string(i), "t" + std::to_string(i), "u", at(2021, 1, 3 + i)));
  auto a = limit_user_monthly(recs, 42), b = limit_user_monthly(recs, 42);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a, b);
}

TEST(Limit, OneInEachMonthKeepsFour) {
  std::vector<TweetRecord> recs{tweet("1", "a", "u", at(2020, 12, 20)), tweet("2", "b", "u", at(2021, 1, 20)),
                                tweet("3", "c", "u", at(2021, 2, 20)), tweet("4", "d", "u", at(2021, 3, 20))};
  EXPECT_EQ(limit_user_monthly(recs, 1).size(), 4u);
  EXPECT_TRUE(limit_user_monthly({}, 1).empty());
}

TEST(Limit, MonthBoundaryIsUtc) {
  std::vector<TweetRecord> recs{tweet("1", "a", "u", at(2021, 1, 31, 23, 59, 59)), tweet("2", "b", "u", at(2021, 2, 1, 0))};
  EXPECT_EQ(limit_user_monthly(recs, 9).size(), 2u);
}

TEST(Limit, SurvivorIsUniform) {
  constexpr int k = 5, trials = 10000;
  std::vector<TweetRecord> recs;
  for (int i = 0; i < k; ++i) recs.push_back(tweet(std::to_string(i), "t" + std::to_string(i), "u", at(2021, 1, 2 + i)));
  std::map<std::string, int> wins;
  for (int seed = 0; seed < trials; ++seed) {
    auto out = limit_user_monthly(recs, static_cast<std::uint64_t>(seed));
    ASSERT_EQ(out.size(), 1u);
    ++wins[out[0].tweet_id];
  }
  double stat = 0;
  const double expected = static_cast<double>(trials) / k;
  for (int i = 0; i < k; ++i) {
    const double o = wins[std::to_string(i)];
    stat += (o - expected) * (o - expected) / expected;
  }
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(k - 1), stat));
  EXPECT_GT(p, 0.01) << "chi2=" << stat;
}

TEST(FilterProperties, IdempotentAndSubset) {
  const auto fx = synth::filter_fixture(17, 3000);
  const auto d1 = remove_duplicates(fx.records);
  EXPECT_EQ(remove_duplicates(d1), d1);
  const auto l1 = limit_user_monthly(d1, 5);
  EXPECT_EQ(limit_user_monthly(l1, 5), l1);
  EXPECT_LE(d1.size(), fx.records.size());
  EXPECT_LE(l1.size(), d1.size());
  std::set<std::string> input_ids;
  for (const auto& r : fx.records) input_ids.insert(serialize(r));
  for (const auto& r : l1) EXPECT_TRUE(input_ids.count(serialize(r)));
  std::set<std::pair<std::string, MonthBucket>> seen;
  for (const auto& r : l1) EXPECT_TRUE(seen.insert({r.author_id, month_bucket(r)}).second);
}
