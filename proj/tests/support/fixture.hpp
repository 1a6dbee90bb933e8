#pragma once

// A small end-to-end tweet archive: eight countries plus undeclared
// locations, country-skewed planted terms, a female-skewed planted term, and
// the kinds of noise the filters are meant to remove.

#include <ostream>
#include <string>
#include <vector>

#include "support/synthetic.hpp"

namespace wata::synth {

struct CountryProfile {
  std::string code;
  std::vector<std::string> locations;
  double weight;
};

inline const std::vector<CountryProfile>& fixture_countries() {
  static const std::vector<CountryProfile> c{
      {"US", {"New York", "Chicago, IL", "USA", "Seattle WA", "Austin, Texas"}, 0.20},
      {"GB", {"Manchester", "London, England", "UK", "Glasgow, Scotland", "Leeds"}, 0.12},
      {"CA", {"Toronto", "Vancouver, BC", "Canada", "London, Ontario, Canada"}, 0.08},
      {"IN", {"Mumbai", "New Delhi, India", "Bengaluru", "India"}, 0.08},
      {"AU", {"Sydney", "Melbourne, Victoria", "Australia", "New South Wales"}, 0.07},
      {"ZA", {"Cape Town", "Johannesburg, South Africa", "Durban"}, 0.06},
      {"IE", {"Dublin", "Cork, Ireland", "Galway"}, 0.05},
      {"NG", {"Lagos", "Abuja, Nigeria", "Port Harcourt"}, 0.05},
      {"none", {"", "Earth", "London", "somewhere", "she/her", "Birmingham", "Perth"}, 0.29},
  };
  return c;
}

struct FixtureOptions {
  std::size_t tweets = 5000;
  std::uint64_t seed = 2021;
  double planted_rate = 0.3;
  double planted_background = 0.01;
  double female_term_rate = 0.25;
  double male_term_rate = 0.02;
};

inline std::string fixture_planted_term(const std::string& code) { return "local" + text::ascii_lower(code) + "term"; }
inline constexpr const char* kFixtureFemaleTerm = "femplanted";

/// Writes newline-delimited JSON. Roughly 5% of lines are noise that ingest
/// or the filters must drop.
inline void write_fixture(std::ostream& out, const FixtureOptions& opt = {}) {
  rng::Engine eng(opt.seed);
  const Vocabulary vocab(1500);
  const auto& countries = fixture_countries();
  const std::vector<std::string> female{"Mary", "Sarah", "Emma", "Olivia"}, male{"James", "John", "David", "Michael"},
      other{"Xq7", "Alex", "Dr", "Sunny", "VaxFacts"};
  const std::vector<std::string> queries{"vaccine", "vaccinated", "#CovidVaccine", "vaccination", "#COVIDVaccination"};
  const auto from = at(2020, 12, 5, 0), to = at(2021, 3, 21, 0);

  struct Author {
    std::string id, location, name, bio, country;
    int gender;  // 0 female, 1 male, 2 other
  };
  std::vector<Author> authors;
  const std::size_t n_authors = opt.tweets * 2 / 3;
  for (std::size_t i = 0; i < n_authors; ++i) {
    double u = rng::uniform_unit(eng);
    std::size_t ci = 0;
    while (ci + 1 < countries.size() && u >= countries[ci].weight) u -= countries[ci++].weight;
    const auto& c = countries[ci];
    Author a;
    a.id = "a" + std::to_string(i);
    a.country = c.code;
    a.location = c.locations[rng::uniform_below(eng, c.locations.size())];
    a.gender = static_cast<int>(rng::uniform_below(eng, 5)) % 3;
    const auto& pool = a.gender == 0 ? female : a.gender == 1 ? male : other;
    a.name = pool[rng::uniform_below(eng, pool.size())] + " " + "Surname" + std::to_string(i % 97);
    a.bio = chance(eng, 0.04) ? "she/her they/them | nurse" : "vaccine fan";
    authors.push_back(std::move(a));
  }

  std::string last_text;
  for (std::size_t i = 0; i < opt.tweets; ++i) {
    const auto& a = authors[rng::uniform_below(eng, authors.size())];
    std::string text = filler(eng, vocab, 4) + " " + queries[rng::uniform_below(eng, queries.size())] + " " +
                       filler(eng, vocab, 7);
    for (const auto& c : countries) {
      if (c.code == "none") continue;
      if (chance(eng, c.code == a.country ? opt.planted_rate : opt.planted_background))
        text += " " + fixture_planted_term(c.code);
    }
    if (a.gender < 2 && chance(eng, a.gender == 0 ? opt.female_term_rate : opt.male_term_rate))
      text += std::string(" ") + kFixtureFemaleTerm;
    std::string lang = chance(eng, 0.5) ? "en" : "en-GB";
    auto ts = random_time(eng, from, to);

    const auto noise = rng::uniform_below(eng, 100);
    if (noise == 0) {
      out << "{\"id\": \"broken" << i << "\", \"text\": \n";
      continue;
    }
    if (noise == 1) lang = "es";
    if (noise == 2) text = filler(eng, vocab, 10);  // no query term
    if (noise == 3 && !last_text.empty()) text = last_text + " #repost";
    if (noise == 4) ts = at(2020, 11, 20);

    TweetRecord r;
    r.tweet_id = std::to_string(1000000 + i);
    r.text = text;
    r.author_id = a.id;
    r.author_location = a.location;
    r.author_bio = a.bio;
    r.timestamp = ts;
    r.language = lang;
    r.author_name = a.name;
    out << serialize(r) << '\n';
    last_text = text;
  }
}

}  // namespace wata::synth
