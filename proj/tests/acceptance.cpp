// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "support/fixture.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"
#include "wata/dedup.hpp"
#include "wata/gender.hpp"
#include "wata/geomap.hpp"
#include "wata/pipeline.hpp"
#include "wata/starter_gazetteer.hpp"
#include "wata/termstats.hpp"

using namespace wata;
namespace fs = std::filesystem;

namespace {

constexpr double kChiRelTol = 1e-9;
constexpr double kChiSeconds = 1.0;
constexpr double kP05Tol = 5e-4;
constexpr double kP01Tol = 2e-4;
constexpr double kBhSeconds = 5.0;
constexpr double kTablePpTol = 0.05;
constexpr double kPlantedSeconds = 10.0;
constexpr std::size_t kNullAllowance = 1;
constexpr int kNullSeeds = 20;
constexpr double kAlpha = 0.05;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Outcome chi_square_oracle() {
  Outcome o;
  rng::Engine eng(20210321);
  std::vector<ContingencyTable> tables;
  while (tables.size() < 1000) {
    ContingencyTable t{rng::uniform_below(eng, 20000), rng::uniform_below(eng, 200000), rng::uniform_below(eng, 20000),
                       rng::uniform_below(eng, 2000000)};
    if (t.total()) tables.push_back(t);
  }
  const auto start = Clock::now();
  std::vector<double> got;
  got.reserve(tables.size());
  for (const auto& t : tables) got.push_back(chi_square(t));
  const double elapsed = seconds_since(start);
  double worst = 0;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const double want = static_cast<double>(oracle::chi_square(tables[i]));
    const double rel = want == 0 ? std::abs(got[i]) : std::abs(got[i] - want) / want;
    worst = std::max(worst, rel);
  }
  o.check(worst <= kChiRelTol, "max relative error " + fmt(worst));
  o.check(chi_square({30, 70, 10, 90}) == 12.5, "(30,70,10,90) != 12.5");
  o.check(chi_square({10, 90, 10, 90}) == 0.0, "(10,90,10,90) != 0");
  o.check(elapsed < kChiSeconds, "took " + fmt(elapsed) + " s");
  o.detail = o.pass ? "1000 tables, max rel err " + fmt(worst) + ", " + fmt(elapsed * 1e3) + " ms" : o.detail;
  return o;
}

Outcome p_value_checks() {
  Outcome o;
  const double p05 = chi_square_p(3.841), p01 = chi_square_p(6.635);
  o.check(std::abs(p05 - 0.05) <= kP05Tol, "p(3.841)=" + fmt(p05, "%.6f"));
  o.check(std::abs(p01 - 0.01) <= kP01Tol, "p(6.635)=" + fmt(p01, "%.6f"));
  o.check(std::abs(p05 - oracle::chi_square_p(3.841)) < 1e-12, "disagrees with reference distribution at 3.841");
  double prev = 2.0;
  bool monotone = true;
  for (int i = 0; i < 1000; ++i) {
    const double p = chi_square_p(i * 0.04);
    monotone = monotone && p <= prev;
    prev = p;
  }
  o.check(monotone, "not monotone on grid");
  if (o.pass) o.detail = "p(3.841)=" + fmt(p05, "%.6f") + ", p(6.635)=" + fmt(p01, "%.6f") + ", monotone on 1000 points";
  return o;
}

Outcome bh_oracle() {
  Outcome o;
  rng::Engine eng(1995);
  std::vector<std::vector<double>> vectors;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> p(1 + rng::uniform_below(eng, 50));
    for (auto& x : p) {
      switch (rng::uniform_below(eng, 3)) {
        case 0: x = rng::uniform_unit(eng) * 0.01; break;
        case 1: x = 0.005 * static_cast<double>(rng::uniform_below(eng, 4)); break;
        default: x = rng::uniform_unit(eng);
      }
    }
    vectors.push_back(std::move(p));
  }
  const auto start = Clock::now();
  std::vector<std::vector<std::size_t>> got;
  got.reserve(vectors.size());
  for (const auto& p : vectors) got.push_back(benjamini_hochberg(p, kAlpha));
  const double elapsed = seconds_since(start);
  std::size_t mismatches = 0, not_superset = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const std::set<std::size_t> s(got[i].begin(), got[i].end());
    if (s != oracle::benjamini_hochberg(vectors[i], kAlpha)) ++mismatches;
    const auto bonf = oracle::bonferroni(vectors[i], kAlpha);
    if (!std::includes(s.begin(), s.end(), bonf.begin(), bonf.end())) ++not_superset;
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " vectors differ from brute force");
  o.check(not_superset == 0, std::to_string(not_superset) + " vectors miss a Bonferroni rejection");
  o.check(elapsed < kBhSeconds, "took " + fmt(elapsed) + " s");
  if (o.pass) o.detail = "10000 vectors (m<=50) match, superset of Bonferroni, " + fmt(elapsed * 1e3) + " ms";
  return o;
}

Outcome country_share_table() {
  Outcome o;
  const std::vector<std::tuple<std::string, std::size_t, double>> rows{
      {"none", 3080305, 53.2}, {"US", 1529220, 26.4}, {"GB", 505756, 8.7}, {"CA", 158537, 2.7},
      {"IN", 114870, 2.0},     {"AU", 50535, 0.9},    {"ZA", 45618, 0.8},  {"IE", 34036, 0.6},
      {"NG", 28690, 0.5},      {"DE", 16660, 0.3},    {"PK", 14154, 0.2}};
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (const auto& [label, n, _] : rows) counts.emplace_back(label, n);
  const auto shares = country_shares(counts, 5789082);
  double worst = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double printed = std::get<2>(rows[i]);
    const double diff = std::abs(shares[i].percent - printed);
    worst = std::max(worst, diff);
    o.check(diff <= kTablePpTol, shares[i].label + " " + fmt(shares[i].percent, "%.3f") + " vs " + fmt(printed, "%.1f"));
    o.check(format_percent(shares[i].percent) == fmt(printed, "%.1f") + "%", shares[i].label + " prints as " +
                                                                                  format_percent(shares[i].percent));
  }
  if (o.pass) o.detail = "11 rows within " + fmt(worst, "%.3f") + " pp of the printed values";
  return o;
}

Outcome filtering_invariants() {
  Outcome o;
  const auto fx = synth::filter_fixture(42, 10000);
  const auto run = [&] { return filter_records(fx.records, QuerySet::vaccine_defaults(), "en", false, 99); };
  const auto r1 = run(), r2 = run();

  std::set<std::string> deduped_ids;
  for (const auto& r : r1.deduped) deduped_ids.insert(r.tweet_id);
  std::size_t leaked = 0;
  for (const auto& group : fx.duplicate_groups) {
    std::size_t survivors = 0;
    for (const auto& id : group) survivors += deduped_ids.count(id);
    if (survivors != 1) ++leaked;
  }
  o.check(leaked == 0, std::to_string(leaked) + " of " + std::to_string(fx.duplicate_groups.size()) +
                           " injected duplicate groups did not collapse to one");

  std::map<std::pair<std::string, MonthBucket>, std::size_t> per_month;
  std::map<std::string, std::size_t> per_author;
  for (const auto& r : r1.limited) {
    ++per_month[{r.author_id, month_bucket(r)}];
    ++per_author[r.author_id];
  }
  std::size_t month_violations = 0, total_violations = 0;
  for (const auto& [_, n] : per_month) month_violations += n > 1;
  for (const auto& [_, n] : per_author) total_violations += n > 4;
  o.check(month_violations == 0, std::to_string(month_violations) + " author-months above 1");
  o.check(total_violations == 0, std::to_string(total_violations) + " authors above 4");

  std::size_t burst_before = 0;
  for (const auto& r : fx.records)
    burst_before += std::find(fx.burst_authors.begin(), fx.burst_authors.end(), r.author_id) != fx.burst_authors.end();
  o.check(burst_before > fx.burst_authors.size() * 4, "fixture has no burst posters");

  o.check(remove_duplicates(r1.deduped) == r1.deduped, "dedup not idempotent");
  o.check(limit_user_monthly(r1.limited, 99) == r1.limited, "limit not idempotent");

  std::ostringstream a, b;
  write_records(a, r1.limited);
  write_records(b, r2.limited);
  o.check(a.str() == b.str(), "two runs differ");
  if (o.pass)
    o.detail = std::to_string(fx.records.size()) + " -> " + std::to_string(r1.deduped.size()) + " deduped -> " +
               std::to_string(r1.limited.size()) + " limited; " + std::to_string(fx.duplicate_groups.size()) +
               " injected groups collapsed; " + std::to_string(burst_before) + " burst tweets; max " +
               std::to_string(std::max_element(per_author.begin(), per_author.end(), [](auto& x, auto& y) {
                                return x.second < y.second;
                              })->second) +
               " per author";
  return o;
}

std::size_t null_significant(const TermIndex& idx, const std::string& a, const std::string& b) {
  return rank_terms(a, std::vector<std::string>{b}, idx).size() + rank_terms(b, std::vector<std::string>{a}, idx).size();
}

Outcome planted_recovery() {
  Outcome o;
  const auto start = Clock::now();
  const auto c = synth::planted_corpus(8080, 8, 10000, 0.05, 0.01);
  const auto lists = rank_partitions(c.index, c.partitions, ComparisonMode::kRest, {kAlpha, 100, 5});
  for (std::size_t p = 0; p < c.partitions.size(); ++p) {
    const auto& list = lists.at(c.partitions[p]);
    const bool first = !list.empty() && list.front().term == c.planted[p];
    o.check(first, c.partitions[p] + ": planted term not ranked 1");
    if (first) o.check(list.front().significant, c.partitions[p] + ": planted term not significant");
  }
  std::size_t null_total = 0;
  for (int seed = 1; seed <= kNullSeeds; ++seed)
    null_total += null_significant(synth::null_corpus(static_cast<std::uint64_t>(seed), 1000), "A", "B");
  const double elapsed = seconds_since(start);
  o.check(null_total <= kNullAllowance, "null corpora gave " + std::to_string(null_total) + " significant terms");
  o.check(elapsed < kPlantedSeconds, "took " + fmt(elapsed) + " s");
  if (o.pass)
    o.detail = "8/8 planted terms rank 1 and significant; " + std::to_string(null_total) +
               " significant in 20 null corpora; " + fmt(elapsed) + " s";
  return o;
}

std::map<std::string, std::string> term_files(const fs::path& out) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(out / artifacts::kTermsDir)) files[e.path().filename()] = read_file(e.path());
  return files;
}

Outcome pipeline_replay() {
  Outcome o;
  scratch::TempDir dir("wata-acceptance");
  {
    std::ofstream out(dir / "tweets.jsonl", std::ios::binary);
    synth::write_fixture(out);
  }
  PipelineConfig cfg;
  cfg.inputs = {(dir / "tweets.jsonl").string()};
  cfg.seed = 11;
  cfg.out_dir = (dir / "first").string();
  Pipeline first(cfg, std::string(kStarterGazetteer));
  first.run_all();
  std::size_t replays = 0;
  for (const char* name : {"second", "third"}) {
    auto replay_cfg = load_config((first.out_dir() / artifacts::kManifest).string());
    replay_cfg.out_dir = (dir / name).string();
    Pipeline again(replay_cfg, std::string(kStarterGazetteer));
    again.run_all();
    o.check(term_files(first.out_dir()) == term_files(again.out_dir()), std::string(name) + " run differs");
    ++replays;
  }
  const auto files = term_files(first.out_dir());
  o.check(files.size() == 8, "expected 8 term files, got " + std::to_string(files.size()));
  if (o.pass) o.detail = std::to_string(files.size()) + " term files byte-identical across " + std::to_string(replays) + " manifest replays";
  return o;
}

Outcome gender_plumbing() {
  Outcome o;
  const auto lex = load_gender_lexicon(std::string(WATA_TEST_DATA_DIR) + "/names.csv");
  const auto nb = infer_gender("Mary Smith", "she/her \xE2\x80\xA6 they/them", lex);
  o.check(nb.gender == Gender::kNonbinary && nb.basis == GenderBasis::kPronouns, "pronouns did not take precedence");
  o.check(infer_gender("Mary Smith", "", lex).gender == Gender::kFemale, "lexicon lookup failed");
  o.check(infer_gender("Xq7 Bot", "", lex).gender == Gender::kUnknown, "unknown name was gendered");
  o.check(lex.below_threshold() == 2 && !lex.lookup("alex") && !lex.lookup("jordan"),
          "entries below 0.9 were not refused at load");

  // planted: 8% of female-authored vs 1% of male-authored tweets
  const synth::Vocabulary vocab(2000);
  rng::Engine eng(90);
  std::vector<std::string> texts, labels;
  std::vector<Gender> genders;
  for (int i = 0; i < 6000; ++i) {
    const Gender g = i % 2 ? Gender::kMale : Gender::kFemale;
    std::string t = synth::filler(eng, vocab, 12);
    if (synth::chance(eng, g == Gender::kFemale ? 0.08 : 0.01)) t += " plantedterm";
    texts.push_back(std::move(t));
    labels.push_back("GB");
    genders.push_back(g);
  }
  const auto idx = TermIndex::build(texts, labels);
  const auto r = gendered_terms("GB", idx, [&](std::size_t id) { return genders.at(id); }, {kAlpha, 100, 5});
  const bool found = std::any_of(r.female.begin(), r.female.end(), [](const TermScore& s) { return s.term == "plantedterm"; });
  o.check(found, "planted term missing from the female list");
  const auto unknown = gendered_terms("GB", idx, [](std::size_t) { return Gender::kUnknown; }, {});
  o.check(unknown.male.empty() && unknown.female.empty(), "unknown-only country produced terms");

  std::size_t null_total = 0;
  for (int seed = 1; seed <= kNullSeeds; ++seed) {
    const auto nidx = synth::null_corpus(static_cast<std::uint64_t>(seed) + 1000, 1000, "female", "male");
    null_total += null_significant(nidx, "male", "female");
  }
  o.check(null_total <= kNullAllowance, "null gender corpora gave " + std::to_string(null_total) + " significant terms");
  if (o.pass)
    o.detail = "pronoun precedence, 0.9 threshold at load, planted term in female list (rank " +
               std::to_string(std::find_if(r.female.begin(), r.female.end(),
                                           [](const TermScore& s) { return s.term == "plantedterm"; })->rank) +
               "), " + std::to_string(null_total) + " significant in 20 null corpora";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"chi-square oracle", chi_square_oracle},
      {"p-value checks", p_value_checks},
      {"BH oracle", bh_oracle},
      {"country share table", country_share_table},
      {"filtering invariants", filtering_invariants},
      {"planted-term recovery", planted_recovery},
      {"pipeline replay", pipeline_replay},
      {"gender plumbing", gender_plumbing},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
