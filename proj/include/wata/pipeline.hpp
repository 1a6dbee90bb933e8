#pragma once

// End-to-end pipeline: ingest -> query/language filter -> dedup -> monthly
// limit -> country assignment -> term statistics (-> gender). Each stage reads
// and writes newline-delimited records under the output directory so stages
// can be run and inspected independently.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "wata/dedup.hpp"
#include "wata/gender.hpp"
#include "wata/geomap.hpp"
#include "wata/ingest.hpp"
#include "wata/random.hpp"
#include "wata/termstats.hpp"

namespace wata {

namespace fs = std::filesystem;

/// Artifact names inside the output directory.
namespace artifacts {
inline constexpr const char* kParsed = "01_parsed.jsonl";
inline constexpr const char* kIngestReport = "ingest_report.txt";
inline constexpr const char* kMatched = "02_matched.jsonl";
inline constexpr const char* kDeduped = "03_deduped.jsonl";
inline constexpr const char* kLimited = "04_limited.jsonl";
inline constexpr const char* kFilterSummary = "filter_summary.txt";
inline constexpr const char* kGeo = "05_geo.jsonl";
inline constexpr const char* kCountries = "countries.csv";
inline constexpr const char* kTermsDir = "terms";
inline constexpr const char* kGenderDir = "gender";
inline constexpr const char* kGenderSummary = "summary.csv";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kCodebook = "codebook.jsonl";
inline constexpr const char* kReportDir = "report";

inline std::string term_file(const std::string& partition) { return "terms_" + partition + ".csv"; }
inline std::string gender_file(const std::string& partition) { return "gender_" + partition + ".csv"; }
}  // namespace artifacts

/// Raised when a stage fails; carries the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::vector<std::string> inputs;
  std::vector<std::string> queries{"vaccine",          "vaccination",  "vaccinating",      "vaccinated",
                                   "covidvaccination", "covidvaccine", "covidvaccinefacts"};
  std::string language = "en";
  bool use_window = true;
  std::string window_from = "2020-12-05";
  std::string window_to = "2021-03-21";
  std::optional<std::uint64_t> seed;
  bool strict_dedup = false;
  std::string gazetteer;  // empty: built-in starter gazetteer
  double alpha = 0.05;
  std::size_t top_k = 100;
  std::uint64_t min_df = 5;
  ComparisonMode comparison = ComparisonMode::kRest;
  std::vector<std::string> countries;  // empty: the most frequent `top_countries`
  std::size_t top_countries = 8;
  std::string gender_lexicon;  // empty: gender stage skipped
  std::string out_dir = "wata_out";

  std::optional<CollectionWindow> window() const {
    if (!use_window) return std::nullopt;
    auto from = parse_date(window_from), to = parse_date(window_to);
    if (!from || !to) throw std::invalid_argument("config: window dates must be YYYY-MM-DD");
    if (*to < *from) throw std::invalid_argument("config: window ends before it starts");
    return CollectionWindow{*from, *to};
  }

  RankOptions rank_options() const { return {alpha, top_k, min_df}; }

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("config: alpha must be in (0,1)");
    if (top_k == 0) throw std::invalid_argument("config: top_k must be positive");
    if (out_dir.empty()) throw std::invalid_argument("config: output directory is empty");
    static_cast<void>(QuerySet(queries));
    window();
  }
};

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["inputs"] = c.inputs;
  j["queries"] = c.queries;
  j["language"] = c.language;
  j["use_window"] = c.use_window;
  j["from"] = c.window_from;
  j["to"] = c.window_to;
  j["seed"] = c.seed ? nlohmann::ordered_json(*c.seed) : nlohmann::ordered_json(nullptr);
  j["strict_dedup"] = c.strict_dedup;
  j["gazetteer"] = c.gazetteer;
  j["alpha"] = c.alpha;
  j["top_k"] = c.top_k;
  j["min_df"] = c.min_df;
  j["comparison"] = c.comparison == ComparisonMode::kRest ? "rest" : "selected";
  j["countries"] = c.countries;
  j["top_countries"] = c.top_countries;
  j["gender_lexicon"] = c.gender_lexicon;
  j["out"] = c.out_dir;
  return j;
}

inline ComparisonMode parse_comparison(const std::string& s) {
  if (s == "rest") return ComparisonMode::kRest;
  if (s == "selected") return ComparisonMode::kSelected;
  throw std::invalid_argument("comparison must be 'rest' or 'selected', got '" + s + "'");
}

/// Reads a config object; a run manifest (which embeds its config) is accepted too.
inline PipelineConfig config_from_json(const nlohmann::json& root) {
  const nlohmann::json& j = root.contains("config") ? root.at("config") : root;
  PipelineConfig c;
  if (j.contains("inputs")) c.inputs = j["inputs"].get<std::vector<std::string>>();
  if (j.contains("queries")) c.queries = j["queries"].get<std::vector<std::string>>();
  c.language = j.value("language", c.language);
  c.use_window = j.value("use_window", c.use_window);
  c.window_from = j.value("from", c.window_from);
  c.window_to = j.value("to", c.window_to);
  if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
  c.strict_dedup = j.value("strict_dedup", c.strict_dedup);
  c.gazetteer = j.value("gazetteer", c.gazetteer);
  c.alpha = j.value("alpha", c.alpha);
  c.top_k = j.value("top_k", c.top_k);
  c.min_df = j.value("min_df", c.min_df);
  if (j.contains("comparison")) c.comparison = parse_comparison(j["comparison"].get<std::string>());
  if (j.contains("countries")) c.countries = j["countries"].get<std::vector<std::string>>();
  c.top_countries = j.value("top_countries", c.top_countries);
  c.gender_lexicon = j.value("gender_lexicon", c.gender_lexicon);
  c.out_dir = j.value("out", c.out_dir);
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::runtime_error("config " + path + " is not a JSON object");
  return config_from_json(j);
}

// Record files -----------------------------------------------------------------

inline std::vector<TweetRecord> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto parsed = parse_tweet_stream(in);
  if (!parsed.report.empty())
    throw std::runtime_error(path.string() + " contains malformed records:\n" + parsed.report.to_text());
  return std::move(parsed.records);
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_record_file(const fs::path& path, const std::vector<TweetRecord>& records) {
  std::ostringstream out;
  write_records(out, records);
  write_file(path, out.str());
}

/// A record with its author's country label (ISO2 or "none").
struct GeoRecord {
  TweetRecord record;
  std::string country;
};

inline void write_geo_records(const fs::path& path, const std::vector<GeoRecord>& records) {
  std::ostringstream out;
  for (const auto& g : records) {
    auto j = to_json(g.record);
    j["country"] = g.country;
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

inline std::vector<GeoRecord> read_geo_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<GeoRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto parsed = parse_tweet_line(line);
    if (auto* err = std::get_if<ParseError>(&parsed))
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + err->reason);
    auto j = nlohmann::json::parse(line);
    out.push_back({std::move(std::get<TweetRecord>(parsed)), j.value("country", std::string(kUnassigned))});
  }
  return out;
}

inline std::string digest_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng::fnv1a(bytes)));
  return buf;
}

// Stage results ------------------------------------------------------------------

struct StageCount {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  double millis = 0;
};

struct FilterResult {
  std::vector<TweetRecord> matched;
  std::vector<TweetRecord> deduped;
  std::vector<TweetRecord> limited;
};

/// Query and language filter, then dedup, then the monthly limit.
inline FilterResult filter_records(const std::vector<TweetRecord>& parsed, const QuerySet& queries,
                                   const std::string& language, bool strict_dedup, std::uint64_t seed) {
  FilterResult r;
  for (const auto& rec : parsed)
    if (filter_language(rec, language) && match_query(rec, queries)) r.matched.push_back(rec);
  r.deduped = remove_duplicates(r.matched, {strict_dedup});
  r.limited = limit_user_monthly(r.deduped, seed);
  return r;
}

inline std::vector<GeoRecord> geotag(const std::vector<TweetRecord>& records, const Gazetteer& g) {
  const auto by_author = assign_authors(records, g);
  std::vector<GeoRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r, by_author.at(r.author_id).label()});
  return out;
}

/// Tweet counts per label, most frequent first (ties by label).
inline std::vector<std::pair<std::string, std::size_t>> count_by_country(const std::vector<GeoRecord>& records) {
  std::map<std::string, std::size_t> counts;
  for (const auto& g : records) ++counts[g.country];
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

inline std::vector<std::string> select_countries(const std::vector<std::pair<std::string, std::size_t>>& counts,
                                                 const PipelineConfig& cfg) {
  if (!cfg.countries.empty()) return cfg.countries;
  std::vector<std::string> out;
  for (const auto& [label, _] : counts) {
    if (label == kUnassigned) continue;
    if (out.size() == cfg.top_countries) break;
    out.push_back(label);
  }
  return out;
}

inline TermIndex index_geo_records(const std::vector<GeoRecord>& records) {
  std::vector<std::string> texts, labels;
  texts.reserve(records.size());
  labels.reserve(records.size());
  for (const auto& g : records) {
    texts.push_back(g.record.text);
    labels.push_back(g.country);
  }
  return TermIndex::build(texts, labels);
}

/// Gender per record, inferred from each author's latest record.
inline std::vector<Gender> infer_record_genders(const std::vector<GeoRecord>& records, const GenderLexicon& lex) {
  std::map<std::string, const TweetRecord*> latest;
  for (const auto& g : records) {
    auto [it, inserted] = latest.try_emplace(g.record.author_id, &g.record);
    if (!inserted && std::tie(g.record.timestamp, g.record.tweet_id) >
                         std::tie(it->second->timestamp, it->second->tweet_id))
      it->second = &g.record;
  }
  std::map<std::string, Gender> by_author;
  for (const auto& [author, rec] : latest) by_author[author] = infer_gender(rec->author_name, rec->author_bio, lex).gender;
  std::vector<Gender> out;
  out.reserve(records.size());
  for (const auto& g : records) out.push_back(by_author.at(g.record.author_id));
  return out;
}

// File-backed stages ---------------------------------------------------------------

class Pipeline {
 public:
  /// `starter_gazetteer` is used when the config names no gazetteer file.
  Pipeline(PipelineConfig cfg, std::string starter_gazetteer = {})
      : cfg_(std::move(cfg)), starter_gazetteer_(std::move(starter_gazetteer)), out_(cfg_.out_dir) {}

  const PipelineConfig& config() const { return cfg_; }
  const fs::path& out_dir() const { return out_; }
  const std::vector<StageCount>& counts() const { return counts_; }

  void ingest() {
    run_stage("ingest", [&] {
      if (cfg_.inputs.empty()) throw std::invalid_argument("no input files");
      ParsedStream all;
      std::size_t lines = 0;
      for (const auto& path : cfg_.inputs) {
        auto part = parse_tweet_file(path, cfg_.window());
        lines += part.records.size() + part.report.total();
        all.report.merge(part.report);
        for (auto& r : part.records) all.records.push_back(std::move(r));
      }
      // Ids must be unique across input files as well.
      std::unordered_set<std::string> seen;
      std::vector<TweetRecord> unique;
      for (auto& r : all.records) {
        if (seen.insert(r.tweet_id).second) {
          unique.push_back(std::move(r));
        } else {
          all.report.add("duplicate_id");
        }
      }
      write_record_file(out_ / artifacts::kParsed, unique);
      write_file(out_ / artifacts::kIngestReport, "lines: " + std::to_string(lines) +
                                                      "\nparsed: " + std::to_string(unique.size()) + "\n" +
                                                      all.report.to_text());
      counts_.push_back({"parsed", lines, unique.size()});
    });
  }

  void filter() {
    run_stage("filter", [&] {
      if (!cfg_.seed) throw std::invalid_argument("a seed is required for the monthly limit");
      const auto parsed = read_records(out_ / artifacts::kParsed);
      const auto r = filter_records(parsed, QuerySet(cfg_.queries), cfg_.language, cfg_.strict_dedup, *cfg_.seed);
      write_record_file(out_ / artifacts::kMatched, r.matched);
      write_record_file(out_ / artifacts::kDeduped, r.deduped);
      write_record_file(out_ / artifacts::kLimited, r.limited);
      counts_.push_back({"query_matched", parsed.size(), r.matched.size()});
      counts_.push_back({"deduplicated", r.matched.size(), r.deduped.size()});
      counts_.push_back({"rate_limited", r.deduped.size(), r.limited.size()});
      std::string summary = "stage in out\n";
      for (std::size_t i = counts_.size() - 3; i < counts_.size(); ++i)
        summary += counts_[i].name + " " + std::to_string(counts_[i].in) + " " + std::to_string(counts_[i].out) + "\n";
      write_file(out_ / artifacts::kFilterSummary, summary);
    });
  }

  void geo() {
    run_stage("geo", [&] {
      const auto records = read_records(out_ / artifacts::kLimited);
      const Gazetteer g = load_gazetteer_for_config();
      const auto tagged = geotag(records, g);
      write_geo_records(out_ / artifacts::kGeo, tagged);
      const auto counts = count_by_country(tagged);
      std::string table = csv::row({"country", "tweets", "percent"});
      if (!tagged.empty())
        for (const auto& s : country_shares(counts, tagged.size()))
          table += csv::row({s.label, std::to_string(s.count), format_percent(s.percent)});
      write_file(out_ / artifacts::kCountries, table);
      counts_.push_back({"geotagged", records.size(), tagged.size()});
    });
  }

  void stats() {
    run_stage("stats", [&] {
      const auto records = read_geo_records(out_ / artifacts::kGeo);
      const auto selected = select_countries(count_by_country(records), cfg_);
      const auto index = index_geo_records(records);
      std::vector<std::string> present;
      for (const auto& c : selected)
        if (index.partition_size(c) > 0) present.push_back(c);
      const auto lists = rank_partitions(index, present, cfg_.comparison, cfg_.rank_options());
      fs::remove_all(out_ / artifacts::kTermsDir);
      fs::create_directories(out_ / artifacts::kTermsDir);
      for (const auto& [partition, scores] : lists) {
        std::ostringstream out;
        write_term_list(out, scores);
        write_file(out_ / artifacts::kTermsDir / artifacts::term_file(partition), out.str());
      }
      counts_.push_back({"scored_partitions", selected.size(), lists.size()});
    });
  }

  void gender() {
    run_stage("gender", [&] {
      if (cfg_.gender_lexicon.empty()) throw std::invalid_argument("no gender lexicon configured");
      const auto lex = load_gender_lexicon(cfg_.gender_lexicon);
      const auto records = read_geo_records(out_ / artifacts::kGeo);
      const auto selected = select_countries(count_by_country(records), cfg_);
      const auto index = index_geo_records(records);
      const auto genders = infer_record_genders(records, lex);
      fs::remove_all(out_ / artifacts::kGenderDir);
      fs::create_directories(out_ / artifacts::kGenderDir);
      std::string summary = csv::row({"country", "male", "female", "nonbinary", "unknown", "male_terms", "female_terms"});
      for (const auto& c : selected) {
        const auto terms = gendered_terms(c, index, [&](std::size_t id) { return genders.at(id); }, cfg_.rank_options());
        std::ostringstream out;
        write_gendered_terms(out, terms);
        write_file(out_ / artifacts::kGenderDir / artifacts::gender_file(c), out.str());
        summary += csv::row({c, std::to_string(terms.male_tweets), std::to_string(terms.female_tweets),
                             std::to_string(terms.nonbinary_tweets), std::to_string(terms.unknown_tweets),
                             std::to_string(terms.male.size()), std::to_string(terms.female.size())});
      }
      write_file(out_ / artifacts::kGenderDir / artifacts::kGenderSummary, summary);
      counts_.push_back({"gender_partitions", selected.size(), selected.size()});
    });
  }

  /// Runs every stage and writes the manifest. Returns the manifest.
  nlohmann::ordered_json run_all() {
    cfg_.validate();
    fs::create_directories(out_);
    fs::remove(out_ / "PARTIAL");
    ingest();
    filter();
    geo();
    stats();
    if (!cfg_.gender_lexicon.empty()) gender();
    auto manifest = build_manifest();
    write_file(out_ / artifacts::kManifest, manifest.dump(2) + "\n");
    return manifest;
  }

  nlohmann::ordered_json build_manifest() const {
    nlohmann::ordered_json m;
    m["config"] = to_json(cfg_);
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& path : cfg_.inputs) inputs.push_back({{"path", path}, {"digest", digest_hex(read_file(path))}});
    for (const auto* extra : {&cfg_.gazetteer, &cfg_.gender_lexicon})
      if (!extra->empty()) inputs.push_back({{"path", *extra}, {"digest", digest_hex(read_file(*extra))}});
    m["inputs"] = inputs;
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();
    for (const auto& s : counts_)
      stages.push_back({{"stage", s.name}, {"in", s.in}, {"out", s.out}, {"millis", s.millis}});
    m["stages"] = stages;
    nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
    if (fs::exists(out_ / artifacts::kTermsDir)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(out_ / artifacts::kTermsDir)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files)
        outputs.push_back({{"path", fs::relative(f, out_).generic_string()}, {"digest", digest_hex(read_file(f))}});
    }
    m["outputs"] = outputs;
    return m;
  }

 private:
  Gazetteer load_gazetteer_for_config() const {
    if (!cfg_.gazetteer.empty()) return load_gazetteer(cfg_.gazetteer);
    std::istringstream in(starter_gazetteer_);
    return load_gazetteer(in);
  }

  template <class F>
  void run_stage(const std::string& name, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t before = counts_.size();
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      write_file(out_ / "PARTIAL", "stage " + name + " failed: " + e.what() + "\n");
      throw StageError(name, e.what());
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t i = before; i < counts_.size(); ++i) counts_[i].millis = ms / static_cast<double>(counts_.size() - before);
  }

  PipelineConfig cfg_;
  std::string starter_gazetteer_;
  fs::path out_;
  std::vector<StageCount> counts_;
};

}  // namespace wata
