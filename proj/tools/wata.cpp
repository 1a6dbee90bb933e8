// wata: command-line driver for the differential-term pipeline and the coding service.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wata/api.hpp"
#include "wata/pipeline.hpp"
#include "wata/sampler.hpp"
#include "wata/starter_gazetteer.hpp"

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = wata::text::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> inputs;
  std::string queries;
  std::string lang;
  std::string from, to;
  bool no_window = false;
  bool strict_dedup = false;
  std::string gazetteer;
  double alpha = 0;
  std::size_t top_k = 0;
  std::uint64_t min_df = 0;
  std::string comparison;
  std::string countries;
  std::size_t top_countries = 0;
  std::string gender_lexicon;
};

wata::PipelineConfig resolve_config(const CLI::App& app, const CliOptions& o) {
  wata::PipelineConfig cfg = o.config_path.empty() ? wata::PipelineConfig{} : wata::load_config(o.config_path);
  const auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--seed")) cfg.seed = o.seed;
  if (given("--out")) cfg.out_dir = o.out;
  if (given("--input")) cfg.inputs = o.inputs;
  if (given("--queries")) cfg.queries = split_list(o.queries);
  if (given("--lang")) cfg.language = o.lang;
  if (given("--from")) cfg.window_from = o.from;
  if (given("--to")) cfg.window_to = o.to;
  if (given("--no-window")) cfg.use_window = false;
  if (given("--strict-dedup")) cfg.strict_dedup = true;
  if (given("--gazetteer")) cfg.gazetteer = o.gazetteer;
  if (given("--alpha")) cfg.alpha = o.alpha;
  if (given("--top-k")) cfg.top_k = o.top_k;
  if (given("--min-df")) cfg.min_df = o.min_df;
  if (given("--comparison")) cfg.comparison = wata::parse_comparison(o.comparison);
  if (given("--countries")) cfg.countries = split_list(o.countries);
  if (given("--top-countries")) cfg.top_countries = o.top_countries;
  if (given("--gender-lexicon")) cfg.gender_lexicon = o.gender_lexicon;
  return cfg;
}

void print_counts(const wata::Pipeline& p) {
  for (const auto& s : p.counts()) std::cerr << s.name << ": " << s.in << " -> " << s.out << "\n";
}

int run_serve(const wata::PipelineConfig& cfg, const std::string& host, int port, bool read_only,
              const std::string& token) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  wata::ApiConfig api{host, port, cfg.out_dir, read_only, token};
  wata::ApiService service(api);
  auto handle = wata::serve(service);
  std::cerr << "serving " << cfg.out_dir << " on http://" << host << ":" << handle->port()
            << (read_only ? " (read-only)" : "") << "\n";
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  handle->stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differential term analysis of tweet corpora, with a thematic coding service"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions o;
  app.add_option("--config", o.config_path, "JSON config file or a previous run manifest");
  app.add_option("--seed", o.seed, "Seed for every randomized stage");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--input", o.inputs, "Newline-delimited JSON tweet files");
  app.add_option("--queries", o.queries, "Comma-separated keyword queries");
  app.add_option("--lang", o.lang, "Language tag to keep (primary subtag match)");
  app.add_option("--from", o.from, "Collection window start, YYYY-MM-DD (UTC)");
  app.add_option("--to", o.to, "Collection window end, YYYY-MM-DD inclusive (UTC)");
  app.add_flag("--no-window", o.no_window, "Keep records regardless of timestamp");
  app.add_flag("--strict-dedup", o.strict_dedup, "Do not case-fold near-duplicate keys");
  app.add_option("--gazetteer", o.gazetteer, "Gazetteer file (name,ISO2,kind)");
  app.add_option("--alpha", o.alpha, "Benjamini-Hochberg level");
  app.add_option("--top-k", o.top_k, "Terms kept per partition");
  app.add_option("--min-df", o.min_df, "Minimum target document frequency");
  app.add_option("--comparison", o.comparison, "Comparison corpus: rest | selected");
  app.add_option("--countries", o.countries, "Comma-separated ISO2 partitions to analyse");
  app.add_option("--top-countries", o.top_countries, "Analyse the N most frequent countries");
  app.add_option("--gender-lexicon", o.gender_lexicon, "First-name lexicon (name,gender,proportion)");

  auto* ingest = app.add_subcommand("ingest", "Parse archived tweets");
  auto* filter = app.add_subcommand("filter", "Query/language filter, dedup and monthly limit");
  auto* geo = app.add_subcommand("geo", "Assign authors to countries");
  auto* stats = app.add_subcommand("stats", "Rank over-represented terms per country");
  auto* gender = app.add_subcommand("gender", "Male vs female term lists per country");
  auto* all = app.add_subcommand("all", "Run the whole pipeline and write a manifest");

  auto* sample = app.add_subcommand("sample", "Print a seeded sample of tweets containing a term");
  std::string term, country;
  std::size_t n = wata::kDefaultSampleSize;
  sample->add_option("--term", term, "Term as tokenized (lower case, keeps # or @)")->required();
  sample->add_option("--country", country, "Partition label")->required();
  sample->add_option("--n", n, "Sample size")->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over an output directory");
  std::string host = "127.0.0.1", token;
  int port = 8642;
  bool read_only = false;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve->add_flag("--read-only", read_only, "Reject all mutating requests");
  serve->add_option("--token", token, "Require this X-Wata-Token on mutating requests");

  auto* exp = app.add_subcommand("export", "Write the coding report");
  std::string export_dir;
  exp->add_option("--dir", export_dir, "Report directory (default <out>/report)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(app, o);
    wata::Pipeline pipeline(cfg, std::string(wata::kStarterGazetteer));
    if (*ingest) {
      pipeline.ingest();
    } else if (*filter) {
      pipeline.filter();
    } else if (*geo) {
      pipeline.geo();
    } else if (*stats) {
      pipeline.stats();
    } else if (*gender) {
      pipeline.gender();
    } else if (*all) {
      pipeline.run_all();
      std::cerr << "manifest: " << (pipeline.out_dir() / wata::artifacts::kManifest).string() << "\n";
    } else if (*sample) {
      if (!cfg.seed) throw std::invalid_argument("sample requires --seed");
      const auto records = wata::read_geo_records(pipeline.out_dir() / wata::artifacts::kGeo);
      std::vector<wata::TweetRecord> store;
      for (const auto& g : records) store.push_back(g.record);
      const auto index = wata::index_geo_records(records);
      for (const auto& r : wata::sample_tweets({term, country, n, *cfg.seed}, index, store))
        std::cout << wata::serialize(r) << "\n";
      return 0;
    } else if (*serve) {
      return run_serve(cfg, host, port, read_only, token);
    } else if (*exp) {
      wata::ApiService service(wata::ApiConfig{"127.0.0.1", 8642, cfg.out_dir, true, {}});
      const auto dir = export_dir.empty() ? pipeline.out_dir() / wata::artifacts::kReportDir
                                          : std::filesystem::path(export_dir);
      const auto bundle = service.codebook().export_report(dir);
      std::cerr << "wrote " << bundle.files.size() << " files to " << dir.string()
                << (bundle.partial ? " (partial: some terms are unthemed)" : "") << "\n";
      return 0;
    }
    print_counts(pipeline);
  } catch (const wata::StageError& e) {
    std::cerr << "error in stage " << e.stage() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
