#pragma once

// Local HTTP API over a pipeline output directory: partitions, ranked terms,
// tweet samples, gendered terms, and the coding operations of the codebook.
//
// Routing lives in ApiService::handle so it can be exercised without sockets;
// serve() only adapts cpp-httplib requests onto it.

#include <atomic>
#include <charconv>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "wata/codebook.hpp"
#include "wata/gender.hpp"
#include "wata/pipeline.hpp"
#include "wata/sampler.hpp"
#include "wata/termstats.hpp"

namespace wata {

struct ApiConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8642;
  std::filesystem::path data_dir;
  bool read_only = false;
  // When set, mutating requests must carry it in the X-Wata-Token header.
  std::string token;

  void validate() const {
    if (port < 1 || port > 65535) throw std::invalid_argument("api: port must be in 1..65535");
  }
};

inline constexpr const char* kTokenHeader = "X-Wata-Token";

struct ApiRequest {
  std::string method;
  std::string path;  // already percent-decoded
  std::map<std::string, std::string> query;
  std::string body;
  std::map<std::string, std::string> headers;  // lower-case names
};

struct ApiResponse {
  int status = 200;
  nlohmann::ordered_json body;
};

/// Raised at startup when the data directory is incomplete.
class MissingArtifacts : public std::runtime_error {
 public:
  explicit MissingArtifacts(std::vector<std::string> missing)
      : std::runtime_error("missing pipeline artifacts: " + text::join(missing, ", ")), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

class ApiService {
 public:
  /// Loads the geotagged store and term lists from `cfg.data_dir` and opens
  /// (or creates) the codebook store there.
  explicit ApiService(ApiConfig cfg, Codebook::Clock clock = {}) : cfg_(std::move(cfg)) {
    cfg_.validate();
    namespace fs = std::filesystem;
    const fs::path dir = cfg_.data_dir;
    std::vector<std::string> missing;
    if (!fs::exists(dir / artifacts::kGeo)) missing.push_back(artifacts::kGeo);
    std::vector<fs::path> term_files;
    if (fs::is_directory(dir / artifacts::kTermsDir))
      for (const auto& e : fs::directory_iterator(dir / artifacts::kTermsDir))
        if (e.path().filename().string().starts_with("terms_")) term_files.push_back(e.path());
    if (term_files.empty()) missing.push_back(std::string(artifacts::kTermsDir) + "/terms_*.csv");
    if (!missing.empty()) throw MissingArtifacts(missing);

    for (auto& g : read_geo_records(dir / artifacts::kGeo)) {
      labels_.push_back(g.country);
      store_.push_back(std::move(g.record));
    }
    std::vector<std::string> texts;
    texts.reserve(store_.size());
    for (const auto& r : store_) texts.push_back(r.text);
    index_ = TermIndex::build(texts, labels_);

    codebook_ = std::make_unique<Codebook>(Codebook::Options{dir / artifacts::kCodebook, std::move(clock), true});
    std::sort(term_files.begin(), term_files.end());
    for (const auto& f : term_files) {
      std::string stem = f.stem().string();
      std::string partition = stem.substr(std::string("terms_").size());
      std::ifstream in(f);
      codebook_->set_term_list(partition, read_term_list(in, partition));
    }
    if (fs::is_directory(dir / artifacts::kGenderDir)) {
      for (const auto& e : fs::directory_iterator(dir / artifacts::kGenderDir)) {
        const auto name = e.path().stem().string();
        if (!name.starts_with("gender_") || e.path().extension() != ".csv") continue;
        std::ifstream in(e.path());
        gender_[name.substr(std::string("gender_").size())] = read_gendered_terms(in);
      }
    }
  }

  const ApiConfig& config() const { return cfg_; }
  Codebook& codebook() { return *codebook_; }

  ApiResponse handle(const ApiRequest& req) {
    try {
      return route(req);
    } catch (const CodebookError& e) {
      ApiResponse r{status_for(e.kind()), {{"error", e.what()}}};
      if (!e.terms().empty()) r.body["terms"] = e.terms();
      return r;
    } catch (const nlohmann::json::exception& e) {
      return error(400, std::string("malformed request body: ") + e.what());
    } catch (const std::out_of_range& e) {
      return error(404, e.what());
    } catch (const std::invalid_argument& e) {
      return error(400, e.what());
    }
  }

 private:
  static int status_for(CodebookError::Kind k) {
    switch (k) {
      case CodebookError::Kind::kNotFound: return 404;
      case CodebookError::Kind::kConflict: return 409;
      case CodebookError::Kind::kInvalid: break;
    }
    return 400;
  }

  static ApiResponse error(int status, const std::string& msg) { return {status, {{"error", msg}}}; }

  static std::vector<std::string> split_path(std::string_view path) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= path.size()) {
      auto end = path.find('/', start);
      if (end == std::string_view::npos) end = path.size();
      if (end > start) out.emplace_back(path.substr(start, end - start));
      start = end + 1;
    }
    return out;
  }

  static std::optional<std::uint64_t> uint_param(const ApiRequest& req, const std::string& key) {
    auto it = req.query.find(key);
    if (it == req.query.end()) return std::nullopt;
    std::uint64_t v = 0;
    const auto& s = it->second;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw std::invalid_argument("query parameter '" + key + "' must be a non-negative integer");
    return v;
  }

  bool mutation_allowed(const ApiRequest& req, ApiResponse& denied) const {
    if (cfg_.read_only) {
      denied = error(403, "service is read-only");
      return false;
    }
    if (!cfg_.token.empty()) {
      auto it = req.headers.find(text::ascii_lower(kTokenHeader));
      if (it == req.headers.end() || it->second != cfg_.token) {
        denied = error(401, "missing or wrong X-Wata-Token header");
        return false;
      }
    }
    return true;
  }

  nlohmann::ordered_json term_json(const TermScore& s, const std::optional<TermAssignment>& a) const {
    nlohmann::ordered_json j{{"rank", s.rank},       {"term", s.term},   {"a", s.table.a},
                             {"b", s.table.b},       {"c", s.table.c},   {"d", s.table.d},
                             {"chi2", s.chi2},       {"p", s.p_value},   {"significant", s.significant}};
    if (a) {
      j["status"] = to_string(a->status);
      j["theme_id"] = a->status == AssignmentStatus::kThemed ? nlohmann::ordered_json(a->theme_id)
                                                             : nlohmann::ordered_json(nullptr);
      j["round"] = a->round;
    } else {
      j["status"] = "unthemed";
      j["theme_id"] = nullptr;
      j["round"] = nullptr;
    }
    return j;
  }

  ApiResponse route(const ApiRequest& req) {
    const auto seg = split_path(req.path);
    const std::string& m = req.method;
    const bool mutating = m == "POST" || m == "PUT" || m == "DELETE";
    ApiResponse denied;
    if (mutating && !mutation_allowed(req, denied)) return denied;

    if (m == "GET" && seg.size() == 1 && seg[0] == "countries") {
      nlohmann::ordered_json list = nlohmann::ordered_json::array();
      for (const auto& p : codebook_->partitions())
        list.push_back({{"label", p}, {"tweets", index_.partition_size(p)}});
      return {200, {{"countries", list}}};
    }
    if (m == "GET" && seg.size() == 3 && seg[0] == "countries" && seg[2] == "terms") {
      const auto k = uint_param(req, "k").value_or(100);
      const auto list = codebook_->term_list(seg[1]);
      nlohmann::ordered_json terms = nlohmann::ordered_json::array();
      for (std::size_t i = 0; i < list.size() && i < k; ++i)
        terms.push_back(term_json(list[i], codebook_->assignment(seg[1], list[i].term)));
      return {200, {{"partition", seg[1]}, {"terms", terms}}};
    }
    if (m == "GET" && seg.size() == 5 && seg[0] == "countries" && seg[2] == "terms" && seg[4] == "samples") {
      const auto seed = uint_param(req, "seed");
      if (!seed) return error(400, "the seed query parameter is required for sampling");
      SampleRequest sr{seg[3], seg[1], static_cast<std::size_t>(uint_param(req, "n").value_or(kDefaultSampleSize)),
                       *seed};
      nlohmann::ordered_json tweets = nlohmann::ordered_json::array();
      for (const auto& r : sample_tweets(sr, index_, store_)) tweets.push_back(to_json(r));
      return {200, {{"partition", sr.partition}, {"term", sr.term}, {"n", sr.n}, {"seed", sr.seed}, {"tweets", tweets}}};
    }
    if (seg.size() >= 1 && seg[0] == "codebook") {
      if (m == "GET" && seg.size() == 1) {
        nlohmann::ordered_json themes = nlohmann::ordered_json::array();
        for (const auto& t : codebook_->themes()) themes.push_back(to_json(t));
        return {200, {{"themes", themes}}};
      }
      if (m == "GET" && seg.size() == 2 && seg[1] == "audit") {
        nlohmann::ordered_json events = nlohmann::ordered_json::array();
        const auto partition = req.query.count("partition") ? req.query.at("partition") : std::string();
        for (const auto& e : codebook_->audit_log()) {
          if (!partition.empty() && e.payload.value("partition", std::string()) != partition) continue;
          events.push_back(to_json(e));
        }
        return {200, {{"events", events}}};
      }
      if (m == "POST" && seg.size() == 2 && seg[1] == "themes") {
        const auto body = nlohmann::json::parse(req.body);
        const auto t = codebook_->create_theme(body.at("name").get<std::string>(), body.value("description", std::string()));
        return {201, to_json(t)};
      }
      if (m == "DELETE" && seg.size() == 3 && seg[1] == "themes") {
        codebook_->delete_theme(seg[2]);
        return {200, {{"deleted", seg[2]}}};
      }
    }
    if (m == "PUT" && seg.size() == 1 && seg[0] == "assignments") {
      const auto body = nlohmann::json::parse(req.body);
      TermAssignment a;
      a.term = body.at("term").get<std::string>();
      a.partition = body.at("partition").get<std::string>();
      const auto status = parse_status(body.at("status").get<std::string>());
      if (!status) return error(400, "status must be themed, ignored_multi_context or unthemed");
      a.status = *status;
      if (body.contains("theme_id") && !body["theme_id"].is_null()) a.theme_id = body["theme_id"].get<std::string>();
      a.round = body.at("round").get<int>();
      a.note = body.value("note", std::string());
      if (body.contains("reviewed_samples")) a.reviewed_samples = body["reviewed_samples"].get<std::vector<std::string>>();
      return {200, to_json(codebook_->assign_term(std::move(a)))};
    }
    if (m == "POST" && seg.size() == 3 && seg[0] == "sessions" && seg[2] == "advance-round") {
      return {200, to_json(codebook_->advance_round(seg[1]))};
    }
    if (m == "GET" && seg.size() == 1 && seg[0] == "progress") {
      nlohmann::ordered_json list = nlohmann::ordered_json::array();
      for (const auto& s : codebook_->progress()) list.push_back(to_json(s));
      return {200, {{"partitions", list}}};
    }
    if (m == "GET" && seg.size() == 1 && seg[0] == "export") {
      const auto bundle = codebook_->export_report();
      nlohmann::ordered_json files = nlohmann::ordered_json::object();
      for (const auto& [name, content] : bundle.files) files[name] = content;
      return {200, {{"partial", bundle.partial}, {"files", files}}};
    }
    if (m == "GET" && seg.size() == 3 && seg[0] == "gender" && seg[2] == "terms") {
      auto it = gender_.find(seg[1]);
      if (it == gender_.end()) return error(404, "no gendered term lists for '" + seg[1] + "'");
      nlohmann::ordered_json male = nlohmann::ordered_json::array(), female = nlohmann::ordered_json::array();
      for (const auto& s : it->second.male) male.push_back(term_json(s, std::nullopt));
      for (const auto& s : it->second.female) female.push_back(term_json(s, std::nullopt));
      for (auto* list : {&male, &female})
        for (auto& j : *list) {
          j.erase("status");
          j.erase("theme_id");
          j.erase("round");
        }
      return {200, {{"partition", seg[1]}, {"male", male}, {"female", female}}};
    }
    return error(404, "no route for " + m + " " + req.path);
  }

  ApiConfig cfg_;
  std::vector<TweetRecord> store_;
  std::vector<std::string> labels_;
  TermIndex index_;
  std::unique_ptr<Codebook> codebook_;
  std::map<std::string, GenderedTerms> gender_;
};

/// A running HTTP listener. Destruction stops the server and joins its thread.
class ServiceHandle {
 public:
  ServiceHandle(std::unique_ptr<httplib::Server> server, int port)
      : server_(std::move(server)), port_(port), thread_([s = server_.get()] { s->listen_after_bind(); }) {
    server_->wait_until_ready();
  }

  ServiceHandle(const ServiceHandle&) = delete;
  ServiceHandle& operator=(const ServiceHandle&) = delete;
  ~ServiceHandle() { stop(); }

  int port() const { return port_; }

  void stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  std::unique_ptr<httplib::Server> server_;
  int port_;
  std::thread thread_;
};

/// Binds and starts serving `service` in a background thread. With
/// `any_port` the configured port is ignored and a free one is chosen.
/// A port that cannot be bound is a startup error.
inline std::unique_ptr<ServiceHandle> serve(ApiService& service, bool any_port = false) {
  auto server = std::make_unique<httplib::Server>();
  server->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  const auto adapt = [&service](const httplib::Request& req, httplib::Response& res) {
    ApiRequest ar;
    ar.method = req.method;
    ar.path = req.path;
    for (const auto& [k, v] : req.params) ar.query[k] = v;
    for (const auto& [k, v] : req.headers) ar.headers[text::ascii_lower(k)] = v;
    ar.body = req.body;
    const auto out = service.handle(ar);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server->Get(".*", adapt);
  server->Post(".*", adapt);
  server->Put(".*", adapt);
  server->Delete(".*", adapt);

  const auto& cfg = service.config();
  int port = cfg.port;
  if (any_port) {
    port = server->bind_to_any_port(cfg.bind_address);
    if (port < 0) throw std::runtime_error("api: cannot bind " + cfg.bind_address);
  } else if (!server->bind_to_port(cfg.bind_address, port)) {
    throw std::runtime_error("api: cannot bind " + cfg.bind_address + ":" + std::to_string(port) +
                             " (port busy or not permitted)");
  }
  return std::make_unique<ServiceHandle>(std::move(server), port);
}

}  // namespace wata
