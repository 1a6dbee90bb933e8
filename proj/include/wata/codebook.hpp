#pragma once

// Thematic coding state. Every mutation is an event appended to a JSON-lines
// log; the current state is the fold of the log, so reopening a store file or
// replaying the in-memory log reproduces it exactly.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wata/csv.hpp"
#include "wata/termstats.hpp"
#include "wata/text.hpp"

namespace wata {

class CodebookError : public std::runtime_error {
 public:
  enum class Kind { kNotFound, kInvalid, kConflict };

  CodebookError(Kind kind, const std::string& what, std::vector<std::string> terms = {})
      : std::runtime_error(what), kind_(kind), terms_(std::move(terms)) {}

  Kind kind() const { return kind_; }
  /// Terms the error is about (e.g. the unthemed terms blocking round two).
  const std::vector<std::string>& terms() const { return terms_; }

 private:
  Kind kind_;
  std::vector<std::string> terms_;
};

struct Theme {
  std::string theme_id;
  std::string name;
  std::string description;
  bool seeded = false;

  friend bool operator==(const Theme&, const Theme&) = default;
};

enum class AssignmentStatus { kUnthemed, kThemed, kIgnoredMultiContext };

inline std::string_view to_string(AssignmentStatus s) {
  switch (s) {
    case AssignmentStatus::kThemed: return "themed";
    case AssignmentStatus::kIgnoredMultiContext: return "ignored_multi_context";
    case AssignmentStatus::kUnthemed: break;
  }
  return "unthemed";
}

inline std::optional<AssignmentStatus> parse_status(std::string_view s) {
  if (s == "unthemed") return AssignmentStatus::kUnthemed;
  if (s == "themed") return AssignmentStatus::kThemed;
  if (s == "ignored_multi_context" || s == "ignored") return AssignmentStatus::kIgnoredMultiContext;
  return std::nullopt;
}

struct TermAssignment {
  std::string term;
  std::string partition;
  AssignmentStatus status = AssignmentStatus::kUnthemed;
  std::string theme_id;  // set iff status is themed
  int round = 1;
  std::string note;
  std::vector<std::string> reviewed_samples;

  friend bool operator==(const TermAssignment&, const TermAssignment&) = default;
};

struct CodingSession {
  std::string partition;
  int current_round = 1;
  std::size_t total = 0;
  std::size_t unthemed = 0;
  std::size_t themed = 0;
  std::size_t ignored = 0;
  // Round-one assignments not yet revisited in round two.
  std::size_t review_pending = 0;
};

struct AuditEvent {
  std::uint64_t seq = 0;
  std::string timestamp;
  std::string kind;  // theme_created | theme_deleted | assigned | round_advanced
  nlohmann::ordered_json payload;
};

/// The ten themes seeded into every new codebook.
inline const std::vector<Theme>& seeded_themes() {
  static const std::vector<Theme> themes = [] {
    std::vector<std::pair<const char*, const char*>> rows{
        {"geographic-names", "Geographic names"},
        {"local-language-or-slang", "Local language or slang"},
        {"politics", "Politics"},
        {"news-sources", "News sources"},
        {"health-services", "Health services"},
        {"vaccine-names-or-manufacturers", "Vaccine names or manufacturers"},
        {"lockdown", "Lockdown"},
        {"vaccine-rollout-arrangements", "Vaccine rollout arrangements"},
        {"qualifying-for-a-vaccine", "Qualifying for a vaccine"},
        {"medical-experts", "Medical experts"},
    };
    std::vector<Theme> out;
    for (auto [id, name] : rows) out.push_back({id, name, "", true});
    return out;
  }();
  return themes;
}

inline nlohmann::ordered_json to_json(const Theme& t) {
  return {{"theme_id", t.theme_id}, {"name", t.name}, {"description", t.description}, {"seeded", t.seeded}};
}

inline Theme theme_from_json(const nlohmann::json& j) {
  return {j.at("theme_id").get<std::string>(), j.at("name").get<std::string>(),
          j.value("description", std::string{}), j.value("seeded", false)};
}

inline nlohmann::ordered_json to_json(const TermAssignment& a) {
  nlohmann::ordered_json j{{"term", a.term},   {"partition", a.partition}, {"status", to_string(a.status)},
                           {"theme_id", a.status == AssignmentStatus::kThemed ? nlohmann::ordered_json(a.theme_id)
                                                                              : nlohmann::ordered_json(nullptr)},
                           {"round", a.round}, {"note", a.note}};
  j["reviewed_samples"] = a.reviewed_samples;
  return j;
}

inline TermAssignment assignment_from_json(const nlohmann::json& j) {
  TermAssignment a;
  a.term = j.at("term").get<std::string>();
  a.partition = j.at("partition").get<std::string>();
  auto status = parse_status(j.at("status").get<std::string>());
  if (!status) throw std::invalid_argument("assignment: unknown status");
  a.status = *status;
  if (j.contains("theme_id") && j["theme_id"].is_string()) a.theme_id = j["theme_id"].get<std::string>();
  a.round = j.at("round").get<int>();
  a.note = j.value("note", std::string{});
  if (j.contains("reviewed_samples")) a.reviewed_samples = j["reviewed_samples"].get<std::vector<std::string>>();
  return a;
}

inline nlohmann::ordered_json to_json(const CodingSession& s) {
  return {{"partition", s.partition}, {"round", s.current_round},  {"total", s.total},
          {"unthemed", s.unthemed},   {"themed", s.themed},         {"ignored", s.ignored},
          {"review_pending", s.review_pending}};
}

inline nlohmann::ordered_json to_json(const AuditEvent& e) {
  return {{"seq", e.seq}, {"timestamp", e.timestamp}, {"kind", e.kind}, {"payload", e.payload}};
}

inline AuditEvent audit_event_from_json(const nlohmann::json& j) {
  return {j.at("seq").get<std::uint64_t>(), j.at("timestamp").get<std::string>(), j.at("kind").get<std::string>(),
          nlohmann::ordered_json::parse(j.at("payload").dump())};
}

/// State reconstructed from the event log.
struct CodebookState {
  std::vector<Theme> themes;
  std::map<std::pair<std::string, std::string>, TermAssignment> assignments;  // (partition, term)
  std::map<std::string, int> rounds;

  const Theme* find_theme(std::string_view id) const {
    for (const auto& t : themes)
      if (t.theme_id == id) return &t;
    return nullptr;
  }

  void apply(const AuditEvent& e) {
    if (e.kind == "theme_created") {
      themes.push_back(theme_from_json(e.payload));
    } else if (e.kind == "theme_deleted") {
      const auto id = e.payload.at("theme_id").get<std::string>();
      std::erase_if(themes, [&](const Theme& t) { return t.theme_id == id; });
    } else if (e.kind == "assigned") {
      auto a = assignment_from_json(e.payload);
      auto key = std::make_pair(a.partition, a.term);
      assignments.insert_or_assign(std::move(key), std::move(a));
    } else if (e.kind == "round_advanced") {
      rounds[e.payload.at("partition").get<std::string>()] = e.payload.at("round").get<int>();
    } else {
      throw std::invalid_argument("codebook log: unknown event kind '" + e.kind + "'");
    }
  }

  friend bool operator==(const CodebookState&, const CodebookState&) = default;
};

inline CodebookState replay(const std::vector<AuditEvent>& log) {
  CodebookState state;
  for (const auto& e : log) state.apply(e);
  return state;
}

inline std::string utc_now_iso() {
  const auto now = std::chrono::floor<std::chrono::milliseconds>(std::chrono::system_clock::now());
  const auto day = std::chrono::floor<std::chrono::days>(now);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{now - day};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()), static_cast<int>(hms.subseconds().count()));
  return buf;
}

inline constexpr std::string_view kIgnoredLabel = "IGNORED";
inline constexpr std::string_view kUnthemedLabel = "UNTHEMED";

struct ExportBundle {
  std::map<std::string, std::string> files;  // file name -> content
  bool partial = false;
};

/// Shared codebook across all partitions. Writes are serialized; reads may run
/// concurrently. When backed by a file, every event is appended and flushed
/// before the call returns.
class Codebook {
 public:
  using Clock = std::function<std::string()>;

  struct Options {
    std::optional<std::filesystem::path> store_path;
    Clock clock;
    bool seed_themes = true;
  };

  Codebook() : Codebook(Options{}) {}

  explicit Codebook(Options opts) : clock_(opts.clock ? std::move(opts.clock) : Clock(utc_now_iso)) {
    if (opts.store_path) {
      path_ = *opts.store_path;
      if (std::filesystem::exists(*path_)) {
        load(*path_);
        return;
      }
    }
    if (opts.seed_themes)
      for (const auto& t : seeded_themes()) record("theme_created", to_json(t));
  }

  Codebook(const Codebook&) = delete;
  Codebook& operator=(const Codebook&) = delete;

  // Themes ---------------------------------------------------------------

  std::vector<Theme> themes() const {
    std::shared_lock lock(mu_);
    return state_.themes;
  }

  Theme create_theme(std::string_view name, std::string_view description = {}) {
    std::unique_lock lock(mu_);
    const std::string trimmed(text::trim(name));
    if (trimmed.empty()) throw CodebookError(CodebookError::Kind::kInvalid, "theme name is empty");
    if (trimmed == kIgnoredLabel || trimmed == kUnthemedLabel)
      throw CodebookError(CodebookError::Kind::kInvalid, "theme name '" + trimmed + "' is reserved");
    const std::string folded = text::casefold(trimmed);
    for (const auto& t : state_.themes)
      if (text::casefold(t.name) == folded)
        throw CodebookError(CodebookError::Kind::kConflict, "theme '" + trimmed + "' already exists");
    Theme t{unique_id(slugify(trimmed)), trimmed, std::string(description), false};
    record("theme_created", to_json(t));
    return t;
  }

  /// Deletes a theme that no current assignment uses.
  void delete_theme(std::string_view theme_id) {
    std::unique_lock lock(mu_);
    if (!state_.find_theme(theme_id))
      throw CodebookError(CodebookError::Kind::kNotFound, "unknown theme '" + std::string(theme_id) + "'");
    std::vector<std::string> users;
    for (const auto& [key, a] : state_.assignments)
      if (a.status == AssignmentStatus::kThemed && a.theme_id == theme_id) users.push_back(key.first + ":" + key.second);
    if (!users.empty())
      throw CodebookError(CodebookError::Kind::kConflict,
                          "theme '" + std::string(theme_id) + "' is still assigned to " + std::to_string(users.size()) +
                              " term(s)",
                          users);
    record("theme_deleted", {{"theme_id", std::string(theme_id)}});
  }

  // Ranked term lists (pipeline output, not logged) -----------------------

  void set_term_list(const std::string& partition, std::vector<TermScore> terms) {
    std::unique_lock lock(mu_);
    term_lists_[partition] = std::move(terms);
  }

  std::vector<std::string> partitions() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [p, _] : term_lists_) out.push_back(p);
    return out;
  }

  std::vector<TermScore> term_list(const std::string& partition) const {
    std::shared_lock lock(mu_);
    auto it = term_lists_.find(partition);
    if (it == term_lists_.end())
      throw CodebookError(CodebookError::Kind::kNotFound, "unknown partition '" + partition + "'");
    return it->second;
  }

  // Coding ----------------------------------------------------------------

  /// Replaces the current assignment of (term, partition); the previous one
  /// stays in the audit log.
  TermAssignment assign_term(TermAssignment a) {
    std::unique_lock lock(mu_);
    const auto list = term_lists_.find(a.partition);
    if (list == term_lists_.end())
      throw CodebookError(CodebookError::Kind::kNotFound, "unknown partition '" + a.partition + "'");
    const bool listed = std::any_of(list->second.begin(), list->second.end(),
                                    [&](const TermScore& s) { return s.term == a.term; });
    if (!listed)
      throw CodebookError(CodebookError::Kind::kInvalid,
                          "term '" + a.term + "' is not in the ranked list for " + a.partition, {a.term});
    if (a.status == AssignmentStatus::kThemed) {
      if (!state_.find_theme(a.theme_id))
        throw CodebookError(CodebookError::Kind::kNotFound, "unknown theme '" + a.theme_id + "'");
    } else if (!a.theme_id.empty()) {
      throw CodebookError(CodebookError::Kind::kInvalid, "a theme can only accompany status 'themed'");
    }
    const int current = round_of(a.partition);
    if (a.round != current)
      throw CodebookError(CodebookError::Kind::kConflict, "round " + std::to_string(a.round) +
                                                               " does not match the session's current round " +
                                                               std::to_string(current));
    record("assigned", to_json(a));
    return a;
  }

  /// Moves a partition to round two once no listed term is unthemed.
  CodingSession advance_round(const std::string& partition) {
    std::unique_lock lock(mu_);
    if (!term_lists_.count(partition))
      throw CodebookError(CodebookError::Kind::kNotFound, "unknown partition '" + partition + "'");
    if (round_of(partition) != 1)
      throw CodebookError(CodebookError::Kind::kConflict, partition + " is already in round 2");
    std::vector<std::string> unthemed;
    for (const auto& s : term_lists_.at(partition)) {
      auto it = state_.assignments.find({partition, s.term});
      if (it == state_.assignments.end() || it->second.status == AssignmentStatus::kUnthemed)
        unthemed.push_back(s.term);
    }
    if (!unthemed.empty())
      throw CodebookError(CodebookError::Kind::kConflict,
                          "round 1 is incomplete for " + partition + "; unthemed: " + text::join(unthemed, ", "),
                          unthemed);
    record("round_advanced", {{"partition", partition}, {"round", 2}});
    return session_locked(partition);
  }

  CodingSession session(const std::string& partition) const {
    std::shared_lock lock(mu_);
    if (!term_lists_.count(partition))
      throw CodebookError(CodebookError::Kind::kNotFound, "unknown partition '" + partition + "'");
    return session_locked(partition);
  }

  std::vector<CodingSession> progress() const {
    std::shared_lock lock(mu_);
    std::vector<CodingSession> out;
    for (const auto& [p, _] : term_lists_) out.push_back(session_locked(p));
    return out;
  }

  std::optional<TermAssignment> assignment(const std::string& partition, const std::string& term) const {
    std::shared_lock lock(mu_);
    auto it = state_.assignments.find({partition, term});
    if (it == state_.assignments.end()) return std::nullopt;
    return it->second;
  }

  CodebookState state() const {
    std::shared_lock lock(mu_);
    return state_;
  }

  std::vector<AuditEvent> audit_log() const {
    std::shared_lock lock(mu_);
    return log_;
  }

  // Reports ---------------------------------------------------------------

  /// Per-partition term files, the theme-by-partition matrix, the theme list
  /// and a status file. Partitions without any coding still export, flagged partial.
  ExportBundle export_report() const {
    std::shared_lock lock(mu_);
    ExportBundle bundle;

    std::string themes_csv = csv::row({"theme_id", "name", "description"});
    for (const auto& t : state_.themes) themes_csv += csv::row({t.theme_id, t.name, t.description});
    bundle.files["themes.csv"] = std::move(themes_csv);

    std::map<std::string, std::map<std::string, std::size_t>> matrix;  // theme_id -> partition -> count
    std::string status_csv = csv::row({"partition", "round", "unthemed", "themed", "ignored", "partial"});
    for (const auto& [partition, list] : term_lists_) {
      std::string file = csv::row({"rank", "term", "chi2", "p", "theme", "note"});
      for (const auto& s : list) {
        std::string label(kUnthemedLabel), note;
        auto it = state_.assignments.find({partition, s.term});
        if (it != state_.assignments.end()) {
          note = it->second.note;
          if (it->second.status == AssignmentStatus::kThemed) {
            label = state_.find_theme(it->second.theme_id)->name;
            ++matrix[it->second.theme_id][partition];
          } else if (it->second.status == AssignmentStatus::kIgnoredMultiContext) {
            label = kIgnoredLabel;
          }
        }
        file += csv::row({std::to_string(s.rank), s.term, csv::format_double(s.chi2), csv::format_double(s.p_value),
                          label, note});
      }
      bundle.files["terms_" + partition + ".csv"] = std::move(file);
      const auto sess = session_locked(partition);
      const bool partial = sess.unthemed > 0;
      bundle.partial = bundle.partial || partial;
      status_csv += csv::row({partition, std::to_string(sess.current_round), std::to_string(sess.unthemed),
                              std::to_string(sess.themed), std::to_string(sess.ignored), partial ? "true" : "false"});
    }
    bundle.files["status.csv"] = std::move(status_csv);

    std::vector<std::string> header{"theme"};
    for (const auto& [p, _] : term_lists_) header.push_back(p);
    std::string matrix_csv = csv::row(header);
    for (const auto& t : state_.themes) {
      std::vector<std::string> row{t.name};
      for (const auto& [p, _] : term_lists_) {
        std::size_t n = 0;
        if (auto it = matrix.find(t.theme_id); it != matrix.end())
          if (auto jt = it->second.find(p); jt != it->second.end()) n = jt->second;
        row.push_back(std::to_string(n));
      }
      matrix_csv += csv::row(row);
    }
    bundle.files["theme_matrix.csv"] = std::move(matrix_csv);
    return bundle;
  }

  ExportBundle export_report(const std::filesystem::path& dir) const {
    auto bundle = export_report();
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : bundle.files) {
      std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
      out << content;
      if (!out) throw std::runtime_error("export: cannot write " + (dir / name).string());
    }
    return bundle;
  }

  /// Rebuilds an in-memory codebook from an exported bundle. Exporting the
  /// result reproduces the bundle byte for byte.
  static std::unique_ptr<Codebook> import_report(const std::map<std::string, std::string>& files) {
    auto cb = std::make_unique<Codebook>(Options{std::nullopt, {}, false});
    const auto rows = [&](const std::string& name) {
      auto it = files.find(name);
      if (it == files.end()) throw std::invalid_argument("import: missing " + name);
      std::istringstream in(it->second);
      std::vector<std::vector<std::string>> out;
      csv::read_row(in);
      while (auto r = csv::read_row(in)) out.push_back(std::move(*r));
      return out;
    };

    std::map<std::string, std::string> theme_by_name;
    for (const auto& r : rows("themes.csv")) {
      if (r.size() != 3) throw std::invalid_argument("import: themes.csv needs 3 columns");
      const bool seeded = std::any_of(seeded_themes().begin(), seeded_themes().end(),
                                      [&](const Theme& t) { return t.theme_id == r[0] && t.name == r[1]; });
      cb->record("theme_created", to_json(Theme{r[0], r[1], r[2], seeded}));
      theme_by_name[r[1]] = r[0];
    }
    std::vector<std::pair<std::string, int>> rounds;
    for (const auto& r : rows("status.csv")) {
      if (r.size() != 6) throw std::invalid_argument("import: status.csv needs 6 columns");
      const std::string& partition = r[0];
      std::vector<TermScore> list;
      std::vector<TermAssignment> pending;
      for (const auto& t : rows("terms_" + partition + ".csv")) {
        if (t.size() != 6) throw std::invalid_argument("import: term file needs 6 columns");
        TermScore s;
        s.rank = static_cast<std::size_t>(csv::parse_int(t[0]));
        s.term = t[1];
        s.partition = partition;
        s.chi2 = csv::parse_double(t[2]);
        s.p_value = csv::parse_double(t[3]);
        s.significant = true;
        list.push_back(s);
        TermAssignment a{t[1], partition, AssignmentStatus::kUnthemed, "", 1, t[5], {}};
        if (t[4] == kIgnoredLabel) {
          a.status = AssignmentStatus::kIgnoredMultiContext;
        } else if (t[4] != kUnthemedLabel) {
          auto it = theme_by_name.find(t[4]);
          if (it == theme_by_name.end()) throw std::invalid_argument("import: unknown theme '" + t[4] + "'");
          a.status = AssignmentStatus::kThemed;
          a.theme_id = it->second;
        } else if (a.note.empty()) {
          continue;
        }
        pending.push_back(std::move(a));
      }
      cb->set_term_list(partition, std::move(list));
      for (auto& a : pending) cb->assign_term(std::move(a));
      rounds.emplace_back(partition, static_cast<int>(csv::parse_int(r[1])));
    }
    for (const auto& [partition, round] : rounds)
      if (round == 2) cb->advance_round(partition);
    return cb;
  }

  static std::unique_ptr<Codebook> import_report(const std::filesystem::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
      std::ifstream in(entry.path(), std::ios::binary);
      files[entry.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
    }
    return import_report(files);
  }

 private:
  static std::string slugify(std::string_view name) {
    std::string out;
    for (char c : text::ascii_lower(name)) {
      if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
        out.push_back(c);
      } else if (!out.empty() && out.back() != '-') {
        out.push_back('-');
      }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "theme" : out;
  }

  std::string unique_id(const std::string& base) const {
    std::string id = base;
    for (int n = 2; state_.find_theme(id); ++n) id = base + "-" + std::to_string(n);
    return id;
  }

  int round_of(const std::string& partition) const {
    auto it = state_.rounds.find(partition);
    return it == state_.rounds.end() ? 1 : it->second;
  }

  CodingSession session_locked(const std::string& partition) const {
    CodingSession s;
    s.partition = partition;
    s.current_round = round_of(partition);
    for (const auto& term : term_lists_.at(partition)) {
      ++s.total;
      auto it = state_.assignments.find({partition, term.term});
      if (it == state_.assignments.end() || it->second.status == AssignmentStatus::kUnthemed) {
        ++s.unthemed;
      } else if (it->second.status == AssignmentStatus::kThemed) {
        ++s.themed;
      } else {
        ++s.ignored;
      }
      if (s.current_round == 2 && it != state_.assignments.end() && it->second.round == 1) ++s.review_pending;
    }
    return s;
  }

  void record(std::string kind, nlohmann::ordered_json payload) {
    AuditEvent e{log_.size() + 1, clock_(), std::move(kind), std::move(payload)};
    if (path_) {
      std::ofstream out(*path_, std::ios::app | std::ios::binary);
      out << to_json(e).dump() << '\n';
      out.flush();
      if (!out) throw std::runtime_error("codebook: cannot append to " + path_->string());
    }
    state_.apply(e);
    log_.push_back(std::move(e));
  }

  void load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("codebook: cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded())
        throw std::runtime_error("codebook: corrupt event at " + path.string() + ":" + std::to_string(line_no));
      auto e = audit_event_from_json(j);
      state_.apply(e);
      log_.push_back(std::move(e));
    }
  }

  mutable std::shared_mutex mu_;
  Clock clock_;
  std::optional<std::filesystem::path> path_;
  CodebookState state_;
  std::vector<AuditEvent> log_;
  std::map<std::string, std::vector<TermScore>> term_lists_;
};

}  // namespace wata
