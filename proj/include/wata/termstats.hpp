#pragma once

// Differential term detection: a document-frequency index over labelled
// partitions, the 2x2 chi-square test, Benjamini-Hochberg selection and the
// ranked list of over-represented terms per partition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "wata/csv.hpp"
#include "wata/tokenize.hpp"

namespace wata {

using TermId = std::uint32_t;

/// Per-document term sets plus per-partition document frequencies.
/// Every document carries exactly one partition label.
class TermIndex {
 public:
  TermIndex() = default;

  /// Tokenizes `texts` (in parallel for large inputs) and indexes document i
  /// under `labels[i]`. Document i refers to external id `i`.
  static TermIndex build(std::span<const std::string> texts, std::span<const std::string> labels) {
    if (texts.size() != labels.size()) throw std::invalid_argument("TermIndex: texts/labels size mismatch");
    std::vector<std::vector<std::string>> tokenized(texts.size());
    const std::size_t workers =
        texts.size() < 4096 ? 1 : std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    const std::size_t chunk = (texts.size() + workers - 1) / std::max<std::size_t>(workers, 1);
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk, hi = std::min(texts.size(), lo + chunk);
      if (lo >= hi) break;
      jobs.push_back(std::async(std::launch::async, [&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) tokenized[i] = tokenize(texts[i]);
      }));
    }
    for (auto& j : jobs) j.get();

    TermIndex idx;
    for (std::size_t i = 0; i < texts.size(); ++i) idx.add_document(labels[i], tokenized[i], i);
    return idx;
  }

  /// Adds a document whose term list may contain repeats; they are collapsed.
  void add_document(std::string_view label, std::span<const std::string> terms, std::size_t external_id) {
    std::vector<TermId> ids;
    ids.reserve(terms.size());
    for (const auto& t : terms) ids.push_back(intern(t));
    add_document_ids(label, std::move(ids), external_id);
  }

  std::size_t document_count() const { return doc_terms_.size(); }
  std::size_t vocabulary_size() const { return vocab_.size(); }

  std::optional<TermId> id_of(std::string_view term) const {
    auto it = term_ids_.find(std::string(term));
    if (it == term_ids_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& term(TermId id) const { return vocab_.at(id); }

  const std::vector<TermId>& terms_of(std::size_t doc) const { return doc_terms_.at(doc); }
  const std::string& label_of(std::size_t doc) const { return labels_.at(doc_partition_.at(doc)).name; }
  std::size_t external_id(std::size_t doc) const { return doc_external_.at(doc); }

  bool contains(std::size_t doc, TermId id) const {
    const auto& ts = doc_terms_.at(doc);
    return std::binary_search(ts.begin(), ts.end(), id);
  }

  bool has_partition(std::string_view label) const { return label_pos_.count(std::string(label)) != 0; }

  /// Labels in first-seen order.
  std::vector<std::string> partitions() const {
    std::vector<std::string> out;
    for (const auto& p : labels_) out.push_back(p.name);
    return out;
  }

  std::size_t partition_size(std::string_view label) const {
    auto it = label_pos_.find(std::string(label));
    return it == label_pos_.end() ? 0 : labels_[it->second].size;
  }

  std::uint64_t document_frequency(std::string_view label, TermId id) const {
    auto it = label_pos_.find(std::string(label));
    if (it == label_pos_.end()) return 0;
    const auto& df = labels_[it->second].df;
    return id < df.size() ? df[id] : 0;
  }

  std::vector<std::size_t> documents_in(std::string_view label) const {
    std::vector<std::size_t> out;
    auto it = label_pos_.find(std::string(label));
    if (it == label_pos_.end()) return out;
    for (std::size_t d = 0; d < doc_partition_.size(); ++d)
      if (doc_partition_[d] == it->second) out.push_back(d);
    return out;
  }

  /// New index over the documents for which `relabel` yields a label. Term
  /// strings are shared; external ids are preserved.
  TermIndex relabel(const std::function<std::optional<std::string>(std::size_t doc)>& relabel) const {
    TermIndex out;
    out.vocab_ = vocab_;
    out.term_ids_ = term_ids_;
    for (std::size_t d = 0; d < doc_terms_.size(); ++d) {
      auto label = relabel(d);
      if (!label) continue;
      out.add_document_ids(*label, doc_terms_[d], doc_external_[d]);
    }
    return out;
  }

 private:
  struct PartitionStats {
    std::string name;
    std::size_t size = 0;
    std::vector<std::uint32_t> df;
  };

  TermId intern(const std::string& t) {
    auto [it, inserted] = term_ids_.try_emplace(t, static_cast<TermId>(vocab_.size()));
    if (inserted) vocab_.push_back(t);
    return it->second;
  }

  void add_document_ids(std::string_view label, std::vector<TermId> ids, std::size_t external_id) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    auto [pos, inserted] = label_pos_.try_emplace(std::string(label), labels_.size());
    if (inserted) labels_.push_back({std::string(label), 0, {}});
    auto& p = labels_[pos->second];
    ++p.size;
    if (p.df.size() < vocab_.size()) p.df.resize(vocab_.size(), 0);
    for (TermId id : ids) ++p.df[id];
    doc_partition_.push_back(pos->second);
    doc_external_.push_back(external_id);
    doc_terms_.push_back(std::move(ids));
  }

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TermId> term_ids_;
  std::vector<PartitionStats> labels_;
  std::unordered_map<std::string, std::size_t> label_pos_;
  std::vector<std::vector<TermId>> doc_terms_;
  std::vector<std::size_t> doc_partition_;
  std::vector<std::size_t> doc_external_;
};

/// Rows: target / comparison. Columns: term present / absent.
struct ContingencyTable {
  std::uint64_t a = 0;  // target, present
  std::uint64_t b = 0;  // target, absent
  std::uint64_t c = 0;  // comparison, present
  std::uint64_t d = 0;  // comparison, absent

  std::uint64_t total() const { return a + b + c + d; }
  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

/// All partitions other than `target`, including the unassigned one.
inline std::vector<std::string> rest_of(const TermIndex& index, std::string_view target) {
  std::vector<std::string> out;
  for (auto& p : index.partitions())
    if (p != target) out.push_back(std::move(p));
  return out;
}

inline ContingencyTable build_contingency(std::string_view term, std::string_view target,
                                          std::span<const std::string> comparison, const TermIndex& index) {
  for (const auto& c : comparison)
    if (c == target) throw std::invalid_argument("build_contingency: comparison includes the target partition");
  ContingencyTable t;
  const auto id = index.id_of(term);
  const std::uint64_t n1 = index.partition_size(target);
  std::uint64_t n2 = 0;
  for (const auto& c : comparison) {
    n2 += index.partition_size(c);
    if (id) t.c += index.document_frequency(c, *id);
  }
  if (id) t.a = index.document_frequency(target, *id);
  t.b = n1 - t.a;
  t.d = n2 - t.c;
  return t;
}

/// Pearson chi-square for a 2x2 table without continuity correction.
/// Any zero margin gives 0; an all-zero table is an error.
inline double chi_square(const ContingencyTable& t) {
  if (t.total() == 0) throw std::domain_error("chi_square: empty table");
  const std::uint64_t r1 = t.a + t.b, r2 = t.c + t.d, c1 = t.a + t.c, c2 = t.b + t.d;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) return 0.0;
  // ad - bc is exact in 128 bits for any realistic corpus size.
  const __int128 diff = static_cast<__int128>(t.a) * t.d - static_cast<__int128>(t.b) * t.c;
  const double delta = static_cast<double>(diff);
  const double n = static_cast<double>(t.total());
  return n * (delta / static_cast<double>(r1)) * (delta / static_cast<double>(r2)) / static_cast<double>(c1) /
         static_cast<double>(c2);
}

/// Upper-tail probability of the chi-square distribution with one degree of freedom.
inline double chi_square_p(double chi2) {
  if (!(chi2 >= 0.0)) throw std::domain_error("chi_square_p: statistic must be non-negative");
  return std::erfc(std::sqrt(chi2 / 2.0));
}

/// Largest p-value rejected by the Benjamini-Hochberg step-up rule, or
/// nullopt when nothing is rejected.
inline std::optional<double> benjamini_hochberg_cutoff(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("benjamini_hochberg: alpha must be in (0,1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("benjamini_hochberg: p-value outside [0,1]");
  if (p_values.empty()) return std::nullopt;
  std::vector<double> sorted(p_values.begin(), p_values.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  for (std::size_t k = sorted.size(); k >= 1; --k) {
    if (sorted[k - 1] <= static_cast<double>(k) * alpha / m) return sorted[k - 1];
  }
  return std::nullopt;
}

/// Indices (ascending) of the rejected hypotheses. Every p-value at or below
/// the step-up cutoff is rejected, so ties are never split.
inline std::vector<std::size_t> benjamini_hochberg(std::span<const double> p_values, double alpha) {
  std::vector<std::size_t> out;
  const auto cutoff = benjamini_hochberg_cutoff(p_values, alpha);
  if (!cutoff) return out;
  for (std::size_t i = 0; i < p_values.size(); ++i)
    if (p_values[i] <= *cutoff) out.push_back(i);
  return out;
}

struct TermScore {
  std::string term;
  std::string partition;
  ContingencyTable table;
  double chi2 = 0;
  double p_value = 1;
  bool significant = false;
  std::size_t rank = 0;

  friend bool operator==(const TermScore&, const TermScore&) = default;
};

/// True when the term's share of target documents exceeds its share of comparison documents.
inline bool over_represented(const ContingencyTable& t) {
  return static_cast<unsigned __int128>(t.a) * (t.c + t.d) > static_cast<unsigned __int128>(t.c) * (t.a + t.b);
}

struct RankOptions {
  double alpha = 0.05;
  std::size_t top_k = 100;
  std::uint64_t min_df = 5;
};

/// Significant over-represented terms of `target` against `comparison`,
/// strongest first (chi2 descending, then larger target count, then term).
inline std::vector<TermScore> rank_terms(std::string_view target, std::span<const std::string> comparison,
                                         const TermIndex& index, const RankOptions& opts = {}) {
  const std::uint64_t n1 = index.partition_size(target);
  std::uint64_t n2 = 0;
  for (const auto& c : comparison) n2 += index.partition_size(c);
  if (n1 == 0) throw std::invalid_argument("rank_terms: target partition '" + std::string(target) + "' is empty");
  if (n2 == 0) throw std::invalid_argument("rank_terms: comparison partitions are empty");

  const std::uint64_t min_df = std::max<std::uint64_t>(opts.min_df, 1);
  std::vector<TermScore> scored;
  std::vector<double> p_values;
  for (TermId id = 0; id < index.vocabulary_size(); ++id) {
    if (index.document_frequency(target, id) < min_df) continue;
    TermScore s;
    s.term = index.term(id);
    s.partition = std::string(target);
    s.table = build_contingency(s.term, target, comparison, index);
    s.chi2 = chi_square(s.table);
    s.p_value = chi_square_p(s.chi2);
    p_values.push_back(s.p_value);
    scored.push_back(std::move(s));
  }
  for (std::size_t i : benjamini_hochberg(p_values, opts.alpha)) scored[i].significant = true;

  std::vector<TermScore> out;
  for (auto& s : scored)
    if (s.significant && over_represented(s.table)) out.push_back(std::move(s));
  std::sort(out.begin(), out.end(), [](const TermScore& x, const TermScore& y) {
    if (x.chi2 != y.chi2) return x.chi2 > y.chi2;
    if (x.table.a != y.table.a) return x.table.a > y.table.a;
    return x.term < y.term;
  });
  if (out.size() > opts.top_k) out.resize(opts.top_k);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

enum class ComparisonMode {
  kRest,      // every other partition, including tweets with no country
  kSelected,  // only the other selected partitions
};

/// Runs rank_terms for each target concurrently. Results follow `targets` order.
inline std::map<std::string, std::vector<TermScore>> rank_partitions(const TermIndex& index,
                                                                     const std::vector<std::string>& targets,
                                                                     ComparisonMode mode, const RankOptions& opts) {
  std::vector<std::future<std::vector<TermScore>>> jobs;
  for (const auto& target : targets) {
    std::vector<std::string> comparison;
    if (mode == ComparisonMode::kRest) {
      comparison = rest_of(index, target);
    } else {
      for (const auto& other : targets)
        if (other != target) comparison.push_back(other);
    }
    jobs.push_back(std::async(std::launch::async, [&index, target, comparison = std::move(comparison), opts] {
      return rank_terms(target, comparison, index, opts);
    }));
  }
  std::map<std::string, std::vector<TermScore>> out;
  for (std::size_t i = 0; i < targets.size(); ++i) out[targets[i]] = jobs[i].get();
  return out;
}

inline const std::vector<std::string>& term_list_header() {
  static const std::vector<std::string> header{"rank", "term", "a", "b", "c", "d", "chi2", "p", "significant"};
  return header;
}

inline std::vector<std::string> term_list_fields(const TermScore& s) {
  return {std::to_string(s.rank),        s.term,
          std::to_string(s.table.a),     std::to_string(s.table.b),
          std::to_string(s.table.c),     std::to_string(s.table.d),
          csv::format_double(s.chi2),    csv::format_double(s.p_value),
          s.significant ? "true" : "false"};
}

inline void write_term_list(std::ostream& out, const std::vector<TermScore>& scores) {
  out << csv::row(term_list_header());
  for (const auto& s : scores) out << csv::row(term_list_fields(s));
}

/// Parses the columns written by write_term_list starting at `offset`.
inline TermScore parse_term_fields(const std::vector<std::string>& f, std::size_t offset, std::string partition) {
  if (f.size() < offset + 9) throw std::invalid_argument("term list: expected 9 columns");
  TermScore s;
  s.rank = static_cast<std::size_t>(csv::parse_int(f[offset]));
  s.term = f[offset + 1];
  s.partition = std::move(partition);
  s.table = {static_cast<std::uint64_t>(csv::parse_int(f[offset + 2])),
             static_cast<std::uint64_t>(csv::parse_int(f[offset + 3])),
             static_cast<std::uint64_t>(csv::parse_int(f[offset + 4])),
             static_cast<std::uint64_t>(csv::parse_int(f[offset + 5]))};
  s.chi2 = csv::parse_double(f[offset + 6]);
  s.p_value = csv::parse_double(f[offset + 7]);
  s.significant = f[offset + 8] == "true";
  return s;
}

inline std::vector<TermScore> read_term_list(std::istream& in, const std::string& partition) {
  std::vector<TermScore> out;
  auto header = csv::read_row(in);
  if (!header || *header != term_list_header()) throw std::invalid_argument("term list: bad header");
  while (auto row = csv::read_row(in)) {
    if (row->size() == 1 && (*row)[0].empty()) continue;
    out.push_back(parse_term_fields(*row, 0, partition));
  }
  return out;
}

}  // namespace wata
