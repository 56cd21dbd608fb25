#pragma once

// Readers and writers for the TREC file family: qrels (4 columns), runs
// (6 columns), and id/text stores for queries and passages (TSV or JSON-lines).

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "json.hpp"
#include "umbrela/errors.hpp"

namespace umbrela {

// Ordinal TREC DL grade: 0 irrelevant, 1 related, 2 highly relevant,
// 3 perfectly relevant.
class RelevanceLabel {
 public:
  static constexpr int kLevels = 4;

  constexpr explicit RelevanceLabel(long long value) : value_(static_cast<int>(value)) {
    if (value < 0 || value >= kLevels) throw InvalidLabel(value);
  }

  constexpr int value() const noexcept { return value_; }
  constexpr auto operator<=>(const RelevanceLabel&) const = default;

 private:
  int value_;
};

struct QrelsKey {
  std::string query_id;
  std::string doc_id;
  auto operator<=>(const QrelsKey&) const = default;
};

struct HumanProvenance {
  bool operator==(const HumanProvenance&) const = default;
};
struct ModelProvenance {
  std::string model_name;
  std::string prompt_name;
  bool operator==(const ModelProvenance&) const = default;
};
using Provenance = std::variant<HumanProvenance, ModelProvenance>;

inline std::string provenance_name(const Provenance& p) {
  if (std::holds_alternative<HumanProvenance>(p)) return "human";
  const auto& m = std::get<ModelProvenance>(p);
  return "model:" + m.model_name + "/" + m.prompt_name;
}

namespace detail {

inline constexpr std::string_view kAsciiSpace = " \t\r\n\v\f";

inline bool is_token(std::string_view s) {
  return !s.empty() && s.find_first_of(kAsciiSpace) == std::string_view::npos;
}

inline void require_token(std::string_view s) {
  if (!is_token(s)) throw InvalidIdentifier(std::string(s));
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    pos = line.find_first_not_of(kAsciiSpace, pos);
    if (pos == std::string_view::npos) break;
    auto end = line.find_first_of(kAsciiSpace, pos);
    if (end == std::string_view::npos) end = line.size();
    out.push_back(line.substr(pos, end - pos));
    pos = end;
  }
  return out;
}

inline bool is_blank(std::string_view line) {
  return line.find_first_not_of(kAsciiSpace) == std::string_view::npos;
}

// Reads the next line, stripping a UTF-8 byte-order mark from the first one.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (line_no_ == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    return true;
  }
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

template <typename Int>
inline bool parse_int(std::string_view s, Int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Qrels

class QrelsSet {
 public:
  using Map = std::map<QrelsKey, RelevanceLabel>;
  using const_iterator = Map::const_iterator;

  QrelsSet() = default;
  explicit QrelsSet(Provenance provenance) : provenance_(std::move(provenance)) {}

  // Throws DuplicateEntry if the key is already present.
  void insert(std::string query_id, std::string doc_id, RelevanceLabel label) {
    detail::require_token(query_id);
    detail::require_token(doc_id);
    QrelsKey key{std::move(query_id), std::move(doc_id)};
    auto [it, inserted] = entries_.try_emplace(std::move(key), label);
    if (!inserted) throw DuplicateEntry(it->first.query_id, it->first.doc_id);
  }

  const RelevanceLabel* find(const QrelsKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }
  bool contains(const QrelsKey& key) const { return entries_.contains(key); }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const_iterator begin() const { return entries_.begin(); }
  const_iterator end() const { return entries_.end(); }
  const Map& entries() const noexcept { return entries_; }

  const Provenance& provenance() const noexcept { return provenance_; }
  void set_provenance(Provenance p) { provenance_ = std::move(p); }

  // Sorted, distinct query ids.
  std::vector<std::string> query_ids() const {
    std::vector<std::string> ids;
    for (const auto& [key, _] : entries_) {
      if (ids.empty() || ids.back() != key.query_id) ids.push_back(key.query_id);
    }
    return ids;
  }

  // doc_id -> grade for a single query.
  std::map<std::string, int> judged_for(const std::string& query_id) const {
    std::map<std::string, int> out;
    for (auto it = entries_.lower_bound(QrelsKey{query_id, ""});
         it != entries_.end() && it->first.query_id == query_id; ++it) {
      out.emplace(it->first.doc_id, it->second.value());
    }
    return out;
  }

  bool operator==(const QrelsSet& other) const {
    return entries_ == other.entries_ && provenance_ == other.provenance_;
  }

 private:
  Map entries_;
  Provenance provenance_ = HumanProvenance{};
};

// `qid iter docid rel`, any run of ASCII whitespace between fields. Blank
// lines are skipped; the iteration column must be present but is ignored.
inline QrelsSet parse_qrels(std::istream& in, Provenance provenance = HumanProvenance{}) {
  QrelsSet qrels(std::move(provenance));
  detail::LineReader reader(in);
  std::string line;
  while (reader.next(line)) {
    if (detail::is_blank(line)) continue;
    const auto n = reader.line_no();
    auto fields = detail::split_ws(line);
    if (fields.size() != 4) {
      throw MalformedLine(n, "expected 4 fields, found " + std::to_string(fields.size()));
    }
    long long grade = 0;
    if (!detail::parse_int(fields[3], grade)) {
      throw MalformedLine(n, "label '" + std::string(fields[3]) + "' is not an integer");
    }
    if (grade < 0 || grade >= RelevanceLabel::kLevels) throw LabelOutOfRange(n, grade);
    qrels.insert(std::string(fields[0]), std::string(fields[2]), RelevanceLabel(grade));
  }
  return qrels;
}

inline QrelsSet parse_qrels(std::string_view text, Provenance provenance = HumanProvenance{}) {
  std::istringstream in{std::string(text)};
  return parse_qrels(in, std::move(provenance));
}

inline QrelsSet load_qrels_file(const std::filesystem::path& path,
                                Provenance provenance = HumanProvenance{}) {
  auto in = detail::open_input(path);
  return parse_qrels(in, std::move(provenance));
}

inline void write_qrels(std::ostream& out, const QrelsSet& qrels, std::string_view iteration = "0") {
  for (const auto& [key, label] : qrels) {
    out << key.query_id << ' ' << iteration << ' ' << key.doc_id << ' ' << label.value() << '\n';
  }
}

inline std::string write_qrels(const QrelsSet& qrels, std::string_view iteration = "0") {
  std::ostringstream out;
  write_qrels(out, qrels, iteration);
  return out.str();
}

// ---------------------------------------------------------------------------
// Runs

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;
  bool operator==(const RankedDoc&) const = default;
};

struct SystemRun {
  std::string run_tag;
  // Each list is ordered by descending score with ranks 1..n.
  std::map<std::string, std::vector<RankedDoc>> rankings;

  std::vector<std::string> ranked_doc_ids(const std::string& query_id) const {
    std::vector<std::string> ids;
    auto it = rankings.find(query_id);
    if (it == rankings.end()) return ids;
    ids.reserve(it->second.size());
    for (const auto& d : it->second) ids.push_back(d.doc_id);
    return ids;
  }

  bool operator==(const SystemRun&) const = default;
};

// Sorts by score descending, then input rank ascending, then doc_id, and
// renumbers ranks 1..n.
inline void normalize_ranking(std::vector<RankedDoc>& docs) {
  std::sort(docs.begin(), docs.end(), [](const RankedDoc& a, const RankedDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.doc_id < b.doc_id;
  });
  for (std::size_t i = 0; i < docs.size(); ++i) docs[i].rank = static_cast<int>(i + 1);
}

// `qid Q0 docid rank score tag`. The tag must be identical on every line.
inline SystemRun parse_run(std::istream& in) {
  SystemRun run;
  std::map<std::string, std::set<std::string>> seen;
  bool have_tag = false;
  detail::LineReader reader(in);
  std::string line;
  while (reader.next(line)) {
    if (detail::is_blank(line)) continue;
    const auto n = reader.line_no();
    auto fields = detail::split_ws(line);
    if (fields.size() != 6) {
      throw MalformedLine(n, "expected 6 fields, found " + std::to_string(fields.size()));
    }
    RankedDoc doc;
    doc.doc_id = std::string(fields[2]);
    if (!detail::parse_int(fields[3], doc.rank)) {
      throw MalformedLine(n, "rank '" + std::string(fields[3]) + "' is not an integer");
    }
    if (!detail::parse_double(fields[4], doc.score)) {
      throw MalformedLine(n, "score '" + std::string(fields[4]) + "' is not a finite number");
    }
    if (!have_tag) {
      run.run_tag = std::string(fields[5]);
      have_tag = true;
    } else if (fields[5] != run.run_tag) {
      throw MixedRunTags(n, run.run_tag, std::string(fields[5]));
    }
    std::string qid(fields[0]);
    if (!seen[qid].insert(doc.doc_id).second) throw DuplicateDoc(qid, doc.doc_id);
    run.rankings[qid].push_back(std::move(doc));
  }
  if (!have_tag) throw EmptyRun();
  for (auto& [_, docs] : run.rankings) normalize_ranking(docs);
  return run;
}

inline SystemRun parse_run(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_run(in);
}

inline SystemRun load_run_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_run(in);
}

inline void write_run(std::ostream& out, const SystemRun& run) {
  for (const auto& [qid, docs] : run.rankings) {
    for (const auto& d : docs) {
      out << qid << " Q0 " << d.doc_id << ' ' << d.rank << ' ' << detail::format_double(d.score)
          << ' ' << run.run_tag << '\n';
    }
  }
}

inline std::string write_run(const SystemRun& run) {
  std::ostringstream out;
  write_run(out, run);
  return out.str();
}

// Every regular, non-hidden file in `dir`, loaded in filename order.
inline std::vector<SystemRun> load_runs_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().filename().string().starts_with(".")) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SystemRun> runs;
  runs.reserve(files.size());
  for (const auto& f : files) {
    try {
      runs.push_back(load_run_file(f));
    } catch (const ParseError& e) {
      throw ParseError(f.filename().string() + ": " + e.what());
    }
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Query / passage stores

class TextStore {
 public:
  void insert(std::string id, std::string text, std::size_t line_no = 0) {
    if (id.empty()) throw MalformedRecord(line_no, "empty id");
    if (text.empty()) throw MalformedRecord(line_no, "empty text for id " + id);
    auto [it, inserted] = texts_.try_emplace(std::move(id), std::move(text));
    if (!inserted) throw DuplicateId(it->first);
  }

  const std::string* find(const std::string& id) const {
    auto it = texts_.find(id);
    return it == texts_.end() ? nullptr : &it->second;
  }
  std::size_t size() const noexcept { return texts_.size(); }
  auto begin() const { return texts_.begin(); }
  auto end() const { return texts_.end(); }

 private:
  std::map<std::string, std::string> texts_;
};

using QueryStore = TextStore;
using PassageStore = TextStore;

namespace detail {

inline std::string json_scalar_to_id(const nlohmann::json& v, std::size_t line_no) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw MalformedRecord(line_no, "id must be a string or integer");
}

inline const nlohmann::json* first_key(const nlohmann::json& obj,
                                       std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it != obj.end()) return &*it;
  }
  return nullptr;
}

}  // namespace detail

// TSV (`id<TAB>text`) or JSON-lines (`{"id": ..., "text": ...}`), chosen by
// the first non-BOM byte. JSON-lines also accepts the common id aliases
// "docid"/"qid"/"_id" and text aliases "doc"/"contents"/"query".
inline TextStore load_text_store(std::istream& in) {
  TextStore store;
  detail::LineReader reader(in);
  std::string line;
  bool decided = false;
  bool json_lines = false;
  while (reader.next(line)) {
    const auto n = reader.line_no();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!decided) {
      if (line.empty()) continue;
      json_lines = line.front() == '{';
      decided = true;
    }
    if (line.empty()) continue;
    if (json_lines) {
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        throw MalformedRecord(n, "invalid JSON");
      }
      if (!obj.is_object()) throw MalformedRecord(n, "expected a JSON object");
      const auto* id = detail::first_key(obj, {"id", "docid", "qid", "_id"});
      const auto* text = detail::first_key(obj, {"text", "doc", "contents", "query"});
      if (id == nullptr) throw MalformedRecord(n, "missing id");
      if (text == nullptr || !text->is_string()) throw MalformedRecord(n, "missing text");
      store.insert(detail::json_scalar_to_id(*id, n), text->get<std::string>(), n);
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw MalformedRecord(n, "no tab separator");
      store.insert(line.substr(0, tab), line.substr(tab + 1), n);
    }
  }
  return store;
}

inline TextStore load_text_store(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_text_store(in);
}

inline TextStore load_text_store_file(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return load_text_store(in);
}

inline QueryStore load_queries(std::istream& in) { return load_text_store(in); }
inline PassageStore load_passages(std::istream& in) { return load_text_store(in); }
inline QueryStore load_queries(std::string_view text) { return load_text_store(text); }
inline PassageStore load_passages(std::string_view text) { return load_text_store(text); }

// ---------------------------------------------------------------------------
// Dataset statistics

struct DatasetStats {
  std::size_t n_systems = 0;
  std::size_t n_queries = 0;
  std::array<std::size_t, RelevanceLabel::kLevels> label_counts{};

  std::size_t total() const {
    std::size_t t = 0;
    for (auto c : label_counts) t += c;
    return t;
  }
  bool operator==(const DatasetStats&) const = default;
};

inline DatasetStats dataset_stats(const QrelsSet& qrels, const std::vector<SystemRun>& runs) {
  DatasetStats stats;
  stats.n_systems = runs.size();
  stats.n_queries = qrels.query_ids().size();
  for (const auto& [_, label] : qrels) ++stats.label_counts[label.value()];
  return stats;
}

inline nlohmann::json to_json(const DatasetStats& s) {
  return nlohmann::json{{"n_systems", s.n_systems},
                        {"n_queries", s.n_queries},
                        {"label_counts", s.label_counts},
                        {"n_judgments", s.total()}};
}

// Published statistics for the collections the harness was built around,
// used to validate locally supplied copies.
struct ReferenceDataset {
  std::string_view name;
  DatasetStats stats;
};

inline const std::array<ReferenceDataset, 3>& reference_datasets() {
  static const std::array<ReferenceDataset, 3> kRefs{{
      {"dl19", DatasetStats{36, 43, {5158, 1601, 1804, 697}}},
      {"dl20", DatasetStats{59, 54, {7780, 1940, 1020, 646}}},
      {"llmjudge", DatasetStats{35, 25, {2005, 1233, 808, 377}}},
  }};
  return kRefs;
}

inline const DatasetStats* reference_stats(std::string_view name) {
  for (const auto& r : reference_datasets()) {
    if (r.name == name) return &r.stats;
  }
  return nullptr;
}

}  // namespace umbrela
