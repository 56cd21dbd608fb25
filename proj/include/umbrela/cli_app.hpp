#pragma once

// Command-line front end: `judge`, `evaluate`, `stats`, `extract`,
// `leaderboard`. Kept header-only so tests can drive it in-process via run().

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "umbrela/errors.hpp"
#include "umbrela/judge_engine.hpp"
#include "umbrela/meta_eval.hpp"
#include "umbrela/metrics.hpp"
#include "umbrela/prompt_kit.hpp"
#include "umbrela/score_extract.hpp"
#include "umbrela/trec_io.hpp"

namespace umbrela::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kPartialFailure = 3,
  kEmptyIntersection = 4,
  kValidationMismatch = 5,
};

// ---------------------------------------------------------------------------
// Configuration

struct HarnessConfig {
  struct Dataset {
    std::string name;  // optional: dl19 | dl20 | llmjudge, enables validation
    fs::path qrels;
    fs::path runs_dir;
    fs::path queries;
    fs::path passages;
  } dataset;
  std::string prompt = "umbrela";
  std::string backend = "replay";  // http | replay
  std::string model;
  std::string base_url;
  std::string api_key_env = "LLM_API_KEY";
  double timeout_s = 60.0;
  int max_retries = 5;
  fs::path transcripts;  // replay source
  DecodingConfig decoding;
  fs::path cache;       // transcript cache; defaults to <output_dir>/transcripts.jsonl
  fs::path output_dir;
  std::size_t k = 10;
  std::size_t parallelism = 4;
  Gain gain = Gain::Linear;
  TauVariant tau = TauVariant::B;
  EquivalenceThresholds thresholds;
  std::optional<std::size_t> max_passage_chars;
};

struct FieldDoc {
  const char* key;
  const char* doc;
};

inline const std::vector<FieldDoc>& config_field_docs() {
  static const std::vector<FieldDoc> kDocs = {
      {"dataset.name", "reference collection to validate against: dl19 | dl20 | llmjudge"},
      {"dataset.qrels", "human qrels (TREC 4-column); also the judgment pool"},
      {"dataset.runs_dir", "directory of TREC run files, one system per file"},
      {"dataset.queries", "queries, TSV id<TAB>text or JSON-lines {id,text}"},
      {"dataset.passages", "passages, TSV or JSON-lines"},
      {"prompt", "umbrela | basic"},
      {"backend.kind", "http | replay"},
      {"backend.model", "model name sent to the API and mixed into cache keys"},
      {"backend.base_url", "http: OpenAI-compatible base URL, e.g. https://api.openai.com/v1"},
      {"backend.api_key_env", "http: environment variable holding the API key (LLM_API_KEY)"},
      {"backend.timeout_s", "http: per-request timeout in seconds (60)"},
      {"backend.max_retries", "http: retries on 429/5xx with jittered exponential backoff (5)"},
      {"backend.transcripts", "replay: JSON-lines transcript file to serve outputs from"},
      {"decoding.temperature", "sampling temperature (0)"},
      {"decoding.max_output_tokens", "completion token limit (256)"},
      {"decoding.batch_size", "prompts per request; must be 1"},
      {"cache", "transcript cache file (default <output_dir>/transcripts.jsonl)"},
      {"output_dir", "where judge writes model.qrels, records.jsonl, journal.jsonl, summary.json"},
      {"k", "NDCG cutoff (10)"},
      {"gain", "NDCG gain: linear | exponential"},
      {"tau_variant", "Kendall tau: tau_b (tie-adjusted) | tau_a"},
      {"parallelism", "concurrent in-flight requests (4)"},
      {"max_passage_chars", "truncate passages to this many characters (unset: no truncation)"},
      {"thresholds.tau_rho_eps", "largest non-significant rho/tau difference (0.005)"},
      {"thresholds.kappa_eps", "largest non-significant kappa difference (0.01)"},
  };
  return kDocs;
}

inline std::string config_help_footer() {
  std::ostringstream out;
  out << "Config file fields (JSON; unknown keys are rejected; relative paths resolve "
         "against the config file's directory):\n";
  for (const auto& f : config_field_docs()) {
    std::string key = f.key;
    key.resize(28, ' ');
    out << "  " << key << f.doc << '\n';
  }
  return out.str();
}

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& prefix,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw ConfigError(prefix.empty() ? "<root>" : prefix, "must be a JSON object");
  }
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) throw ConfigError(prefix + key, "unknown config key");
  }
}

template <typename T>
void read_field(const nlohmann::json& obj, const char* key, const std::string& prefix, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(prefix + key, "has the wrong type");
  }
}

inline void read_path(const nlohmann::json& obj, const char* key, const std::string& prefix,
                      const fs::path& base, fs::path& out) {
  std::string s;
  read_field(obj, key, prefix, s);
  if (s.empty()) return;
  fs::path p(s);
  out = p.is_absolute() ? p : base / p;
}

inline Gain parse_gain(const std::string& s) {
  if (s == "linear") return Gain::Linear;
  if (s == "exponential" || s == "exp") return Gain::Exponential;
  throw ConfigError("gain", "expected linear or exponential, got '" + s + "'");
}

inline TauVariant parse_tau_variant(const std::string& s) {
  if (s == "tau_b") return TauVariant::B;
  if (s == "tau_a") return TauVariant::A;
  throw ConfigError("tau_variant", "expected tau_b or tau_a, got '" + s + "'");
}

}  // namespace detail

inline HarnessConfig parse_config(const nlohmann::json& j, const fs::path& base_dir) {
  using detail::read_field;
  using detail::read_path;
  HarnessConfig cfg;
  detail::reject_unknown(j, "", {"dataset", "prompt", "backend", "decoding", "cache",
                                 "output_dir", "k", "gain", "tau_variant", "parallelism",
                                 "max_passage_chars", "thresholds"});
  if (auto it = j.find("dataset"); it != j.end()) {
    detail::reject_unknown(*it, "dataset.", {"name", "qrels", "runs_dir", "queries", "passages"});
    read_field(*it, "name", "dataset.", cfg.dataset.name);
    read_path(*it, "qrels", "dataset.", base_dir, cfg.dataset.qrels);
    read_path(*it, "runs_dir", "dataset.", base_dir, cfg.dataset.runs_dir);
    read_path(*it, "queries", "dataset.", base_dir, cfg.dataset.queries);
    read_path(*it, "passages", "dataset.", base_dir, cfg.dataset.passages);
  }
  read_field(j, "prompt", "", cfg.prompt);
  if (auto it = j.find("backend"); it != j.end()) {
    detail::reject_unknown(*it, "backend.", {"kind", "model", "base_url", "api_key_env",
                                             "timeout_s", "max_retries", "transcripts"});
    read_field(*it, "kind", "backend.", cfg.backend);
    read_field(*it, "model", "backend.", cfg.model);
    read_field(*it, "base_url", "backend.", cfg.base_url);
    read_field(*it, "api_key_env", "backend.", cfg.api_key_env);
    read_field(*it, "timeout_s", "backend.", cfg.timeout_s);
    read_field(*it, "max_retries", "backend.", cfg.max_retries);
    read_path(*it, "transcripts", "backend.", base_dir, cfg.transcripts);
  }
  if (auto it = j.find("decoding"); it != j.end()) {
    detail::reject_unknown(*it, "decoding.", {"temperature", "max_output_tokens", "batch_size"});
    read_field(*it, "temperature", "decoding.", cfg.decoding.temperature);
    read_field(*it, "max_output_tokens", "decoding.", cfg.decoding.max_output_tokens);
    read_field(*it, "batch_size", "decoding.", cfg.decoding.batch_size);
  }
  read_path(j, "cache", "", base_dir, cfg.cache);
  read_path(j, "output_dir", "", base_dir, cfg.output_dir);
  read_field(j, "k", "", cfg.k);
  read_field(j, "parallelism", "", cfg.parallelism);
  if (j.contains("gain")) {
    std::string g;
    read_field(j, "gain", "", g);
    cfg.gain = detail::parse_gain(g);
  }
  if (j.contains("tau_variant")) {
    std::string t;
    read_field(j, "tau_variant", "", t);
    cfg.tau = detail::parse_tau_variant(t);
  }
  if (j.contains("max_passage_chars") && !j.at("max_passage_chars").is_null()) {
    std::size_t n = 0;
    read_field(j, "max_passage_chars", "", n);
    cfg.max_passage_chars = n;
  }
  if (auto it = j.find("thresholds"); it != j.end()) {
    detail::reject_unknown(*it, "thresholds.", {"tau_rho_eps", "kappa_eps"});
    read_field(*it, "tau_rho_eps", "thresholds.", cfg.thresholds.tau_rho_eps);
    read_field(*it, "kappa_eps", "thresholds.", cfg.thresholds.kappa_eps);
  }
  return cfg;
}

inline HarnessConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

namespace detail {

inline void require_file(const fs::path& p, const char* field) {
  if (p.empty()) throw ConfigError(field, "is required");
  if (!fs::is_regular_file(p)) throw ConfigError(field, "no such file " + p.string());
}

inline void require_dir(const fs::path& p, const char* field) {
  if (p.empty()) throw ConfigError(field, "is required");
  if (!fs::is_directory(p)) throw ConfigError(field, "no such directory " + p.string());
}

inline void validate_common(const HarnessConfig& cfg) {
  if (cfg.k == 0) throw ConfigError("k", "must be at least 1");
  if (cfg.parallelism == 0) throw ConfigError("parallelism", "must be at least 1");
  if (cfg.max_passage_chars && *cfg.max_passage_chars == 0) {
    throw ConfigError("max_passage_chars", "must be positive");
  }
  cfg.thresholds.validate();
  try {
    (void)template_by_name(cfg.prompt);
  } catch (const UnknownTemplate&) {
    throw ConfigError("prompt", "unknown template '" + cfg.prompt + "'");
  }
}

}  // namespace detail

inline BackendSpec backend_spec(const HarnessConfig& cfg) {
  if (cfg.model.empty()) throw ConfigError("backend.model", "is required");
  if (cfg.backend == "http") {
    if (cfg.base_url.empty()) throw ConfigError("backend.base_url", "is required for http");
    (void)parse_base_url(cfg.base_url);
    return HttpChatSpec{cfg.base_url, cfg.model, cfg.api_key_env, cfg.timeout_s, cfg.max_retries};
  }
  if (cfg.backend == "replay") {
    detail::require_file(cfg.transcripts, "backend.transcripts");
    return ReplaySpec{cfg.transcripts, cfg.model};
  }
  throw ConfigError("backend.kind", "expected http or replay, got '" + cfg.backend + "'");
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace detail {

inline void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string jsonl(const std::vector<JudgmentRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<JudgmentRecord> load_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<JudgmentRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error&) {
      throw MalformedRecord(n, "invalid JSON in " + path.string());
    }
  }
  return out;
}

inline void emit(const std::string& content, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << content;
  } else {
    write_text_file(out_path, content);
  }
}

inline void warn_reference_mismatch(const HarnessConfig& cfg, const DatasetStats& stats,
                                    std::ostream& err) {
  if (cfg.dataset.name.empty()) return;
  const auto* ref = reference_stats(cfg.dataset.name);
  if (ref == nullptr) {
    err << "warning: no reference statistics for dataset '" << cfg.dataset.name << "'\n";
  } else if (ref->n_queries != stats.n_queries || ref->label_counts != stats.label_counts) {
    err << "warning: " << cfg.dataset.name << " qrels do not match the published statistics\n";
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

struct JudgeSummary {
  std::size_t n_pairs = 0;
  std::size_t n_judged = 0;
  std::size_t n_invalid = 0;
  std::size_t n_failures = 0;
  std::optional<Percentage> invalid_rate;
};

inline int cmd_judge(const HarnessConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::validate_common(cfg);
  cfg.decoding.validate();
  detail::require_file(cfg.dataset.qrels, "dataset.qrels");
  detail::require_file(cfg.dataset.queries, "dataset.queries");
  detail::require_file(cfg.dataset.passages, "dataset.passages");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir", "is required");
  const auto spec = backend_spec(cfg);

  const auto pool = load_qrels_file(cfg.dataset.qrels);
  detail::warn_reference_mismatch(cfg, dataset_stats(pool, {}), err);
  const auto queries = load_text_store_file(cfg.dataset.queries);
  const auto passages = load_text_store_file(cfg.dataset.passages);
  const auto& tmpl = template_by_name(cfg.prompt);
  auto backend = make_backend(spec);

  fs::create_directories(cfg.output_dir);
  TranscriptStore cache(cfg.cache.empty() ? cfg.output_dir / "transcripts.jsonl" : cfg.cache);
  ProgressJournal journal(cfg.output_dir / "journal.jsonl");
  PoolOptions options;
  options.parallelism = cfg.parallelism;
  options.render.max_passage_chars = cfg.max_passage_chars;
  options.journal = &journal;

  auto result = judge_pool(*backend, tmpl, pool, queries, passages, cfg.decoding, cache, options);

  detail::write_text_file(cfg.output_dir / "model.qrels", write_qrels(result.model_qrels));
  detail::write_text_file(cfg.output_dir / "records.jsonl", detail::jsonl(result.records));

  JudgeSummary s;
  s.n_pairs = pool.size();
  s.n_judged = result.records.size();
  s.n_failures = result.failures.size();
  for (const auto& r : result.records) s.n_invalid += is_invalid(r.extraction_method) ? 1 : 0;
  if (!result.records.empty()) s.invalid_rate = invalid_rate(result.records);

  nlohmann::json summary = {
      {"schema_version", kReportSchemaVersion},
      {"model", backend->model_name()},
      {"prompt", std::string(to_string(tmpl.name))},
      {"n_pairs", s.n_pairs},
      {"n_judged", s.n_judged},
      {"n_invalid", s.n_invalid},
      {"invalid_rate_pct", s.invalid_rate ? nlohmann::json(s.invalid_rate->value()) : nlohmann::json()},
      {"n_failures", s.n_failures},
  };
  if (!result.failures.empty()) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : result.failures) {
      failures.push_back({{"query_id", f.key.query_id}, {"doc_id", f.key.doc_id}, {"error", f.error}});
    }
    summary["failures"] = failures;
  }
  detail::write_text_file(cfg.output_dir / "summary.json", summary.dump(2) + "\n");

  out << "judged " << s.n_judged << "/" << s.n_pairs << " pairs, invalid outputs "
      << (s.invalid_rate ? s.invalid_rate->str() : std::string("n/a")) << "%";
  if (s.n_failures > 0) out << ", " << s.n_failures << " failed";
  out << '\n';
  err << "backend calls " << result.backend_calls << ", resumed " << result.resumed
      << ", cache entries " << cache.size() << '\n';
  for (std::size_t i = 0; i < result.failures.size() && i < 10; ++i) {
    err << "  failed " << result.failures[i].key.query_id << " " << result.failures[i].key.doc_id
        << ": " << result.failures[i].error << '\n';
  }
  return result.complete() ? kOk : kPartialFailure;
}

struct EvaluateOptions {
  std::string model_qrels;
  std::string records;
  std::string compare_to;
  std::string scale_tsv;
  double model_params_b = 0.0;
  std::string out;
};

inline int cmd_evaluate(const HarnessConfig& cfg, const EvaluateOptions& opts, std::ostream& out,
                        std::ostream& err) {
  detail::validate_common(cfg);
  detail::require_file(cfg.dataset.qrels, "dataset.qrels");
  detail::require_dir(cfg.dataset.runs_dir, "dataset.runs_dir");
  fs::path model_path = opts.model_qrels;
  if (model_path.empty() && !cfg.output_dir.empty()) model_path = cfg.output_dir / "model.qrels";
  detail::require_file(model_path, "--model-qrels");
  fs::path records_path = opts.records;
  if (records_path.empty() && !cfg.output_dir.empty() &&
      fs::is_regular_file(cfg.output_dir / "records.jsonl")) {
    records_path = cfg.output_dir / "records.jsonl";
  }

  const auto human = load_qrels_file(cfg.dataset.qrels);
  const auto model = load_qrels_file(
      model_path, ModelProvenance{cfg.model.empty() ? "unknown" : cfg.model, cfg.prompt});
  const auto runs = load_runs_dir(cfg.dataset.runs_dir);
  std::vector<JudgmentRecord> records;
  if (!records_path.empty()) records = detail::load_records(records_path);

  const auto report =
      full_report(runs, human, model, records, cfg.k, cfg.thresholds, cfg.gain, cfg.tau);
  auto doc = to_json(report);
  if (!opts.compare_to.empty()) {
    std::ifstream ref_in(opts.compare_to, std::ios::binary);
    if (!ref_in) throw ConfigError("--compare-to", "cannot open " + opts.compare_to);
    nlohmann::json ref;
    try {
      ref = nlohmann::json::parse(ref_in);
    } catch (const nlohmann::json::parse_error&) {
      throw ConfigError("--compare-to", "invalid JSON");
    }
    doc["equivalence"] = to_json(compare_metrics(report.metrics, metric_set_from_json(ref), cfg.thresholds));
  }
  detail::emit(doc.dump(2) + "\n", opts.out, out);
  err << render_report_table(doc);
  if (doc.contains("equivalence")) {
    for (const auto& [metric, c] : doc["equivalence"].items()) {
      err << "  vs reference " << metric << ": " << c["verdict"].get<std::string>() << '\n';
    }
  }

  if (!opts.scale_tsv.empty()) {
    const bool fresh = !fs::exists(opts.scale_tsv);
    std::ofstream tsv(opts.scale_tsv, std::ios::binary | std::ios::app);
    if (!tsv) throw IoError("cannot write " + opts.scale_tsv);
    if (fresh) tsv << scale_tsv_header();
    tsv << scale_tsv_row({cfg.model.empty() ? "unknown" : cfg.model, opts.model_params_b, report.metrics});
  }
  return kOk;
}

inline int cmd_stats(const HarnessConfig& cfg, const std::string& expect, const std::string& out_path,
                     std::ostream& out, std::ostream& err) {
  detail::require_file(cfg.dataset.qrels, "dataset.qrels");
  const auto qrels = load_qrels_file(cfg.dataset.qrels);
  std::vector<SystemRun> runs;
  if (!cfg.dataset.runs_dir.empty()) {
    detail::require_dir(cfg.dataset.runs_dir, "dataset.runs_dir");
    runs = load_runs_dir(cfg.dataset.runs_dir);
  }
  const auto stats = dataset_stats(qrels, runs);
  auto doc = to_json(stats);
  const std::string name = expect.empty() ? cfg.dataset.name : expect;
  int code = kOk;
  if (!name.empty()) {
    const auto* ref = reference_stats(name);
    if (ref == nullptr) throw ConfigError("dataset.name", "no reference statistics for '" + name + "'");
    const bool systems_checked = !runs.empty();
    const bool match = ref->n_queries == stats.n_queries && ref->label_counts == stats.label_counts &&
                       (!systems_checked || ref->n_systems == stats.n_systems);
    doc["reference"] = {{"name", name}, {"expected", to_json(*ref)}, {"matches", match},
                        {"systems_checked", systems_checked}};
    if (!match) {
      err << "dataset statistics differ from the published " << name << " statistics\n";
      code = kValidationMismatch;
    }
  }
  detail::emit(doc.dump(2) + "\n", out_path, out);
  return code;
}

// Re-extracts labels from stored raw outputs (transcripts or records). Offline.
inline int cmd_extract(const std::string& input, const std::string& out_path, std::ostream& out,
                       std::ostream& err) {
  if (!fs::is_regular_file(input)) throw ConfigError("transcripts", "no such file " + input);
  std::ifstream in(input, std::ios::binary);
  std::string line;
  std::string result;
  std::vector<ExtractionMethod> methods;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw MalformedRecord(n, "invalid JSON");
    }
    if (!j.is_object() || !j.contains("raw_output") || !j["raw_output"].is_string()) {
      throw MalformedRecord(n, "missing string field raw_output");
    }
    const auto raw = j["raw_output"].get<std::string>();
    const auto score = extract_score(raw);
    nlohmann::json o = {{"label", score.label.value()}, {"method", std::string(to_string(score.method))}};
    o["span"] = score.matched_span
                    ? nlohmann::json::array({score.matched_span->begin, score.matched_span->end})
                    : nlohmann::json();
    for (const char* k : {"cache_key", "query_id", "doc_id", "id"}) {
      if (j.contains(k)) o[k] = j[k];
    }
    result += o.dump();
    result += '\n';
    methods.push_back(score.method);
  }
  detail::emit(result, out_path, out);
  if (!methods.empty()) {
    err << "extracted " << methods.size() << " outputs, invalid " << invalid_rate(methods).str()
        << "%\n";
  }
  return kOk;
}

inline int cmd_leaderboard(const HarnessConfig& cfg, const std::string& qrels_file,
                           const std::string& csv_path, const std::string& out_path,
                           std::ostream& out) {
  detail::validate_common(cfg);
  fs::path qrels_path = qrels_file.empty() ? cfg.dataset.qrels : fs::path(qrels_file);
  detail::require_file(qrels_path, qrels_file.empty() ? "dataset.qrels" : "--qrels-file");
  detail::require_dir(cfg.dataset.runs_dir, "dataset.runs_dir");
  const auto qrels = load_qrels_file(qrels_path);
  const auto runs = load_runs_dir(cfg.dataset.runs_dir);
  const auto board = build_leaderboard(runs, qrels, cfg.k, cfg.gain);
  if (!csv_path.empty()) detail::write_text_file(csv_path, leaderboard_csv(board));
  std::string table = "rank  ndcg@" + std::to_string(board.k) + "  run\n";
  for (std::size_t i = 0; i < board.rows.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-4zu  %.3f    ", i + 1, board.rows[i].score);
    table += buf + board.rows[i].run_tag + '\n';
  }
  detail::emit(table, out_path, out);
  return kOk;
}

// ---------------------------------------------------------------------------
// Argument parsing

struct Overrides {
  std::string config;
  std::string qrels, runs_dir, queries, passages, dataset_name;
  std::string prompt, backend, model, base_url, transcripts, cache, output_dir;
  std::optional<std::size_t> parallelism, k, max_passage_chars;
  bool exp_gain = false;
  bool tau_a = false;
};

inline HarnessConfig resolve_config(const Overrides& o) {
  HarnessConfig cfg = o.config.empty() ? HarnessConfig{} : load_config(o.config);
  auto set_path = [](fs::path& dst, const std::string& v) {
    if (!v.empty()) dst = v;
  };
  auto set_str = [](std::string& dst, const std::string& v) {
    if (!v.empty()) dst = v;
  };
  set_path(cfg.dataset.qrels, o.qrels);
  set_path(cfg.dataset.runs_dir, o.runs_dir);
  set_path(cfg.dataset.queries, o.queries);
  set_path(cfg.dataset.passages, o.passages);
  set_str(cfg.dataset.name, o.dataset_name);
  set_str(cfg.prompt, o.prompt);
  set_str(cfg.backend, o.backend);
  set_str(cfg.model, o.model);
  set_str(cfg.base_url, o.base_url);
  set_path(cfg.transcripts, o.transcripts);
  set_path(cfg.cache, o.cache);
  set_path(cfg.output_dir, o.output_dir);
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (o.k) cfg.k = *o.k;
  if (o.max_passage_chars) cfg.max_passage_chars = *o.max_passage_chars;
  if (o.exp_gain) cfg.gain = Gain::Exponential;
  if (o.tau_a) cfg.tau = TauVariant::A;
  return cfg;
}

namespace detail {

inline void add_dataset_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--qrels", o.qrels, "human qrels (dataset.qrels)");
  sub->add_option("--runs-dir", o.runs_dir, "run directory (dataset.runs_dir)");
  sub->add_option("--dataset-name", o.dataset_name, "reference dataset name (dataset.name)");
  sub->add_option("--k", o.k, "NDCG cutoff (k)");
  sub->add_flag("--exp-gain", o.exp_gain, "use gain 2^g - 1 instead of linear (gain)");
  sub->add_flag("--tau-a", o.tau_a, "report Kendall tau-a instead of tau-b (tau_variant)");
  sub->footer(config_help_footer());
}

inline void add_judge_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--queries", o.queries, "query store (dataset.queries)");
  sub->add_option("--passages", o.passages, "passage store (dataset.passages)");
  sub->add_option("--prompt", o.prompt, "umbrela | basic (prompt)")
      ->check(CLI::IsMember({"umbrela", "basic"}, CLI::ignore_case));
  sub->add_option("--backend", o.backend, "http | replay (backend.kind)")
      ->check(CLI::IsMember({"http", "replay"}));
  sub->add_option("--model", o.model, "model name (backend.model)");
  sub->add_option("--base-url", o.base_url, "API base URL (backend.base_url)");
  sub->add_option("--transcripts", o.transcripts, "replay transcripts (backend.transcripts)");
  sub->add_option("--cache", o.cache, "transcript cache file (cache)");
  sub->add_option("--output-dir", o.output_dir, "output directory (output_dir)");
  sub->add_option("--parallelism", o.parallelism, "concurrent requests (parallelism)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-passage-chars", o.max_passage_chars,
                  "truncate passages (max_passage_chars)");
}

}  // namespace detail

// Full CLI; returns the process exit code. args[0] is the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"LLM relevance judging and meta-evaluation for TREC-style collections", "umbrela"};
  app.require_subcommand(1);

  Overrides o;
  EvaluateOptions eval;
  std::string stats_expect, out_path, extract_input, qrels_file, csv_path;

  auto* judge = app.add_subcommand("judge", "label the judgment pool with an LLM");
  detail::add_dataset_flags(judge, o);
  detail::add_judge_flags(judge, o);
  judge->add_option("--out", o.output_dir, "alias for --output-dir");

  auto* evaluate = app.add_subcommand("evaluate", "compare model qrels against human qrels");
  detail::add_dataset_flags(evaluate, o);
  detail::add_judge_flags(evaluate, o);
  evaluate->add_option("--model-qrels", eval.model_qrels, "model qrels (default <output_dir>/model.qrels)");
  evaluate->add_option("--records", eval.records, "judgment records for the invalid-output rate");
  evaluate->add_option("--compare-to", eval.compare_to, "reference metrics JSON for equivalence verdicts");
  evaluate->add_option("--scale-tsv", eval.scale_tsv, "append a model-scale row to this TSV");
  evaluate->add_option("--model-params", eval.model_params_b, "model size in billions for --scale-tsv");
  evaluate->add_option("--out", eval.out, "write the report JSON here instead of stdout");

  auto* stats = app.add_subcommand("stats", "dataset statistics (systems, queries, label counts)");
  detail::add_dataset_flags(stats, o);
  stats->add_option("--expect", stats_expect, "validate against dl19 | dl20 | llmjudge");
  stats->add_option("--out", out_path, "write JSON here instead of stdout");

  auto* extract = app.add_subcommand("extract", "re-extract labels from stored raw outputs");
  extract->add_option("transcripts", extract_input, "JSON-lines file with raw_output fields")->required();
  extract->add_option("--out", out_path, "write JSON-lines here instead of stdout");

  auto* leaderboard = app.add_subcommand("leaderboard", "NDCG@k leaderboard of the runs");
  detail::add_dataset_flags(leaderboard, o);
  leaderboard->add_option("--qrels-file", qrels_file, "qrels to score with (default dataset.qrels)");
  leaderboard->add_option("--csv", csv_path, "also write the leaderboard as CSV");
  leaderboard->add_option("--out", out_path, "write the table here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (judge->parsed()) return cmd_judge(resolve_config(o), out, err);
    if (evaluate->parsed()) {
      return cmd_evaluate(resolve_config(o), eval, out, err);
    }
    if (stats->parsed()) return cmd_stats(resolve_config(o), stats_expect, out_path, out, err);
    if (extract->parsed()) return cmd_extract(extract_input, out_path, out, err);
    if (leaderboard->parsed()) return cmd_leaderboard(resolve_config(o), qrels_file, csv_path, out_path, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const EmptyIntersection& e) {
    err << "error: " << e.what() << '\n';
    return kEmptyIntersection;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace umbrela::cli
