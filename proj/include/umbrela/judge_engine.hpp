#pragma once

// LLM backends (OpenAI-compatible HTTP, offline replay), the transcript cache,
// the resumable progress journal and pool orchestration.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"
#include "json.hpp"
#include "umbrela/digest.hpp"
#include "umbrela/errors.hpp"
#include "umbrela/prompt_kit.hpp"
#include "umbrela/score_extract.hpp"
#include "umbrela/trec_io.hpp"

namespace umbrela {

struct DecodingConfig {
  double temperature = 0.0;
  int max_output_tokens = 256;
  int batch_size = 1;

  void validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("decoding.temperature", "must be >= 0");
    if (max_output_tokens <= 0) throw ConfigError("decoding.max_output_tokens", "must be positive");
    // Chat-completions requests carry one prompt each.
    if (batch_size != 1) throw ConfigError("decoding.batch_size", "only 1 is supported");
  }
};

// Stable across runs and platforms: SHA-256 over a canonical text encoding.
inline std::string cache_key(std::string_view model_name, std::string_view prompt_digest,
                             const DecodingConfig& cfg) {
  std::string canon = "umbrela-cache-v1\n";
  canon += "model=";
  canon += model_name;
  canon += "\nprompt_digest=";
  canon += prompt_digest;
  canon += "\ntemperature=" + detail::format_double(cfg.temperature);
  canon += "\nmax_output_tokens=" + std::to_string(cfg.max_output_tokens);
  canon += "\nbatch_size=" + std::to_string(cfg.batch_size);
  canon += "\n";
  return sha256_hex(canon);
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Append-only JSON-lines files

// Loading tolerates a torn final line (no trailing newline, unparsable), which
// is what an interrupted writer leaves behind; the torn tail is dropped before
// new lines are appended.
class JsonLinesLog {
 public:
  JsonLinesLog() = default;
  explicit JsonLinesLog(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const noexcept { return path_; }
  bool persistent() const noexcept { return !path_.empty(); }

  std::vector<nlohmann::json> load() {
    std::vector<nlohmann::json> out;
    if (!persistent() || !std::filesystem::exists(path_)) return out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError("cannot open " + path_.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < content.size()) {
      ++line_no;
      auto nl = content.find('\n', start);
      const bool torn = nl == std::string::npos;
      if (torn) nl = content.size();
      std::string_view line(content.data() + start, nl - start);
      if (!line.empty() && line.find_first_not_of(" \t\r") != std::string_view::npos) {
        try {
          out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error&) {
          if (!torn) throw MalformedRecord(line_no, "invalid JSON in " + path_.string());
          std::filesystem::resize_file(path_, start);
          break;
        }
      }
      if (torn && !content.empty() && start < content.size()) {
        // Complete record missing only its newline.
        std::ofstream fix(path_, std::ios::binary | std::ios::app);
        fix << '\n';
      }
      start = nl + 1;
    }
    return out;
  }

  void append(const nlohmann::json& record) {
    if (!persistent()) return;
    std::lock_guard lock(write_mu_);
    if (!out_.is_open()) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      out_.open(path_, std::ios::binary | std::ios::app);
      if (!out_) throw IoError("cannot open " + path_.string() + " for append");
    }
    out_ << record.dump() << '\n';
    out_.flush();
  }

 private:
  std::filesystem::path path_;
  std::mutex write_mu_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Transcripts

struct Transcript {
  std::string cache_key;
  std::string model_name;
  std::string prompt_digest;
  std::string raw_output;
  std::string created_at;
};

inline nlohmann::json to_json(const Transcript& t) {
  return {{"cache_key", t.cache_key},
          {"model", t.model_name},
          {"prompt_digest", t.prompt_digest},
          {"raw_output", t.raw_output},
          {"created_at", t.created_at}};
}

inline Transcript transcript_from_json(const nlohmann::json& j) {
  try {
    return Transcript{j.at("cache_key").get<std::string>(), j.at("model").get<std::string>(),
                      j.at("prompt_digest").get<std::string>(),
                      j.at("raw_output").get<std::string>(), j.value("created_at", "")};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad transcript record: ") + e.what());
  }
}

// Append-only transcript file plus an in-memory index keyed by cache key.
// Concurrent lookups of a key that is still being fetched wait for the one
// in-flight fetch instead of issuing another.
class TranscriptStore {
 public:
  // In-memory only.
  TranscriptStore() = default;

  explicit TranscriptStore(std::filesystem::path path) : log_(std::move(path)) {
    for (const auto& j : log_.load()) {
      auto t = transcript_from_json(j);
      index_.try_emplace(t.cache_key, std::move(t));
    }
  }

  TranscriptStore(const TranscriptStore&) = delete;
  TranscriptStore& operator=(const TranscriptStore&) = delete;

  std::optional<Transcript> find(const std::string& key) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Returns false (and stores nothing) if the key already exists.
  bool insert(Transcript t) {
    std::unique_lock lock(mu_);
    if (index_.contains(t.cache_key)) return false;
    log_.append(to_json(t));
    auto key = t.cache_key;
    index_.emplace(std::move(key), std::move(t));
    return true;
  }

  // The cached transcript (second = true), or the result of `fetch`, which
  // is persisted before being returned (second = false).
  std::pair<Transcript, bool> get_or_fetch(const std::string& key,
                                           const std::function<Transcript()>& fetch) {
    std::shared_future<Transcript> pending;
    std::promise<Transcript> promise;
    {
      std::unique_lock lock(mu_);
      if (auto it = index_.find(key); it != index_.end()) return {it->second, true};
      if (auto it = in_flight_.find(key); it != in_flight_.end()) {
        pending = it->second;
      } else {
        in_flight_.emplace(key, promise.get_future().share());
      }
    }
    if (pending.valid()) return {pending.get(), true};

    try {
      Transcript t = fetch();
      {
        std::unique_lock lock(mu_);
        log_.append(to_json(t));
        index_.try_emplace(key, t);
        in_flight_.erase(key);
      }
      promise.set_value(t);
      return {std::move(t), false};
    } catch (...) {
      {
        std::unique_lock lock(mu_);
        in_flight_.erase(key);
      }
      promise.set_exception(std::current_exception());
      throw;
    }
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return index_.size();
  }

 private:
  JsonLinesLog log_;
  mutable std::shared_mutex mu_;
  std::map<std::string, Transcript> index_;
  std::map<std::string, std::shared_future<Transcript>> in_flight_;
};

// ---------------------------------------------------------------------------
// Backends

struct HttpChatSpec {
  std::string base_url;  // e.g. https://api.together.xyz/v1
  std::string model_name;
  std::string api_key_env = "LLM_API_KEY";
  double timeout_s = 60.0;
  int max_retries = 5;
};

struct ReplaySpec {
  std::filesystem::path transcript_path;
  std::string model_name;
};

using BackendSpec = std::variant<HttpChatSpec, ReplaySpec>;

struct CompletionRequest {
  std::string_view model_name;
  std::string_view prompt;
  std::string_view cache_key;
  const DecodingConfig& decoding;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& model_name() const = 0;
  // Raw completion text. Throws BackendError or ReplayMiss.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// Serves stored raw outputs by cache key; never touches the network.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(const ReplaySpec& spec) : model_name_(spec.model_name) {
    if (!std::filesystem::exists(spec.transcript_path)) {
      throw ConfigError("backend.transcripts", "no such file " + spec.transcript_path.string());
    }
    store_ = std::make_shared<TranscriptStore>(spec.transcript_path);
  }

  ReplayBackend(std::string model_name, std::shared_ptr<const TranscriptStore> store)
      : model_name_(std::move(model_name)), store_(std::move(store)) {}

  const std::string& model_name() const override { return model_name_; }

  std::string complete(const CompletionRequest& request) override {
    auto t = store_->find(std::string(request.cache_key));
    if (!t) throw ReplayMiss(std::string(request.cache_key));
    return t->raw_output;
  }

 private:
  std::string model_name_;
  std::shared_ptr<const TranscriptStore> store_;
};

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;

  // Full jitter: uniform in [0, base * factor^attempt].
  template <typename Rng>
  std::chrono::milliseconds delay(int attempt, Rng& rng) const {
    const double cap = static_cast<double>(base_delay.count()) * std::pow(factor, attempt);
    std::uniform_real_distribution<double> dist(0.0, cap);
    return std::chrono::milliseconds(static_cast<long long>(dist(rng)));
  }
};

inline bool is_retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;  // without trailing slash
};

inline ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("backend.base_url", "must be an absolute http(s) URL: " + url);
  }
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("backend.base_url", "unsupported scheme " + scheme);
  }
  const auto host_begin = scheme_end + 3;
  auto path_begin = url.find('/', host_begin);
  if (path_begin == std::string::npos) path_begin = url.size();
  if (path_begin == host_begin) throw ConfigError("backend.base_url", "missing host in " + url);
  ParsedUrl out{url.substr(0, path_begin), url.substr(path_begin)};
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

// OpenAI-compatible chat completions: POST {base_url}/chat/completions with a
// single user message; the reply is choices[0].message.content.
class HttpChatBackend final : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpChatBackend(HttpChatSpec spec, Sleeper sleeper = {},
                           std::uint64_t jitter_seed = std::random_device{}())
      : spec_(std::move(spec)),
        url_(parse_base_url(spec_.base_url)),
        sleeper_(sleeper ? std::move(sleeper)
                         : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
        rng_(jitter_seed) {
    if (spec_.model_name.empty()) throw ConfigError("backend.model", "must be non-empty");
    if (spec_.max_retries < 0) throw ConfigError("backend.max_retries", "must be >= 0");
    if (!(spec_.timeout_s > 0)) throw ConfigError("backend.timeout_s", "must be positive");
    policy_.max_retries = spec_.max_retries;
  }

  const std::string& model_name() const override { return spec_.model_name; }
  RetryPolicy& retry_policy() { return policy_; }

  std::string complete(const CompletionRequest& request) override {
    const nlohmann::json body = {
        {"model", std::string(request.model_name)},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(request.prompt)}}})},
        {"temperature", request.decoding.temperature},
        {"max_tokens", request.decoding.max_output_tokens},
    };
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (const char* key = std::getenv(spec_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    int last_status = 0;
    std::string last_body;
    for (int attempt = 0;; ++attempt) {
      httplib::Client client(url_.scheme_host_port);
      const auto timeout = std::chrono::duration<double>(spec_.timeout_s);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      auto res = client.Post(url_.path_prefix + "/chat/completions", headers, payload,
                             "application/json");
      bool retryable = false;
      if (!res) {
        last_status = 0;
        last_body = httplib::to_string(res.error());
        retryable = true;
      } else if (res->status == 200) {
        return parse_reply(res->body);
      } else {
        last_status = res->status;
        last_body = res->body;
        retryable = is_retryable_status(res->status);
      }
      if (!retryable || attempt >= policy_.max_retries) break;
      std::chrono::milliseconds wait;
      {
        std::lock_guard lock(rng_mu_);
        wait = policy_.delay(attempt, rng_);
      }
      sleeper_(wait);
    }
    throw BackendError(last_status, excerpt(last_body));
  }

 private:
  static std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 200;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
  }

  static std::string parse_reply(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (content.is_null()) return "";
      return content.get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw BackendError(200, "unexpected response shape: " + excerpt(body));
    }
  }

  HttpChatSpec spec_;
  ParsedUrl url_;
  Sleeper sleeper_;
  RetryPolicy policy_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

inline std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  if (const auto* http = std::get_if<HttpChatSpec>(&spec)) {
    return std::make_unique<HttpChatBackend>(*http);
  }
  return std::make_unique<ReplayBackend>(std::get<ReplaySpec>(spec));
}

// ---------------------------------------------------------------------------
// Judging

struct JudgmentRecord {
  std::string query_id;
  std::string doc_id;
  std::string cache_key;
  std::string raw_output;
  RelevanceLabel label{0};
  ExtractionMethod extraction_method = ExtractionMethod::DefaultInvalid;
  bool from_cache = false;
  bool passage_truncated = false;
};

// `from_cache` is run-local provenance and is not serialized, so records
// written by a resumed run match an uninterrupted one.
inline nlohmann::json to_json(const JudgmentRecord& r) {
  nlohmann::json j = {{"query_id", r.query_id},
                      {"doc_id", r.doc_id},
                      {"cache_key", r.cache_key},
                      {"raw_output", r.raw_output},
                      {"label", r.label.value()},
                      {"method", std::string(to_string(r.extraction_method))}};
  if (r.passage_truncated) j["passage_truncated"] = true;
  return j;
}

inline JudgmentRecord record_from_json(const nlohmann::json& j) {
  try {
    JudgmentRecord r;
    r.query_id = j.at("query_id").get<std::string>();
    r.doc_id = j.at("doc_id").get<std::string>();
    r.cache_key = j.at("cache_key").get<std::string>();
    r.raw_output = j.at("raw_output").get<std::string>();
    r.label = RelevanceLabel(j.at("label").get<long long>());
    r.extraction_method = extraction_method_from_string(j.at("method").get<std::string>());
    r.passage_truncated = j.value("passage_truncated", false);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad judgment record: ") + e.what());
  }
}

struct PairInput {
  std::string_view query_id;
  std::string_view query_text;
  std::string_view doc_id;
  std::string_view passage_text;
};

// Cache first; on a miss exactly one backend call, whose transcript is
// persisted before extraction.
inline JudgmentRecord judge_pair(Backend& backend, const PromptTemplate& tmpl, const PairInput& pair,
                                 const DecodingConfig& cfg, TranscriptStore& cache,
                                 const RenderOptions& render_options = {}) {
  const auto prompt = render(tmpl, pair.query_text, pair.passage_text, render_options);
  const auto key = cache_key(backend.model_name(), prompt.prompt_digest, cfg);
  auto [transcript, from_cache] = cache.get_or_fetch(key, [&] {
    auto raw = backend.complete(CompletionRequest{backend.model_name(), prompt.text, key, cfg});
    return Transcript{key, backend.model_name(), prompt.prompt_digest, std::move(raw), utc_timestamp()};
  });
  const auto extracted = extract_score(transcript.raw_output);
  JudgmentRecord rec;
  rec.query_id = std::string(pair.query_id);
  rec.doc_id = std::string(pair.doc_id);
  rec.cache_key = key;
  rec.raw_output = std::move(transcript.raw_output);
  rec.label = extracted.label;
  rec.extraction_method = extracted.method;
  rec.from_cache = from_cache;
  rec.passage_truncated = prompt.passage_truncated;
  return rec;
}

// Completed pairs of one judging job, keyed by (query, doc). An entry is reused
// only if its cache key matches the pair's current key.
class ProgressJournal {
 public:
  ProgressJournal() = default;
  explicit ProgressJournal(std::filesystem::path path) : log_(std::move(path)) {
    for (const auto& j : log_.load()) {
      auto r = record_from_json(j);
      QrelsKey key{r.query_id, r.doc_id};
      done_.insert_or_assign(std::move(key), std::move(r));
    }
  }

  ProgressJournal(const ProgressJournal&) = delete;
  ProgressJournal& operator=(const ProgressJournal&) = delete;

  std::optional<JudgmentRecord> lookup(const QrelsKey& key, const std::string& cache_key) const {
    std::lock_guard lock(mu_);
    auto it = done_.find(key);
    if (it == done_.end() || it->second.cache_key != cache_key) return std::nullopt;
    return it->second;
  }

  void record(const JudgmentRecord& r) {
    std::lock_guard lock(mu_);
    log_.append(to_json(r));
    done_.insert_or_assign(QrelsKey{r.query_id, r.doc_id}, r);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return done_.size();
  }

 private:
  JsonLinesLog log_;
  mutable std::mutex mu_;
  std::map<QrelsKey, JudgmentRecord> done_;
};

struct PairFailure {
  QrelsKey key;
  std::string error;
};

struct PoolResult {
  QrelsSet model_qrels;                // keys equal the pool's when failures is empty
  std::vector<JudgmentRecord> records;  // pool key order
  std::vector<PairFailure> failures;    // pool key order
  std::size_t backend_calls = 0;
  std::size_t resumed = 0;  // restored from the progress journal

  bool complete() const noexcept { return failures.empty(); }
};

struct PoolOptions {
  std::size_t parallelism = 4;
  RenderOptions render;
  ProgressJournal* journal = nullptr;
};

// Judges every (query, doc) of `pool`. Per-pair outcomes never depend on
// completion order: results are slotted by pool position.
inline PoolResult judge_pool(Backend& backend, const PromptTemplate& tmpl, const QrelsSet& pool,
                             const QueryStore& queries, const PassageStore& passages,
                             const DecodingConfig& cfg, TranscriptStore& cache,
                             const PoolOptions& options = {}) {
  if (options.parallelism == 0) throw ConfigError("parallelism", "must be positive");
  struct Job {
    const QrelsKey* key;
    const std::string* query_text;
    const std::string* passage_text;
  };
  std::vector<Job> jobs;
  jobs.reserve(pool.size());
  for (const auto& [key, _] : pool) {
    const auto* q = queries.find(key.query_id);
    if (q == nullptr) throw MissingText("query", key.query_id);
    const auto* p = passages.find(key.doc_id);
    if (p == nullptr) throw MissingText("passage", key.doc_id);
    jobs.push_back({&key, q, p});
  }

  std::vector<std::optional<JudgmentRecord>> slots(jobs.size());
  std::vector<std::optional<std::string>> errors(jobs.size());
  std::vector<std::size_t> todo;
  std::size_t resumed = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (options.journal != nullptr) {
      const auto prompt = render(tmpl, *jobs[i].query_text, *jobs[i].passage_text, options.render);
      const auto key = cache_key(backend.model_name(), prompt.prompt_digest, cfg);
      if (auto r = options.journal->lookup(*jobs[i].key, key)) {
        r->from_cache = true;
        slots[i] = std::move(*r);
        ++resumed;
        continue;
      }
    }
    todo.push_back(i);
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> calls{0};
  auto worker = [&] {
    for (std::size_t t = next.fetch_add(1); t < todo.size(); t = next.fetch_add(1)) {
      const auto i = todo[t];
      const auto& job = jobs[i];
      try {
        auto rec = judge_pair(backend, tmpl,
                              PairInput{job.key->query_id, *job.query_text, job.key->doc_id,
                                        *job.passage_text},
                              cfg, cache, options.render);
        if (!rec.from_cache) calls.fetch_add(1);
        if (options.journal != nullptr) options.journal->record(rec);
        slots[i] = std::move(rec);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  const auto n_threads = std::min(options.parallelism, std::max<std::size_t>(todo.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }

  PoolResult result;
  result.model_qrels.set_provenance(
      ModelProvenance{backend.model_name(), std::string(to_string(tmpl.name))});
  result.backend_calls = calls.load();
  result.resumed = resumed;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (slots[i]) {
      result.model_qrels.insert(slots[i]->query_id, slots[i]->doc_id, slots[i]->label);
      result.records.push_back(std::move(*slots[i]));
    } else {
      result.failures.push_back({*jobs[i].key, errors[i].value_or("not judged")});
    }
  }
  return result;
}

}  // namespace umbrela
