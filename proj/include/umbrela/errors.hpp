#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace umbrela {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parsing (TREC files, text stores)

class ParseError : public Error {
 public:
  using Error::Error;
};

class MalformedLine : public ParseError {
 public:
  MalformedLine(std::size_t line_no, const std::string& why)
      : ParseError("malformed line " + std::to_string(line_no) + ": " + why),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class LabelOutOfRange : public ParseError {
 public:
  LabelOutOfRange(std::size_t line_no, long long value)
      : ParseError("label " + std::to_string(value) + " out of range 0-3 at line " +
                   std::to_string(line_no)),
        line_no_(line_no),
        value_(value) {}
  std::size_t line_no() const noexcept { return line_no_; }
  long long value() const noexcept { return value_; }

 private:
  std::size_t line_no_;
  long long value_;
};

class DuplicateEntry : public ParseError {
 public:
  DuplicateEntry(std::string query_id, std::string doc_id)
      : ParseError("duplicate qrels entry (" + query_id + ", " + doc_id + ")"),
        query_id_(std::move(query_id)),
        doc_id_(std::move(doc_id)) {}
  const std::string& query_id() const noexcept { return query_id_; }
  const std::string& doc_id() const noexcept { return doc_id_; }

 private:
  std::string query_id_;
  std::string doc_id_;
};

class MixedRunTags : public ParseError {
 public:
  MixedRunTags(std::size_t line_no, const std::string& expected, const std::string& found)
      : ParseError("run tag '" + found + "' at line " + std::to_string(line_no) +
                   " differs from '" + expected + "'"),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class DuplicateDoc : public ParseError {
 public:
  DuplicateDoc(std::string query_id, std::string doc_id)
      : ParseError("document " + doc_id + " ranked twice for query " + query_id),
        query_id_(std::move(query_id)),
        doc_id_(std::move(doc_id)) {}
  const std::string& query_id() const noexcept { return query_id_; }
  const std::string& doc_id() const noexcept { return doc_id_; }

 private:
  std::string query_id_;
  std::string doc_id_;
};

class EmptyRun : public ParseError {
 public:
  EmptyRun() : ParseError("run file contains no ranking lines") {}
};

class MalformedRecord : public ParseError {
 public:
  MalformedRecord(std::size_t line_no, const std::string& why)
      : ParseError("malformed record at line " + std::to_string(line_no) + ": " + why),
        line_no_(line_no) {}
  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class DuplicateId : public ParseError {
 public:
  explicit DuplicateId(std::string id)
      : ParseError("duplicate id " + id), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

// ---------------------------------------------------------------------------
// Domain and metric errors

class InvalidLabel : public Error {
 public:
  explicit InvalidLabel(long long value)
      : Error("relevance label " + std::to_string(value) + " outside 0-3"), value_(value) {}
  long long value() const noexcept { return value_; }

 private:
  long long value_;
};

class InvalidIdentifier : public Error {
 public:
  explicit InvalidIdentifier(const std::string& id)
      : Error("identifier '" + id + "' is empty or contains whitespace") {}
};

class EmptyInput : public Error {
 public:
  explicit EmptyInput(const std::string& what) : Error("empty input: " + what) {}
};

class CategoryOutOfRange : public Error {
 public:
  CategoryOutOfRange(int label, int categories)
      : Error("label " + std::to_string(label) + " not below category count " +
              std::to_string(categories)) {}
};

class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& what) : Error("degenerate input: " + what) {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("vector lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class UnknownTemplate : public Error {
 public:
  explicit UnknownTemplate(const std::string& name)
      : Error("unknown prompt template '" + name + "'") {}
};

class DuplicateRunTag : public Error {
 public:
  explicit DuplicateRunTag(const std::string& tag) : Error("duplicate run tag " + tag) {}
};

class RunSetMismatch : public Error {
 public:
  explicit RunSetMismatch(const std::string& detail)
      : Error("leaderboards rank different systems: " + detail) {}
};

class EmptyIntersection : public Error {
 public:
  EmptyIntersection() : Error("human and model qrels share no (query, doc) pair") {}
};

// ---------------------------------------------------------------------------
// Judging

class BackendError : public Error {
 public:
  BackendError(int status, std::string body_excerpt)
      : Error("backend error (status " + std::to_string(status) + "): " + body_excerpt),
        status_(status),
        body_excerpt_(std::move(body_excerpt)) {}
  // 0 when no HTTP response was received.
  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_excerpt_; }

 private:
  int status_;
  std::string body_excerpt_;
};

class ReplayMiss : public Error {
 public:
  explicit ReplayMiss(std::string cache_key)
      : Error("no stored transcript for cache key " + cache_key),
        cache_key_(std::move(cache_key)) {}
  const std::string& cache_key() const noexcept { return cache_key_; }

 private:
  std::string cache_key_;
};

class MissingText : public Error {
 public:
  MissingText(std::string kind, std::string id)
      : Error("no " + kind + " text for id " + id), kind_(std::move(kind)), id_(std::move(id)) {}
  const std::string& kind() const noexcept { return kind_; }
  const std::string& id() const noexcept { return id_; }

 private:
  std::string kind_;
  std::string id_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& why)
      : Error("config field '" + field + "': " + why), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace umbrela
