#pragma once

// Rule-based recovery of a 0-3 relevance score from free-form model output.
//
// Stages, tried strictly in order; within a stage the last in-range match wins:
//   1. FinalScore        "##", optional blanks, "final score", ":", integer
//                        (case-insensitive, anywhere in the text)
//   2. OFallback         a line reading "O: n" or "O = n", optionally
//                        prefixed by "##"
//   3. StandaloneNumber  a line consisting solely of one integer
// If all stages fail the output is invalid and scores 0.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <vector>

#include "umbrela/errors.hpp"
#include "umbrela/trec_io.hpp"

namespace umbrela {

enum class ExtractionMethod { FinalScore, OFallback, StandaloneNumber, DefaultInvalid };

inline constexpr std::string_view to_string(ExtractionMethod m) {
  switch (m) {
    case ExtractionMethod::FinalScore: return "final_score";
    case ExtractionMethod::OFallback: return "o_fallback";
    case ExtractionMethod::StandaloneNumber: return "standalone_number";
    case ExtractionMethod::DefaultInvalid: return "default_invalid";
  }
  return "default_invalid";
}

inline ExtractionMethod extraction_method_from_string(std::string_view s) {
  for (auto m : {ExtractionMethod::FinalScore, ExtractionMethod::OFallback,
                 ExtractionMethod::StandaloneNumber, ExtractionMethod::DefaultInvalid}) {
    if (to_string(m) == s) return m;
  }
  throw Error("unknown extraction method '" + std::string(s) + "'");
}

struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last byte
  bool operator==(const ByteSpan&) const = default;
};

struct ExtractedScore {
  RelevanceLabel label{0};
  ExtractionMethod method = ExtractionMethod::DefaultInvalid;
  std::optional<ByteSpan> matched_span;  // the digits of the accepted integer
  bool operator==(const ExtractedScore&) const = default;
};

namespace detail {

inline bool is_blank_char(char c) { return c == ' ' || c == '\t'; }

inline std::size_t skip_blanks(std::string_view s, std::size_t i) {
  while (i < s.size() && is_blank_char(s[i])) ++i;
  return i;
}

inline bool match_word_ci(std::string_view s, std::size_t i, std::string_view word) {
  if (s.size() - i < word.size()) return false;
  for (std::size_t k = 0; k < word.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(s[i + k])) != word[k]) return false;
  }
  return true;
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Maximal digit run starting at i, or nullopt. Values that overflow or fall
// outside 0-3 are returned with in_range == false.
struct DigitRun {
  ByteSpan span;
  bool in_range = false;
  int value = 0;
};

inline std::optional<DigitRun> digit_run(std::string_view s, std::size_t i) {
  std::size_t j = i;
  while (j < s.size() && is_digit(s[j])) ++j;
  if (j == i) return std::nullopt;
  DigitRun run{{i, j}, false, 0};
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, v);
  if (ec == std::errc() && v >= 0 && v < RelevanceLabel::kLevels) {
    run.in_range = true;
    run.value = static_cast<int>(v);
  }
  return run;
}

struct Line {
  std::size_t begin;  // offset of first non-blank byte
  std::string_view text;  // trimmed of ASCII whitespace on both sides
};

inline std::vector<Line> trimmed_lines(std::string_view s) {
  std::vector<Line> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    auto raw = s.substr(start, nl - start);
    auto b = raw.find_first_not_of(kAsciiSpace);
    if (b != std::string_view::npos) {
      auto e = raw.find_last_not_of(kAsciiSpace);
      lines.push_back({start + b, raw.substr(b, e - b + 1)});
    }
    start = nl + 1;
  }
  return lines;
}

inline std::optional<DigitRun> last_final_score(std::string_view s) {
  std::optional<DigitRun> best;
  for (auto pos = s.find("##"); pos != std::string_view::npos; pos = s.find("##", pos + 1)) {
    auto i = skip_blanks(s, pos + 2);
    if (!match_word_ci(s, i, "final")) continue;
    i = skip_blanks(s, i + 5);
    if (!match_word_ci(s, i, "score")) continue;
    i = skip_blanks(s, i + 5);
    if (i >= s.size() || s[i] != ':') continue;
    i = skip_blanks(s, i + 1);
    auto run = digit_run(s, i);
    if (run && run->in_range) best = run;
  }
  return best;
}

inline std::optional<DigitRun> last_o_line(std::string_view s, const std::vector<Line>& lines) {
  std::optional<DigitRun> best;
  for (const auto& line : lines) {
    std::string_view t = line.text;
    std::size_t i = 0;
    if (t.starts_with("##")) i = skip_blanks(t, 2);
    if (i >= t.size() || (t[i] != 'O' && t[i] != 'o')) continue;
    i = skip_blanks(t, i + 1);
    if (i >= t.size() || (t[i] != ':' && t[i] != '=')) continue;
    i = skip_blanks(t, i + 1);
    auto run = digit_run(s, line.begin + i);
    if (run && run->in_range) best = run;
  }
  return best;
}

inline std::optional<DigitRun> last_standalone(std::string_view s, const std::vector<Line>& lines) {
  std::optional<DigitRun> best;
  for (const auto& line : lines) {
    auto run = digit_run(s, line.begin);
    if (run && run->span.end - run->span.begin == line.text.size() && run->in_range) best = run;
  }
  return best;
}

}  // namespace detail

// Total: never throws, always yields a label in 0-3.
inline ExtractedScore extract_score(std::string_view raw_output) {
  auto accept = [](const detail::DigitRun& run, ExtractionMethod m) {
    return ExtractedScore{RelevanceLabel(run.value), m, run.span};
  };
  if (auto run = detail::last_final_score(raw_output)) {
    return accept(*run, ExtractionMethod::FinalScore);
  }
  const auto lines = detail::trimmed_lines(raw_output);
  if (auto run = detail::last_o_line(raw_output, lines)) {
    return accept(*run, ExtractionMethod::OFallback);
  }
  if (auto run = detail::last_standalone(raw_output, lines)) {
    return accept(*run, ExtractionMethod::StandaloneNumber);
  }
  return ExtractedScore{};
}

// ---------------------------------------------------------------------------
// Invalid-output accounting

// A percentage held as an exact count of hundredths.
struct Percentage {
  long long hundredths = 0;

  double value() const { return static_cast<double>(hundredths) / 100.0; }
  std::string str() const {
    auto whole = std::to_string(hundredths / 100);
    auto frac = std::to_string(hundredths % 100);
    if (frac.size() < 2) frac.insert(0, "0");
    return whole + "." + frac;
  }
  auto operator<=>(const Percentage&) const = default;
};

// 100 * invalid / total, rounded half-up to two decimals in exact integer
// arithmetic.
inline Percentage invalid_rate_from_counts(std::size_t invalid, std::size_t total) {
  if (total == 0) throw EmptyInput("judgment records");
  const auto num = static_cast<unsigned long long>(invalid) * 20000ULL + total;
  return Percentage{static_cast<long long>(num / (2ULL * total))};
}

inline bool is_invalid(ExtractionMethod m) { return m == ExtractionMethod::DefaultInvalid; }

// Accepts any range whose elements expose `extraction_method`, or a range of
// ExtractionMethod values.
template <typename Range>
Percentage invalid_rate(const Range& records) {
  std::size_t total = 0;
  std::size_t invalid = 0;
  for (const auto& r : records) {
    ++total;
    if constexpr (std::is_same_v<std::decay_t<decltype(r)>, ExtractionMethod>) {
      invalid += is_invalid(r) ? 1 : 0;
    } else {
      invalid += is_invalid(r.extraction_method) ? 1 : 0;
    }
  }
  return invalid_rate_from_counts(invalid, total);
}

}  // namespace umbrela
