#pragma once

// The two zero-shot relevance-judging prompts and their rendering.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "umbrela/digest.hpp"
#include "umbrela/errors.hpp"

namespace umbrela {

enum class TemplateName { Umbrela, Basic };

inline constexpr std::string_view kQueryPlaceholder = "{query}";
inline constexpr std::string_view kPassagePlaceholder = "{passage}";

// Bodies use '\n' line endings and carry no trailing newline. Lines that end
// in a space do so in the upstream prompt files as well.
inline constexpr std::string_view kUmbrelaBody =
    "Given a query and a passage, you must provide a score on an integer scale of 0 to 3 with "
    "the following meanings:\n"
    "0 = represent that the passage has nothing to do with the query, \n"
    "1 = represents that the passage seems related to the query but does not answer it, \n"
    "2 = represents that the passage has some answer for the query, but the answer may be a bit "
    "unclear, or hidden amongst extraneous information and \n"
    "3 = represents that the passage is dedicated to the query and contains the exact answer.\n"
    "\n"
    "Important Instruction: Assign category 1 if the passage is somewhat related to the topic "
    "but not completely, category 2 if passage presents something very important related to the "
    "entire topic but also has some extra information and category 3 if the passage only and "
    "entirely refers to the topic. If none of the above satisfies give it category 0.\n"
    "\n"
    "Query: {query}\n"
    "Passage: {passage}\n"
    "\n"
    "Split this problem into steps:\n"
    "Consider the underlying intent of the search.\n"
    "Measure how well the content matches a likely intent of the query (M).\n"
    "Measure how trustworthy the passage is (T).\n"
    "Consider the aspects above and the relative importance of each, and decide on a final score "
    "(O). Final score must be an integer value only.\n"
    "Do not provide any code in result. Provide each score in the format of: ##final score: "
    "score without providing any reasoning.";

inline constexpr std::string_view kBasicBody =
    "You are an expert judge of a content. Using your internal knowledge and simple commonsense "
    "reasoning, try to verify if the passage is relevance category to the query.\n"
    "Here, \"0\" represent that the passage has nothing to do with the query, \"1\" represents "
    "that the passage seems related to the query but does not answer it, \"2\" represents that "
    "the passage has some answer for the query, but the answer may be a bit unclear, or hidden "
    "amongst extraneous information and \"3\" represents that the passage is dedicated to the "
    "query and contains the exact answer.\n"
    "\n"
    "Provide explanation for the relevance and give your answer with from one of the categories "
    "0, 1, 2 or 3 only. One of the categorical values if compulsory in answer.\n"
    "\n"
    "Instructions: Think about the question. After explaining your reasoning, provide your "
    "answer in terms of 0, 1, 2 or 3 category. Only provide the relevance category on the last "
    "line. Do not provide any further details on the last line.\n"
    "\n"
    "###\n"
    "\n"
    "Query: {query}\n"
    "Passage: {passage}\n"
    "\n"
    "Explanation:";

struct PromptTemplate {
  TemplateName name;
  std::string_view body;
};

inline constexpr PromptTemplate kUmbrelaTemplate{TemplateName::Umbrela, kUmbrelaBody};
inline constexpr PromptTemplate kBasicTemplate{TemplateName::Basic, kBasicBody};

inline constexpr std::string_view to_string(TemplateName name) {
  return name == TemplateName::Umbrela ? "umbrela" : "basic";
}

// Case-insensitive lookup of "umbrela" / "basic".
inline const PromptTemplate& template_by_name(std::string_view name) {
  std::string lowered(name);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lowered == "umbrela") return kUmbrelaTemplate;
  if (lowered == "basic") return kBasicTemplate;
  throw UnknownTemplate(std::string(name));
}

struct RenderOptions {
  // Truncate passages longer than this many UTF-8 code points.
  std::optional<std::size_t> max_passage_chars;
};

struct RenderedPrompt {
  TemplateName template_name;
  std::string text;
  std::string prompt_digest;  // hex SHA-256 of text
  bool passage_truncated = false;
};

namespace detail {

// Byte length of the first `max_chars` code points; continuation bytes
// (10xxxxxx) never start a code point.
inline std::size_t utf8_prefix_bytes(std::string_view s, std::size_t max_chars) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if ((c & 0xC0) != 0x80) {
      if (chars == max_chars) return i;
      ++chars;
    }
  }
  return s.size();
}

}  // namespace detail

// Single-pass literal substitution: text inserted for one placeholder is never
// scanned for the other.
inline RenderedPrompt render(const PromptTemplate& tmpl, std::string_view query_text,
                             std::string_view passage_text, const RenderOptions& options = {}) {
  if (query_text.empty()) throw EmptyInput("query text");
  if (passage_text.empty()) throw EmptyInput("passage text");

  RenderedPrompt out{tmpl.name, {}, {}, false};
  if (options.max_passage_chars) {
    const auto cut = detail::utf8_prefix_bytes(passage_text, *options.max_passage_chars);
    if (cut < passage_text.size()) {
      passage_text = passage_text.substr(0, cut);
      out.passage_truncated = true;
    }
  }

  const std::string_view body = tmpl.body;
  const auto q = body.find(kQueryPlaceholder);
  const auto p = body.find(kPassagePlaceholder);
  out.text.reserve(body.size() + query_text.size() + passage_text.size());

  const bool query_first = q < p;
  const auto first = query_first ? q : p;
  const auto second = query_first ? p : q;
  const auto first_len = query_first ? kQueryPlaceholder.size() : kPassagePlaceholder.size();
  const auto second_len = query_first ? kPassagePlaceholder.size() : kQueryPlaceholder.size();

  out.text.append(body.substr(0, first));
  out.text.append(query_first ? query_text : passage_text);
  out.text.append(body.substr(first + first_len, second - first - first_len));
  out.text.append(query_first ? passage_text : query_text);
  out.text.append(body.substr(second + second_len));

  out.prompt_digest = sha256_hex(out.text);
  return out;
}

}  // namespace umbrela
