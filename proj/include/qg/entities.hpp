#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qg/corpus.hpp"
#include "qg/tokenizer.hpp"

namespace qg {

// Candidate answer span with the rule (or import) that produced it.
struct EntitySpan {
  AnswerSpan span;
  enum class Kind { Date, Number, CapitalizedSeq, Imported } kind = Kind::Imported;

  bool operator==(const EntitySpan& o) const { return span == o.span && kind == o.kind; }
};

namespace ent_detail {

inline bool is_month(const std::string& t) {
  static const std::set<std::string> months = {
      "january", "february", "march",     "april",   "may",      "june",
      "july",    "august",   "september", "october", "november", "december"};
  return months.count(t) != 0;
}

inline bool is_number_word(const std::string& t) {
  static const std::set<std::string> words = {
      "zero",    "one",     "two",      "three",   "four",    "five",    "six",      "seven",
      "eight",   "nine",    "ten",      "eleven",  "twelve",  "thirteen", "fourteen", "fifteen",
      "sixteen", "seventeen", "eighteen", "nineteen", "twenty", "thirty",  "forty",    "fifty",
      "sixty",   "seventy", "eighty",   "ninety",  "hundred", "thousand", "million",  "billion",
      "trillion"};
  return words.count(t) != 0;
}

// Digits with optional '.'/',' separators: 1995, 3.5, 1,000.
inline bool is_numeral(const std::string& t) {
  bool digit_seen = false;
  for (char c : t) {
    if (std::isdigit(static_cast<unsigned char>(c)))
      digit_seen = true;
    else if (c != '.' && c != ',')
      return false;
  }
  return digit_seen;
}

inline bool is_numeric_token(const std::string& t) { return is_numeral(t) || is_number_word(t); }

inline bool is_four_digit_year(const std::string& t) {
  if (t.size() != 4) return false;
  for (char c : t)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

// Raw-text casing: tokens are lowercased, so capitalization is read from the
// character offsets into the original text.
inline bool is_capitalized(const Document& doc, std::size_t i) {
  const char c = doc.raw_text[doc.offsets[i].first];
  return c >= 'A' && c <= 'Z';
}

// Closed-class words that frequently start sentences; a capitalized run of
// length one consisting of such a word is casing noise, not an entity.
inline bool is_function_word(const std::string& t) {
  static const std::set<std::string> words = {
      "the", "a",    "an",  "in",   "on",   "at",   "of",    "for",   "to",    "by",
      "with", "from", "and", "but",  "or",   "as",   "if",    "it",    "he",    "she",
      "they", "we",   "i",   "you",  "this", "that", "these", "those", "his",   "her",
      "their", "its", "was", "is",   "are",  "were", "be",    "been",  "after", "before",
      "when", "while", "during", "however", "although"};
  return words.count(t) != 0;
}

}  // namespace ent_detail

// Rule-based entity tagger standing in for an off-the-shelf recognizer.
// Deterministic rule hits, in priority order:
//   1. dates: month name, optionally extended over day/year numerals and a
//      comma directly followed by a four-digit year  ("september 1967",
//      "july 31 , 1995")
//   2. numbers: maximal runs of numerals / number words not inside a date
//   3. capitalized sequences: maximal runs of tokens that are capitalized in
//      the raw text, not inside a date; single-token runs of function words
//      (sentence-initial "The", "In", ...) are skipped
//   4. imported spans from a span file (out-of-bounds entries are dropped)
inline std::vector<EntitySpan> ent_baseline_tag(const Document& doc,
                                                const std::vector<AnswerSpan>& imported = {}) {
  using namespace ent_detail;
  const std::size_t n = doc.size();
  std::vector<EntitySpan> out;
  std::vector<bool> in_date(n, false);

  for (std::size_t i = 0; i < n; ++i) {
    if (!is_month(doc.tokens[i])) continue;
    std::size_t j = i + 1;
    while (j < n) {
      if (is_numeral(doc.tokens[j])) {
        ++j;
      } else if (doc.tokens[j] == "," && j + 1 < n && is_four_digit_year(doc.tokens[j + 1])) {
        j += 2;
      } else {
        break;
      }
    }
    out.push_back({AnswerSpan{i, j - 1}, EntitySpan::Kind::Date});
    for (std::size_t k = i; k < j; ++k) in_date[k] = true;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (in_date[i] || !is_numeric_token(doc.tokens[i])) continue;
    std::size_t j = i;
    while (j + 1 < n && !in_date[j + 1] && is_numeric_token(doc.tokens[j + 1])) ++j;
    out.push_back({AnswerSpan{i, j}, EntitySpan::Kind::Number});
    i = j;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (in_date[i] || !is_capitalized(doc, i)) continue;
    std::size_t j = i;
    while (j + 1 < n && !in_date[j + 1] && is_capitalized(doc, j + 1)) ++j;
    if (j > i || !is_function_word(doc.tokens[i]))
      out.push_back({AnswerSpan{i, j}, EntitySpan::Kind::CapitalizedSeq});
    i = j;
  }

  for (const AnswerSpan& s : imported) {
    if (s.start <= s.end && s.end < n) out.push_back({s, EntitySpan::Kind::Imported});
  }

  std::sort(out.begin(), out.end(), [](const EntitySpan& a, const EntitySpan& b) {
    if (a.span != b.span) return a.span < b.span;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const EntitySpan& a, const EntitySpan& b) { return a.span == b.span; }),
            out.end());
  return out;
}

// Span-import file: JSON-lines, one record per document id with token spans.
//   {"doc_id": "...", "spans": [[start, end], ...]}
inline std::unordered_map<std::string, std::vector<AnswerSpan>> load_span_import(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open span import file: " + path);
  std::unordered_map<std::string, std::vector<AnswerSpan>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("span import " + path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("doc_id") || !j.contains("spans"))
      throw SchemaError("span import " + path + ":" + std::to_string(lineno) +
                        " needs doc_id and spans");
    auto& spans = out[j["doc_id"].get<std::string>()];
    for (const auto& pair : j["spans"]) {
      if (!pair.is_array() || pair.size() != 2)
        throw SchemaError("span import " + path + ":" + std::to_string(lineno) +
                          ": spans must be [start,end] pairs");
      spans.push_back(AnswerSpan{pair[0].get<std::size_t>(), pair[1].get<std::size_t>()});
    }
  }
  return out;
}

}  // namespace qg
