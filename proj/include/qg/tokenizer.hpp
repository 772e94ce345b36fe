#pragma once

#include <cctype>
#include <string>
#include <utility>
#include <vector>

namespace qg {

// Deterministic rule tokenizer. The rules are frozen so every run of the
// toolkit reproduces the same token boundaries without external dependencies:
//
//   1. ASCII letters are lowercased; all other bytes pass through unchanged,
//      so character offsets into the raw text are byte-exact.
//   2. Whitespace = ASCII space/tab/newline/CR/FF/VT plus U+00A0 (UTF-8 C2 A0).
//   3. Within a whitespace-delimited chunk, punctuation splits off as
//      single-character tokens, except:
//        - '-' between alphanumerics stays inside the token  (sorkin-created)
//        - '\'' between letters stays inside the token        (don't)
//        - '.' between alphanumerics stays inside the token   (u.s, 3.5)
//        - a chunk-final '.' stays attached when the chunk already contains a
//          kept internal period (abbreviations: "u.s." keeps both periods,
//          "sat." splits into "sat" ".")
//   4. Bytes >= 0x80 (multi-byte UTF-8) count as word characters.

struct TokenSpan {
  std::string token;       // lowercased
  std::size_t char_start;  // byte offset into raw text, inclusive
  std::size_t char_end;    // exclusive
};

struct Document {
  std::string id;
  std::string raw_text;
  std::vector<std::string> tokens;
  std::vector<std::pair<std::size_t, std::size_t>> offsets;  // [start, end) per token

  std::size_t size() const { return tokens.size(); }
};

namespace tok_detail {

inline bool is_space_at(const std::string& s, std::size_t i, std::size_t& width) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
    width = 1;
    return true;
  }
  if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xA0) {
    width = 2;  // U+00A0 no-break space
    return true;
  }
  return false;
}

inline bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
inline bool is_letter_byte(unsigned char c) { return std::isalpha(c) || c >= 0x80; }
inline bool is_punct_byte(unsigned char c) { return c < 0x80 && std::ispunct(c); }

inline char lower_byte(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace tok_detail

inline std::string lowercase_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = tok_detail::lower_byte(c);
  return out;
}

inline std::vector<TokenSpan> tokenize(const std::string& text) {
  using namespace tok_detail;
  std::vector<TokenSpan> out;

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    std::size_t w = 0;
    if (is_space_at(text, i, w)) {
      i += w;
      continue;
    }
    // chunk [i, j)
    std::size_t j = i;
    while (j < n && !is_space_at(text, j, w)) ++j;

    // classify each byte of the chunk: true = splits off as its own token
    std::vector<bool> breaking(j - i, false);
    bool kept_period = false;
    for (std::size_t k = i; k < j; ++k) {
      unsigned char c = static_cast<unsigned char>(text[k]);
      if (!is_punct_byte(c)) continue;
      unsigned char prev = k > i ? static_cast<unsigned char>(text[k - 1]) : 0;
      unsigned char next = k + 1 < j ? static_cast<unsigned char>(text[k + 1]) : 0;
      bool keep = false;
      if (c == '-') {
        keep = is_word_byte(prev) && is_word_byte(next);
      } else if (c == '\'') {
        keep = is_letter_byte(prev) && is_letter_byte(next);
      } else if (c == '.') {
        if (is_word_byte(prev) && is_word_byte(next)) {
          keep = true;
          kept_period = true;
        } else if (k + 1 == j && is_word_byte(prev) && kept_period) {
          keep = true;  // abbreviation-final period
        }
      }
      breaking[k - i] = !keep;
    }

    std::size_t k = i;
    while (k < j) {
      if (breaking[k - i]) {
        out.push_back({std::string(1, lower_byte(text[k])), k, k + 1});
        ++k;
        continue;
      }
      std::size_t e = k;
      while (e < j && !breaking[e - i]) ++e;
      std::string tok;
      tok.reserve(e - k);
      for (std::size_t p = k; p < e; ++p) tok.push_back(lower_byte(text[p]));
      out.push_back({std::move(tok), k, e});
      k = e;
    }
    i = j;
  }
  return out;
}

inline Document make_document(const std::string& text, std::string id = "") {
  Document doc;
  doc.id = std::move(id);
  doc.raw_text = text;
  for (auto& ts : tokenize(text)) {
    doc.tokens.push_back(std::move(ts.token));
    doc.offsets.emplace_back(ts.char_start, ts.char_end);
  }
  return doc;
}

}  // namespace qg
