#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qg/error.hpp"
#include "qg/rng.hpp"
#include "qg/tokenizer.hpp"

namespace qg {

// Inclusive token interval [start, end].
struct AnswerSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const AnswerSpan&) const = default;
  auto operator<=>(const AnswerSpan&) const = default;

  bool intersects(const AnswerSpan& o) const { return start <= o.end && o.start <= end; }
};

struct QaPair {
  std::string id;
  std::vector<std::string> question_tokens;
  std::string answer_text;
  AnswerSpan span;
};

struct SquadExample {
  Document doc;
  std::vector<QaPair> qas;
};

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kSos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary() {
    for (const char* t : {"<pad>", "<unk>", "<sos>", "<eos>"}) append(t);
  }

  void append(const std::string& token) {
    if (to_id_.count(token)) throw ConfigError("duplicate vocabulary token: " + token);
    to_id_[token] = id_to_token_.size();
    id_to_token_.push_back(token);
  }

  std::size_t id(const std::string& token) const {
    auto it = to_id_.find(token);
    return it == to_id_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return to_id_.count(token) != 0; }

  const std::string& token(std::size_t id) const {
    if (id >= id_to_token_.size())
      throw IndexError("vocab id " + std::to_string(id) + " out of " +
                       std::to_string(id_to_token_.size()));
    return id_to_token_[id];
  }

  std::size_t size() const { return id_to_token_.size(); }

  // UTF-8 text, one non-reserved token per line; line number == id - kReserved.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open vocabulary file for writing: " + path);
    for (std::size_t i = kReserved; i < id_to_token_.size(); ++i) out << id_to_token_[i] << "\n";
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty())
        throw ParseError("empty token at " + path + ":" + std::to_string(lineno));
      v.append(line);
    }
    return v;
  }

  std::uint64_t content_hash() const {
    // FNV-1a over tokens with separators; stable across platforms.
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& t : id_to_token_) {
      for (char c : t) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    }
    return h;
  }

 private:
  std::unordered_map<std::string, std::size_t> to_id_;
  std::vector<std::string> id_to_token_;
};

// Top `size` tokens by frequency, ties broken lexicographically, after the
// four reserved ids. std::map keeps the scan order deterministic.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& streams,
                              std::size_t size) {
  if (size < 1) throw ConfigError("vocabulary size must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& stream : streams)
    for (const auto& tok : stream) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (std::size_t i = 0; i < entries.size() && i < size; ++i) v.append(entries[i].first);
  return v;
}

// Byte-level character vocabulary with PAD and UNK. Characters are bytes, so
// multi-byte UTF-8 sequences contribute one id per byte.
class CharVocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  CharVocabulary() { to_id_.fill(-1); }

  static CharVocabulary build(const std::vector<std::vector<std::string>>& streams) {
    std::array<bool, 256> seen{};
    for (const auto& stream : streams)
      for (const auto& tok : stream)
        for (char c : tok) seen[static_cast<unsigned char>(c)] = true;
    CharVocabulary v;
    for (int c = 0; c < 256; ++c)
      if (seen[c]) v.append(static_cast<unsigned char>(c));
    return v;
  }

  void append(unsigned char c) {
    if (to_id_[c] >= 0) return;
    to_id_[c] = static_cast<int>(kUnk + 1 + id_to_char_.size());
    id_to_char_.push_back(c);
  }

  std::size_t id(unsigned char c) const {
    int v = to_id_[c];
    return v < 0 ? kUnk : static_cast<std::size_t>(v);
  }

  std::size_t size() const { return kUnk + 1 + id_to_char_.size(); }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open char vocabulary file for writing: " + path);
    for (unsigned char c : id_to_char_) out << static_cast<int>(c) << "\n";
  }

  static CharVocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open char vocabulary file: " + path);
    CharVocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      int c = 0;
      try {
        c = std::stoi(line);
      } catch (const std::exception&) {
        throw ParseError("bad byte value at " + path + ":" + std::to_string(lineno));
      }
      if (c < 0 || c > 255)
        throw ParseError("byte value out of range at " + path + ":" + std::to_string(lineno));
      v.append(static_cast<unsigned char>(c));
    }
    return v;
  }

 private:
  std::array<int, 256> to_id_;
  std::vector<unsigned char> id_to_char_;
};

// ---------------------------------------------------------------------------
// Answer alignment
// ---------------------------------------------------------------------------

// Smallest token interval whose character extent covers [char_start,
// char_start + char_len). Ranges falling entirely between tokens raise
// AlignmentError.
inline AnswerSpan align_char_span(const Document& doc, std::size_t char_start,
                                  std::size_t char_len) {
  if (char_len == 0) throw AlignmentError("empty character range");
  const std::size_t char_end = char_start + char_len;
  if (char_end > doc.raw_text.size())
    throw IndexError("character range [" + std::to_string(char_start) + "," +
                     std::to_string(char_end) + ") beyond text of length " +
                     std::to_string(doc.raw_text.size()));
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < doc.offsets.size(); ++i) {
    const auto [s, e] = doc.offsets[i];
    if (s < char_end && char_start < e) {
      if (!first) first = i;
      last = i;
    }
  }
  if (!first)
    throw AlignmentError("character range [" + std::to_string(char_start) + "," +
                         std::to_string(char_end) + ") covers no token");
  return AnswerSpan{*first, *last};
}

// ---------------------------------------------------------------------------
// SQuAD v1.1 ingestion
// ---------------------------------------------------------------------------

struct AlignIssue {
  std::string doc_id;
  std::string qa_id;
  std::string kind;  // "flagged" | "dropped" | "empty"
  std::string answer_text;
  std::size_t answer_start = 0;
  std::string detail;
};

struct AlignReport {
  std::size_t total_answers = 0;
  std::size_t aligned = 0;
  std::size_t flagged = 0;
  std::size_t dropped = 0;
  std::size_t empty_qas = 0;
  std::vector<AlignIssue> issues;

  // JSON-lines, one record per flagged/dropped/empty answer.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open report file for writing: " + path);
    for (const auto& issue : issues) {
      nlohmann::json j;
      j["doc_id"] = issue.doc_id;
      j["qa_id"] = issue.qa_id;
      j["kind"] = issue.kind;
      j["answer_text"] = issue.answer_text;
      j["answer_start"] = issue.answer_start;
      j["detail"] = issue.detail;
      out << j.dump() << "\n";
    }
  }
};

struct SquadData {
  std::vector<SquadExample> examples;
  std::vector<std::string> titles;  // per example, for article-based splits
  AlignReport report;
};

namespace squad_detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key,
                                     const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError("missing field '" + std::string(key) + "' in " + where);
  return *it;
}

}  // namespace squad_detail

inline SquadData load_squad_json(const nlohmann::json& root, const std::string& origin) {
  using squad_detail::require;
  SquadData out;
  const auto& data = require(root, "data", origin);
  if (!data.is_array()) throw SchemaError("'data' is not an array in " + origin);

  for (std::size_t ai = 0; ai < data.size(); ++ai) {
    const auto& article = data[ai];
    const std::string title =
        article.contains("title") ? article["title"].get<std::string>() : ("article" + std::to_string(ai));
    const auto& paragraphs = require(article, "paragraphs", origin + " article " + title);
    for (std::size_t pi = 0; pi < paragraphs.size(); ++pi) {
      const auto& para = paragraphs[pi];
      const std::string where = origin + " " + title + "#" + std::to_string(pi);
      const std::string context = require(para, "context", where).get<std::string>();

      SquadExample ex;
      ex.doc = make_document(context, title + "#" + std::to_string(pi));

      const auto& qas = require(para, "qas", where);
      for (const auto& qa : qas) {
        const std::string question = require(qa, "question", where).get<std::string>();
        const std::string qa_id =
            qa.contains("id") ? qa["id"].get<std::string>() : (ex.doc.id + ".q" + std::to_string(ex.qas.size()));
        const auto& answers = require(qa, "answers", where + " qa " + qa_id);

        if (answers.empty()) {
          out.report.empty_qas += 1;
          out.report.issues.push_back({ex.doc.id, qa_id, "empty", "", 0, "qa has no answers"});
          continue;
        }
        // First annotation is the canonical one (train split has exactly one).
        const auto& ans = answers[0];
        const std::string text = require(ans, "text", where).get<std::string>();
        const std::size_t astart = require(ans, "answer_start", where).get<std::size_t>();
        out.report.total_answers += 1;

        QaPair pair;
        pair.id = qa_id;
        pair.answer_text = text;
        for (auto& ts : tokenize(question)) pair.question_tokens.push_back(std::move(ts.token));

        try {
          pair.span = align_char_span(ex.doc, astart, text.size());
        } catch (const std::runtime_error& e) {
          out.report.dropped += 1;
          out.report.issues.push_back({ex.doc.id, qa_id, "dropped", text, astart, e.what()});
          continue;
        }
        // Flag answers whose character range does not sit exactly on token
        // boundaries (annotation noise); the span snaps outward and is kept.
        const auto [ts, te] = std::pair{ex.doc.offsets[pair.span.start].first,
                                        ex.doc.offsets[pair.span.end].second};
        if (ts != astart || te != astart + text.size()) {
          out.report.flagged += 1;
          out.report.issues.push_back(
              {ex.doc.id, qa_id, "flagged", text, astart, "answer snapped to token boundaries"});
        }
        out.report.aligned += 1;
        ex.qas.push_back(std::move(pair));
      }
      out.examples.push_back(std::move(ex));
      out.titles.push_back(title);
    }
  }
  return out;
}

inline SquadData load_squad(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open SQuAD file: " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed JSON in " + path + ": " + e.what());
  }
  return load_squad_json(root, path);
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

struct PaddedBatch {
  std::vector<std::size_t> example_ids;
  std::vector<std::vector<std::size_t>> token_ids;  // right-padded with PAD
  std::vector<std::size_t> lengths;                 // true lengths
  std::size_t width = 0;
};

// One epoch of shuffled, padded batches over token sequences. The rng is the
// only source of order, so a fixed seed reproduces the batch stream exactly.
inline std::vector<PaddedBatch> batch_iterate(
    const std::vector<std::vector<std::size_t>>& sequences, std::size_t batch_size,
    RngStream& rng) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<PaddedBatch> out;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    PaddedBatch batch;
    const std::size_t end = std::min(at + batch_size, order.size());
    for (std::size_t i = at; i < end; ++i) {
      batch.example_ids.push_back(order[i]);
      batch.lengths.push_back(sequences[order[i]].size());
      batch.width = std::max(batch.width, sequences[order[i]].size());
    }
    for (std::size_t i = at; i < end; ++i) {
      std::vector<std::size_t> row = sequences[order[i]];
      row.resize(batch.width, Vocabulary::kPad);
      batch.token_ids.push_back(std::move(row));
    }
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace qg
