#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qg/corpus.hpp"
#include "qg/error.hpp"
#include "qg/graph.hpp"
#include "qg/lstm.hpp"

namespace qg {

struct WordRepConfig {
  std::size_t word_dim = 300;
  std::size_t char_dim = 32;     // char embedding width
  std::size_t char_hidden = 16;  // per direction; the char vector is 2x this

  std::size_t rep_dim() const { return word_dim + 2 * char_hidden; }

  void validate() const {
    if (word_dim == 0 || char_dim == 0 || char_hidden == 0)
      throw ConfigError("word representation dims must be positive");
  }
};

// Word-only input layer (key-phrase extractors). Holding this type rather
// than WordCharRep is what keeps character features out of those models.
struct WordRep {
  const Vocabulary* vocab = nullptr;
  Param* table = nullptr;  // [V x word_dim]

  static WordRep create(ParamSet& ps, const std::string& prefix, const Vocabulary& vocab,
                        std::size_t word_dim, RngStream& rng) {
    WordRep r;
    r.vocab = &vocab;
    r.table = &ps.add(prefix + ".word_table", Tensor::uniform(vocab.size(), word_dim, rng));
    return r;
  }

  Var embed(Graph& g, const std::string& token) const {
    return lookup(g.param(*table), vocab->id(token));
  }

  Var embed_id(Graph& g, std::size_t id) const { return lookup(g.param(*table), id); }
};

// Word + character input layer (question generator): word embedding
// concatenated with the final states of a bi-LSTM over character embeddings.
struct WordCharRep {
  WordRepConfig cfg;
  const Vocabulary* vocab = nullptr;
  const CharVocabulary* chars = nullptr;
  Param* word_table = nullptr;  // [V x word_dim]
  Param* char_table = nullptr;  // [C x char_dim]
  LstmCellParams char_fwd;
  LstmCellParams char_bwd;

  static WordCharRep create(ParamSet& ps, const std::string& prefix, const Vocabulary& vocab,
                            const CharVocabulary& chars, const WordRepConfig& cfg,
                            RngStream& rng) {
    cfg.validate();
    WordCharRep r;
    r.cfg = cfg;
    r.vocab = &vocab;
    r.chars = &chars;
    r.word_table = &ps.add(prefix + ".word_table", Tensor::uniform(vocab.size(), cfg.word_dim, rng));
    r.char_table = &ps.add(prefix + ".char_table", Tensor::uniform(chars.size(), cfg.char_dim, rng));
    r.char_fwd = LstmCellParams::create(ps, prefix + ".char_fwd", cfg.char_dim, cfg.char_hidden, rng);
    r.char_bwd = LstmCellParams::create(ps, prefix + ".char_bwd", cfg.char_dim, cfg.char_hidden, rng);
    return r;
  }

  // Final forward state over the characters joined with the final backward
  // state; empty tokens cannot occur (the tokenizer never emits them).
  Var char_encoding(Graph& g, const std::string& token) const {
    Var table = g.param(*char_table);
    std::vector<Var> embs;
    embs.reserve(token.size());
    for (char c : token) embs.push_back(lookup(table, chars->id(static_cast<unsigned char>(c))));
    LstmState f = lstm_zero_state(g, cfg.char_hidden);
    for (std::size_t t = 0; t < embs.size(); ++t) f = lstm_cell_step(g, char_fwd, embs[t], f);
    LstmState b = lstm_zero_state(g, cfg.char_hidden);
    for (std::size_t t = embs.size(); t-- > 0;) b = lstm_cell_step(g, char_bwd, embs[t], b);
    return concat_cols({f.h, b.h});
  }

  Var word_representation(Graph& g, const std::string& token) const {
    Var w = lookup(g.param(*word_table), vocab->id(token));
    return concat_cols({w, char_encoding(g, token)});
  }
};

// Pretrained embedding text format: one token per line, `token v1 ... vD`,
// whitespace separated. Tokens absent from the vocabulary are skipped; vocab
// tokens absent from the file keep their random initialization. Returns the
// number of rows filled.
inline std::size_t load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                              Tensor& table) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open embedding file: " + path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t filled = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (token.empty())
      throw ParseError("missing token at " + path + ":" + std::to_string(lineno));
    std::vector<double> values;
    values.reserve(table.cols);
    double v;
    while (ss >> v) values.push_back(v);
    if (values.size() != table.cols)
      throw ParseError("expected " + std::to_string(table.cols) + " values at " + path + ":" +
                       std::to_string(lineno) + ", got " + std::to_string(values.size()));
    if (!vocab.contains(token)) continue;
    const std::size_t row = vocab.id(token);
    std::copy(values.begin(), values.end(), table.row_ptr(row));
    ++filled;
  }
  return filled;
}

// ---------------------------------------------------------------------------
// Answer conditioning
// ---------------------------------------------------------------------------

struct AnswerEncoderParams {
  LstmCellParams agg_fwd;
  LstmCellParams agg_bwd;

  static AnswerEncoderParams create(ParamSet& ps, const std::string& prefix,
                                    std::size_t doc_annotation_dim, std::size_t hidden,
                                    RngStream& rng) {
    AnswerEncoderParams p;
    p.agg_fwd = LstmCellParams::create(ps, prefix + ".agg_fwd", doc_annotation_dim, hidden, rng);
    p.agg_bwd = LstmCellParams::create(ps, prefix + ".agg_bwd", doc_annotation_dim, hidden, rng);
    return p;
  }

  std::size_t out_dim(std::size_t doc_annotation_dim) const {
    return agg_fwd.hidden_dim + agg_bwd.hidden_dim + doc_annotation_dim;
  }
};

// Condition-aggregation encoding of an answer span: a BiLSTM runs over the
// document annotation rows of the span; its final state is joined with the
// annotation vector at the span end.
inline Var answer_condition_encode(Graph& g, const AnswerEncoderParams& p,
                                   const AnnotationMatrix& doc, const AnswerSpan& span) {
  if (span.end >= doc.length)
    throw IndexError("answer span [" + std::to_string(span.start) + "," +
                     std::to_string(span.end) + "] out of annotation length " +
                     std::to_string(doc.length));
  std::vector<Var> rows;
  for (std::size_t i = span.start; i <= span.end; ++i) rows.push_back(pick_row(doc.h, i));
  AnnotationMatrix agg = bilstm_encode(g, p.agg_fwd, p.agg_bwd, rows, rows.size());
  Var final_state = concat_cols({agg.fwd_final, agg.bwd_final});
  Var answer_row = pick_row(doc.h, span.end);
  return concat_cols({final_state, answer_row});
}

}  // namespace qg
