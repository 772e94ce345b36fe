#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "qg/corpus.hpp"
#include "qg/entities.hpp"
#include "qg/graph.hpp"
#include "qg/lstm.hpp"
#include "qg/wordrep.hpp"

namespace qg {

// Ordered, exact-deduplicated span list, sorted by (start, end).
struct KeyPhraseSet {
  std::vector<AnswerSpan> spans;

  static KeyPhraseSet from(std::vector<AnswerSpan> raw) {
    std::sort(raw.begin(), raw.end());
    raw.erase(std::unique(raw.begin(), raw.end()), raw.end());
    return KeyPhraseSet{std::move(raw)};
  }

  std::vector<std::vector<std::string>> texts(const Document& doc) const {
    std::vector<std::vector<std::string>> out;
    for (const AnswerSpan& s : spans)
      out.emplace_back(doc.tokens.begin() + static_cast<std::ptrdiff_t>(s.start),
                       doc.tokens.begin() + static_cast<std::ptrdiff_t>(s.end) + 1);
    return out;
  }
};

struct ExtractorConfig {
  std::size_t word_dim = 300;
  std::size_t enc_hidden = 128;  // per direction; annotation width is 2x
  std::size_t dec_hidden = 256;  // pointer decoder LSTM
  std::size_t nes_hidden1 = 256;
  std::size_t nes_hidden2 = 64;
  std::size_t k = 6;             // NES selection count
  std::size_t max_phrases = 10;  // pointer decode cap
  double dropout = 0.5;

  std::size_t annotation_dim() const { return 2 * enc_hidden; }

  void validate() const {
    if (word_dim == 0 || enc_hidden == 0 || dec_hidden == 0 || nes_hidden1 == 0 ||
        nes_hidden2 == 0 || k == 0 || max_phrases == 0)
      throw ConfigError("extractor dimensions and counts must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
  }
};

namespace kp_detail {

inline Var maybe_dropout(Graph& g, Var x, double rate, DropoutMode mode, RngStream* rng) {
  if (mode == DropoutMode::Eval || rate == 0.0) return x;
  return dropout(x, rate, mode, *rng);
}

}  // namespace kp_detail

// Document encoder shared by both extractors: word embeddings only.
struct KeyphraseEncoder {
  WordRep rep;
  LstmCellParams fwd;
  LstmCellParams bwd;

  static KeyphraseEncoder create(ParamSet& ps, const std::string& prefix, const Vocabulary& vocab,
                                 const ExtractorConfig& cfg, RngStream& rng) {
    KeyphraseEncoder enc;
    enc.rep = WordRep::create(ps, prefix, vocab, cfg.word_dim, rng);
    enc.fwd = LstmCellParams::create(ps, prefix + ".fwd", cfg.word_dim, cfg.enc_hidden, rng);
    enc.bwd = LstmCellParams::create(ps, prefix + ".bwd", cfg.word_dim, cfg.enc_hidden, rng);
    return enc;
  }

  AnnotationMatrix encode(Graph& g, const std::vector<std::string>& tokens, double drop_rate,
                          DropoutMode mode, RngStream* rng) const {
    std::vector<Var> inputs;
    inputs.reserve(tokens.size());
    for (const auto& t : tokens)
      inputs.push_back(kp_detail::maybe_dropout(g, rep.embed(g, t), drop_rate, mode, rng));
    AnnotationMatrix ann = bilstm_encode(g, fwd, bwd, inputs, tokens.size());
    ann.h = kp_detail::maybe_dropout(g, ann.h, drop_rate, mode, rng);
    return ann;
  }
};

// ---------------------------------------------------------------------------
// Neural entity selection
// ---------------------------------------------------------------------------

class NesModel {
 public:
  ExtractorConfig cfg;
  Vocabulary vocab;
  ParamSet params;
  KeyphraseEncoder encoder;
  Param* mlp_w1 = nullptr;
  Param* mlp_b1 = nullptr;
  Param* mlp_w2 = nullptr;
  Param* mlp_b2 = nullptr;
  Param* mlp_w3 = nullptr;
  Param* mlp_b3 = nullptr;

  NesModel(Vocabulary v, const ExtractorConfig& c, std::uint64_t seed) : cfg(c), vocab(std::move(v)) {
    cfg.validate();
    RngStream rng(seed);
    encoder = KeyphraseEncoder::create(params, "enc", vocab, cfg, rng);
    const std::size_t feat = 3 * cfg.annotation_dim();
    mlp_w1 = &params.add("mlp.w1", Tensor::uniform(feat, cfg.nes_hidden1, rng));
    mlp_b1 = &params.add("mlp.b1", Tensor(1, cfg.nes_hidden1));
    mlp_w2 = &params.add("mlp.w2", Tensor::uniform(cfg.nes_hidden1, cfg.nes_hidden2, rng));
    mlp_b2 = &params.add("mlp.b2", Tensor(1, cfg.nes_hidden2));
    mlp_w3 = &params.add("mlp.w3", Tensor::uniform(cfg.nes_hidden2, 1, rng));
    mlp_b3 = &params.add("mlp.b3", Tensor(1, 1));
  }
};

// <h_nd ; h_avg ; h_e>: final annotation row, mean over all rows, mean over
// the entity's rows.
inline Var nes_features(Graph& g, const AnnotationMatrix& ann, const EntitySpan& entity) {
  const std::size_t n = ann.length;
  if (entity.span.end >= n)
    throw IndexError("entity span beyond document length " + std::to_string(n));
  Var real_rows = ann.rows == n ? ann.h : slice_rows(ann.h, 0, n);
  Var h_final = pick_row(ann.h, n - 1);
  Var h_avg = matmul(g.constant(Tensor::full(1, n, 1.0 / static_cast<double>(n))), real_rows);
  const std::size_t len = entity.span.end - entity.span.start + 1;
  Var span_rows = slice_rows(ann.h, entity.span.start, entity.span.end + 1);
  Var h_entity = matmul(g.constant(Tensor::full(1, len, 1.0 / static_cast<double>(len))), span_rows);
  return concat_cols({h_final, h_avg, h_entity});
}

// Three-layer MLP with a scalar sigmoid head; P(entity is an answer).
inline Var nes_score(Graph& g, const NesModel& m, Var features, DropoutMode mode = DropoutMode::Eval,
                     RngStream* rng = nullptr) {
  if (features.cols() != 3 * m.cfg.annotation_dim())
    throw ShapeError("nes feature width " + std::to_string(features.cols()) + " != " +
                     std::to_string(3 * m.cfg.annotation_dim()));
  Var h1 = tanh(add(matmul(features, g.param(*m.mlp_w1)), g.param(*m.mlp_b1)));
  h1 = kp_detail::maybe_dropout(g, h1, m.cfg.dropout, mode, rng);
  Var h2 = tanh(add(matmul(h1, g.param(*m.mlp_w2)), g.param(*m.mlp_b2)));
  h2 = kp_detail::maybe_dropout(g, h2, m.cfg.dropout, mode, rng);
  return sigmoid(add(matmul(h2, g.param(*m.mlp_w3)), g.param(*m.mlp_b3)));
}

inline bool entity_overlaps_gold(const EntitySpan& e, const std::vector<AnswerSpan>& gold) {
  for (const AnswerSpan& gspan : gold)
    if (e.span.intersects(gspan)) return true;
  return false;
}

// Mean binary cross-entropy over all candidates; label 1 iff the entity
// overlaps any gold answer span. Empty candidate list signals skip-example.
inline std::optional<Var> nes_loss(Graph& g, const NesModel& m,
                                   const std::vector<std::string>& tokens,
                                   const std::vector<EntitySpan>& entities,
                                   const std::vector<AnswerSpan>& gold,
                                   DropoutMode mode = DropoutMode::Eval, RngStream* rng = nullptr) {
  if (entities.empty()) return std::nullopt;
  AnnotationMatrix ann = m.encoder.encode(g, tokens, m.cfg.dropout, mode, rng);
  Var total = g.constant(Tensor::scalar(0.0));
  for (const EntitySpan& e : entities) {
    Var p = nes_score(g, m, nes_features(g, ann, e), mode, rng);
    Var term = entity_overlaps_gold(e, gold)
                   ? affine(log(affine(p, 1.0, kLogEps)), -1.0, 0.0)        // -log(p)
                   : affine(log(affine(p, -1.0, 1.0 + kLogEps)), -1.0, 0.0);  // -log(1-p)
    total = add(total, term);
  }
  return affine(total, 1.0 / static_cast<double>(entities.size()), 0.0);
}

// Top min(k, n_e) entities by score; ties prefer earlier start, then the
// shorter span. Pure given parameters.
inline KeyPhraseSet nes_select_topk(const NesModel& m, const std::vector<std::string>& tokens,
                                    const std::vector<EntitySpan>& entities) {
  if (entities.empty()) return {};
  Graph g;
  AnnotationMatrix ann = m.encoder.encode(g, tokens, 0.0, DropoutMode::Eval, nullptr);
  struct Scored {
    double score;
    AnswerSpan span;
  };
  std::vector<Scored> scored;
  scored.reserve(entities.size());
  for (const EntitySpan& e : entities)
    scored.push_back({nes_score(g, m, nes_features(g, ann, e)).item(), e.span});
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    return (a.span.end - a.span.start) < (b.span.end - b.span.start);
  });
  std::vector<AnswerSpan> picked;
  for (std::size_t i = 0; i < scored.size() && i < m.cfg.k; ++i) picked.push_back(scored[i].span);
  return KeyPhraseSet::from(std::move(picked));
}

// ---------------------------------------------------------------------------
// Pointer network extractor
// ---------------------------------------------------------------------------

class PtrNetModel {
 public:
  ExtractorConfig cfg;
  Vocabulary vocab;
  ParamSet params;
  KeyphraseEncoder encoder;
  Param* term_embed = nullptr;  // virtual terminator annotation row
  LstmCellParams dec;
  Param* attn_w1 = nullptr;   // [dec_hidden x annotation_dim]
  Param* init_proj = nullptr; // [annotation_dim x dec_hidden]

  PtrNetModel(Vocabulary v, const ExtractorConfig& c, std::uint64_t seed)
      : cfg(c), vocab(std::move(v)) {
    cfg.validate();
    RngStream rng(seed);
    encoder = KeyphraseEncoder::create(params, "enc", vocab, cfg, rng);
    term_embed = &params.add("term_embed", Tensor::uniform(1, cfg.annotation_dim(), rng));
    dec = LstmCellParams::create(params, "dec", cfg.word_dim, cfg.dec_hidden, rng);
    attn_w1 = &params.add("attn_w1", Tensor::uniform(cfg.dec_hidden, cfg.annotation_dim(), rng));
    init_proj = &params.add("init_proj", Tensor::uniform(cfg.annotation_dim(), cfg.dec_hidden, rng));
  }
};

// Teacher-forcing targets: boundary pairs sorted left to right, flattened to
// start1, end1, start2, end2, ..., then the terminator position n_d twice so
// decoding length stays even.
inline std::vector<std::size_t> ptrnet_target_sequence(std::vector<AnswerSpan> gold,
                                                       std::size_t n_d) {
  for (const AnswerSpan& s : gold)
    if (s.end >= n_d)
      throw IndexError("gold span end " + std::to_string(s.end) + " out of document length " +
                       std::to_string(n_d));
  std::sort(gold.begin(), gold.end());
  gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
  std::vector<std::size_t> targets;
  targets.reserve(2 * gold.size() + 2);
  for (const AnswerSpan& s : gold) {
    targets.push_back(s.start);
    targets.push_back(s.end);
  }
  targets.push_back(n_d);
  targets.push_back(n_d);
  return targets;
}

// Document annotations with the learned terminator row appended.
inline AnnotationMatrix ptrnet_encode(Graph& g, const PtrNetModel& m,
                                      const std::vector<std::string>& tokens, DropoutMode mode,
                                      RngStream* rng) {
  AnnotationMatrix ann = m.encoder.encode(g, tokens, m.cfg.dropout, mode, rng);
  AnnotationMatrix out = ann;
  out.h = concat_rows({ann.h, g.param(*m.term_embed)});
  out.rows = ann.rows + 1;
  out.length = ann.length + 1;
  return out;
}

// General attention over document positions plus terminator:
// softmax(W1 h_dec . h_i) with PAD rows masked out.
inline Var ptrnet_attention(Graph& g, const PtrNetModel& m, Var dec_state,
                            const AnnotationMatrix& with_term) {
  Var scores = matmul(matmul(dec_state, g.param(*m.attn_w1)), transpose(with_term.h));
  return masked_softmax_row(scores, with_term.length);
}

namespace kp_detail {

// Decoder input: the document word at the previous pointed position; SOS
// before the first step, EOS for the terminator position.
inline Var ptr_input(Graph& g, const PtrNetModel& m, const std::vector<std::string>& tokens,
                     std::optional<std::size_t> prev_position) {
  if (!prev_position) return m.encoder.rep.embed_id(g, Vocabulary::kSos);
  if (*prev_position >= tokens.size()) return m.encoder.rep.embed_id(g, Vocabulary::kEos);
  return m.encoder.rep.embed(g, tokens[*prev_position]);
}

inline LstmState ptr_init_state(Graph& g, const PtrNetModel& m, const AnnotationMatrix& with_term) {
  // Final document annotation row; the terminator row when the document is empty.
  const std::size_t last_real = with_term.length >= 2 ? with_term.length - 2 : 0;
  Var h0 = matmul(pick_row(with_term.h, last_real), g.param(*m.init_proj));
  return {h0, g.constant(Tensor(1, m.cfg.dec_hidden))};
}

}  // namespace kp_detail

// Teacher-forced mean NLL of the gold boundary sequence.
inline Var ptrnet_loss(Graph& g, const PtrNetModel& m, const std::vector<std::string>& tokens,
                       const std::vector<AnswerSpan>& gold, DropoutMode mode = DropoutMode::Eval,
                       RngStream* rng = nullptr) {
  const std::vector<std::size_t> targets = ptrnet_target_sequence(gold, tokens.size());
  AnnotationMatrix with_term = ptrnet_encode(g, m, tokens, mode, rng);

  LstmState state = kp_detail::ptr_init_state(g, m, with_term);
  std::optional<std::size_t> prev;
  Var total = g.constant(Tensor::scalar(0.0));
  for (std::size_t target : targets) {
    Var x = kp_detail::ptr_input(g, m, tokens, prev);
    state = lstm_cell_step(g, m.dec, x, state);
    Var h = kp_detail::maybe_dropout(g, state.h, m.cfg.dropout, mode, rng);
    Var alpha = ptrnet_attention(g, m, h, with_term);
    total = add(total, nll_of_prob(alpha, target));
    prev = target;
  }
  return affine(total, 1.0 / static_cast<double>(targets.size()), 0.0);
}

// Post-processing of a raw pointed sequence: consume start/end pairs until a
// start step hits the terminator; drop pairs whose end precedes the start or
// lands on the terminator; collapse exact duplicates and sort.
inline KeyPhraseSet ptrnet_spans_from_pointed(const std::vector<std::size_t>& pointed,
                                              std::size_t term) {
  std::vector<AnswerSpan> spans;
  for (std::size_t i = 0; i + 1 < pointed.size(); i += 2) {
    const std::size_t start = pointed[i];
    if (start == term) break;
    const std::size_t end = pointed[i + 1];
    if (end == term || end < start) continue;
    spans.push_back(AnswerSpan{start, end});
  }
  return KeyPhraseSet::from(std::move(spans));
}

// Greedy alternating start/end decoding. Stops when a start step picks the
// terminator or max_phrases pairs have been attempted, so the step count is
// bounded by 2*max_phrases + 1.
inline KeyPhraseSet ptrnet_decode(const PtrNetModel& m, const std::vector<std::string>& tokens,
                                  std::size_t max_phrases = 0) {
  if (max_phrases == 0) max_phrases = m.cfg.max_phrases;
  const std::size_t term = tokens.size();

  Graph g;
  AnnotationMatrix with_term = ptrnet_encode(g, m, tokens, DropoutMode::Eval, nullptr);
  LstmState state = kp_detail::ptr_init_state(g, m, with_term);
  std::optional<std::size_t> prev;

  auto argmax_step = [&]() {
    Var x = kp_detail::ptr_input(g, m, tokens, prev);
    state = lstm_cell_step(g, m.dec, x, state);
    Var alpha = ptrnet_attention(g, m, state.h, with_term);
    const Tensor& a = alpha.value();
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.size(); ++i)
      if (a.data[i] > a.data[best]) best = i;
    prev = best;
    return best;
  };

  std::vector<std::size_t> pointed;
  for (std::size_t phrase = 0; phrase < max_phrases; ++phrase) {
    const std::size_t start = argmax_step();
    if (start == term) {
      pointed.push_back(start);
      break;
    }
    pointed.push_back(start);
    pointed.push_back(argmax_step());
  }
  return ptrnet_spans_from_pointed(pointed, term);
}

}  // namespace qg
