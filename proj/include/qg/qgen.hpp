#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qg/corpus.hpp"
#include "qg/graph.hpp"
#include "qg/lstm.hpp"
#include "qg/wordrep.hpp"

namespace qg {

struct QgenConfig {
  WordRepConfig wordrep;          // word + character input representation
  std::size_t enc_hidden = 192;   // doc encoder per direction (384 total)
  std::size_t agg_hidden = 192;   // condition aggregation per direction
  std::size_t dec_hidden = 384;   // c1 / c2 cells
  std::size_t att_hidden = 384;   // attention network f
  std::size_t gen_hidden = 384;   // generative network g
  std::size_t max_length = 30;    // greedy decode cap
  double dropout = 0.3;

  std::size_t annotation_dim() const { return 2 * enc_hidden; }
  std::size_t answer_dim() const { return 2 * agg_hidden + annotation_dim(); }
  // switch input: s2, v, max(alpha), max(o), H(alpha), H(o)
  std::size_t switch_dim() const { return dec_hidden + annotation_dim() + 4; }

  void validate() const {
    wordrep.validate();
    if (enc_hidden == 0 || agg_hidden == 0 || dec_hidden == 0 || att_hidden == 0 ||
        gen_hidden == 0 || max_length == 0)
      throw ConfigError("qgen dimensions must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
  }
};

// Sequence-to-sequence question generator with a pointer-softmax decoder:
// word+char input representations, BiLSTM document encoder, condition
// aggregation answer encoding, cascading decoder cells c1/c2, attention f,
// generative network g over a fixed decoder vocabulary, and switch network h
// interpolating the copy and generate distributions.
class QgenModel {
 public:
  QgenConfig cfg;
  Vocabulary vocab;          // input-side words (documents and questions)
  Vocabulary decoder_vocab;  // generative output vocabulary
  CharVocabulary chars;
  ParamSet params;

  WordCharRep rep;
  LstmCellParams enc_fwd, enc_bwd;
  AnswerEncoderParams ans_enc;
  LstmCellParams c1;  // consumes y_prev, recurrent in s2
  LstmCellParams c2;  // consumes v, recurrent in s1

  Param* att_wh = nullptr;  // [annotation_dim x att_hidden]
  Param* att_wa = nullptr;  // [answer_dim x att_hidden]
  Param* att_ws = nullptr;  // [dec_hidden x att_hidden]
  Param* att_b = nullptr;   // [1 x att_hidden]
  Param* att_v = nullptr;   // [att_hidden x 1]

  Param* gen_w1 = nullptr;  // [(rep+dec+ann+ans) x gen_hidden]
  Param* gen_b1 = nullptr;
  Param* gen_w2 = nullptr;  // [gen_hidden x |decoder vocab|]
  Param* gen_b2 = nullptr;

  Param* sw_t1_w = nullptr;  // highway layer 1 transform
  Param* sw_t1_b = nullptr;
  Param* sw_g1_w = nullptr;  // highway layer 1 gate
  Param* sw_g1_b = nullptr;
  Param* sw_t2_w = nullptr;
  Param* sw_t2_b = nullptr;
  Param* sw_g2_w = nullptr;
  Param* sw_g2_b = nullptr;
  Param* sw_out_w = nullptr;  // [switch_dim x 1]
  Param* sw_out_b = nullptr;

  Param* init_w = nullptr;  // [(annotation_dim + answer_dim) x dec_hidden]
  Param* init_b = nullptr;

  QgenModel(Vocabulary input_vocab, Vocabulary dec_vocab, CharVocabulary char_vocab,
            const QgenConfig& c, std::uint64_t seed)
      : cfg(c),
        vocab(std::move(input_vocab)),
        decoder_vocab(std::move(dec_vocab)),
        chars(std::move(char_vocab)) {
    cfg.validate();
    RngStream rng(seed);
    rep = WordCharRep::create(params, "rep", vocab, chars, cfg.wordrep, rng);
    const std::size_t in = cfg.wordrep.rep_dim();
    enc_fwd = LstmCellParams::create(params, "enc_fwd", in, cfg.enc_hidden, rng);
    enc_bwd = LstmCellParams::create(params, "enc_bwd", in, cfg.enc_hidden, rng);
    ans_enc = AnswerEncoderParams::create(params, "ans", cfg.annotation_dim(), cfg.agg_hidden, rng);
    c1 = LstmCellParams::create(params, "c1", in, cfg.dec_hidden, rng);
    c2 = LstmCellParams::create(params, "c2", cfg.annotation_dim(), cfg.dec_hidden, rng);

    att_wh = &params.add("att.wh", Tensor::uniform(cfg.annotation_dim(), cfg.att_hidden, rng));
    att_wa = &params.add("att.wa", Tensor::uniform(cfg.answer_dim(), cfg.att_hidden, rng));
    att_ws = &params.add("att.ws", Tensor::uniform(cfg.dec_hidden, cfg.att_hidden, rng));
    att_b = &params.add("att.b", Tensor(1, cfg.att_hidden));
    att_v = &params.add("att.v", Tensor::uniform(cfg.att_hidden, 1, rng));

    const std::size_t gen_in =
        cfg.wordrep.rep_dim() + cfg.dec_hidden + cfg.annotation_dim() + cfg.answer_dim();
    gen_w1 = &params.add("gen.w1", Tensor::uniform(gen_in, cfg.gen_hidden, rng));
    gen_b1 = &params.add("gen.b1", Tensor(1, cfg.gen_hidden));
    gen_w2 = &params.add("gen.w2", Tensor::uniform(cfg.gen_hidden, decoder_vocab.size(), rng));
    gen_b2 = &params.add("gen.b2", Tensor(1, decoder_vocab.size()));

    const std::size_t sw = cfg.switch_dim();
    sw_t1_w = &params.add("sw.t1_w", Tensor::uniform(sw, sw, rng));
    sw_t1_b = &params.add("sw.t1_b", Tensor(1, sw));
    sw_g1_w = &params.add("sw.g1_w", Tensor::uniform(sw, sw, rng));
    sw_g1_b = &params.add("sw.g1_b", Tensor(1, sw));
    sw_t2_w = &params.add("sw.t2_w", Tensor::uniform(sw, sw, rng));
    sw_t2_b = &params.add("sw.t2_b", Tensor(1, sw));
    sw_g2_w = &params.add("sw.g2_w", Tensor::uniform(sw, sw, rng));
    sw_g2_b = &params.add("sw.g2_b", Tensor(1, sw));
    sw_out_w = &params.add("sw.out_w", Tensor::uniform(sw, 1, rng));
    sw_out_b = &params.add("sw.out_b", Tensor(1, 1));

    init_w = &params.add("init.w",
                         Tensor::uniform(cfg.annotation_dim() + cfg.answer_dim(), cfg.dec_hidden, rng));
    init_b = &params.add("init.b", Tensor(1, cfg.dec_hidden));
  }
};

// Per-sequence (variational) dropout masks, one per dropout site, sampled
// once and reused across time steps. Inactive masks are absent Vars.
struct QgenDropout {
  bool active = false;
  Var emb;  // embedding outputs
  Var s1;   // recurrent state s1 between steps
  Var s2;   // recurrent state s2 between steps

  static QgenDropout make(Graph& g, const QgenModel& m, DropoutMode mode, RngStream* rng) {
    QgenDropout d;
    if (mode == DropoutMode::Eval || m.cfg.dropout == 0.0) return d;
    d.active = true;
    auto mask = [&](std::size_t cols) {
      Tensor t(1, cols);
      const double keep = 1.0 / (1.0 - m.cfg.dropout);
      for (double& v : t.data) v = rng->uniform01() < m.cfg.dropout ? 0.0 : keep;
      return g.constant(std::move(t));
    };
    d.emb = mask(m.cfg.wordrep.rep_dim());
    d.s1 = mask(m.cfg.dec_hidden);
    d.s2 = mask(m.cfg.dec_hidden);
    return d;
  }

  Var embedding(Var x) const { return active ? mul(x, emb) : x; }
  Var state1(Var x) const { return active ? mul(x, s1) : x; }
  Var state2(Var x) const { return active ? mul(x, s2) : x; }
};

struct DecoderState {
  LstmState s1;
  LstmState s2;
  Var y_prev;  // representation of the previous output token
};

struct StepOutput {
  Var alpha;  // copy distribution over document positions
  Var v;      // context vector
  Var o;      // generative distribution over the decoder vocabulary
  Var s;      // switch scalar in (0,1)
  Var mixed;  // [s*alpha ; (1-s)*o]
};

// Document encoding with word+char representations.
inline AnnotationMatrix qgen_encode(Graph& g, const QgenModel& m,
                                    const std::vector<std::string>& tokens,
                                    const QgenDropout& drop) {
  std::vector<Var> inputs;
  inputs.reserve(tokens.size());
  for (const auto& t : tokens) inputs.push_back(drop.embedding(m.rep.word_representation(g, t)));
  return bilstm_encode(g, m.enc_fwd, m.enc_bwd, inputs, tokens.size());
}

// Eq.-style attention: per-position two-layer MLP (tanh, then softmax over
// positions) on (h_i, h_a, s1_prev), computed matrix-wise with shared weights.
inline Var attention_alpha(Graph& g, const QgenModel& m, const AnnotationMatrix& doc,
                           Var answer_enc, Var s1_prev) {
  Var pos_part = matmul(doc.h, g.param(*m.att_wh));  // [n x att]
  Var shared = add(add(matmul(answer_enc, g.param(*m.att_wa)), matmul(s1_prev, g.param(*m.att_ws))),
                   g.param(*m.att_b));               // [1 x att]
  Var scores = matmul(tanh(add_rowvec(pos_part, shared)), g.param(*m.att_v));  // [n x 1]
  return masked_softmax_row(transpose(scores), doc.length);
}

// v = sum_i alpha_i h_i.
inline Var context_vector(Graph& g, Var alpha, const AnnotationMatrix& doc) {
  if (alpha.cols() != doc.h.value().rows)
    throw ShapeError("alpha length " + std::to_string(alpha.cols()) + " != annotation rows " +
                     std::to_string(doc.h.value().rows));
  (void)g;
  return matmul(alpha, doc.h);
}

// The cascade of the two decoder cells: s1 = c1(y_prev, s2_prev),
// s2 = c2(v, s1). Each cell keeps its own memory; the *hidden* recurrence is
// crossed between the cells.
inline DecoderState decoder_step(Graph& g, const QgenModel& m, const DecoderState& state, Var v,
                                 const QgenDropout& drop) {
  LstmState s1 = lstm_cell_step(
      g, m.c1, state.y_prev, LstmState{drop.state2(state.s2.h), state.s1.c});
  LstmState s2 = lstm_cell_step(g, m.c2, v, LstmState{drop.state1(s1.h), state.s2.c});
  return DecoderState{s1, s2, state.y_prev};
}

// Two-layer MLP g over (y_prev, s2, v, h_a); softmax over the decoder vocab.
inline Var generative_distribution(Graph& g, const QgenModel& m, Var y_prev, Var s2, Var v,
                                   Var answer_enc) {
  Var input = concat_cols({y_prev, s2, v, answer_enc});
  Var h = tanh(add(matmul(input, g.param(*m.gen_w1)), g.param(*m.gen_b1)));
  return softmax_rows(add(matmul(h, g.param(*m.gen_w2)), g.param(*m.gen_b2)));
}

namespace qgen_detail {

inline Var highway_layer(Graph& g, Var x, Param& wt, Param& bt, Param& wg, Param& bg) {
  Var t = tanh(add(matmul(x, g.param(wt)), g.param(bt)));
  Var gate = sigmoid(add(matmul(x, g.param(wg)), g.param(bg)));
  // gate*t + (1-gate)*x
  return add(mul(gate, t), mul(affine(gate, -1.0, 1.0), x));
}

}  // namespace qgen_detail

// Switch scalar: three-layer network with two tanh-highway layers and a
// sigmoid head. The variable-length alpha enters through fixed-size
// summaries: the context vector already carries alpha-weighted content, and
// max(alpha), max(o) plus the entropies of both distributions are appended.
inline Var switch_scalar(Graph& g, const QgenModel& m, Var s2, Var v, Var alpha, Var o) {
  Var input = concat_cols(
      {s2, v, max_all(alpha), max_all(o), entropy_nats(alpha), entropy_nats(o)});
  Var h1 = qgen_detail::highway_layer(g, input, *m.sw_t1_w, *m.sw_t1_b, *m.sw_g1_w, *m.sw_g1_b);
  Var h2 = qgen_detail::highway_layer(g, h1, *m.sw_t2_w, *m.sw_t2_b, *m.sw_g2_w, *m.sw_g2_b);
  return sigmoid(add(matmul(h2, g.param(*m.sw_out_w)), g.param(*m.sw_out_b)));
}

// [s*alpha ; (1-s)*o]: a distribution over document positions then vocab ids.
inline Var pointer_softmax_mix(Graph& g, Var alpha, Var o, Var s) {
  (void)g;
  return concat_cols({scale_by(s, alpha), scale_by(affine(s, -1.0, 1.0), o)});
}

// Probability of the gold token under the mixed distribution: mass of every
// document position holding the token plus its decoder-vocab mass. A token
// absent from both channels falls back to the UNK vocab channel and is
// flagged for the training report.
struct TokenLikelihood {
  Var prob;
  bool oov_fallback = false;
};

inline TokenLikelihood token_likelihood(Graph& g, const QgenModel& m, Var mixed,
                                        const std::vector<std::string>& doc_tokens,
                                        const std::string& gold) {
  (void)g;
  const std::size_t n = doc_tokens.size();
  std::vector<std::size_t> channels;
  for (std::size_t i = 0; i < n; ++i)
    if (doc_tokens[i] == gold) channels.push_back(i);
  if (m.decoder_vocab.contains(gold)) channels.push_back(n + m.decoder_vocab.id(gold));
  TokenLikelihood out;
  out.oov_fallback = channels.empty();
  if (out.oov_fallback) channels.push_back(n + Vocabulary::kUnk);
  out.prob = select_sum(mixed, channels);
  return out;
}

// Initial decoder state: s2 from an affine projection of (final document
// annotation row, answer encoding); s1 zero; y_prev the SOS representation.
inline DecoderState qgen_init_state(Graph& g, const QgenModel& m, const AnnotationMatrix& doc,
                                    Var answer_enc) {
  Var joint = concat_cols({pick_row(doc.h, doc.length - 1), answer_enc});
  Var s2h = add(matmul(joint, g.param(*m.init_w)), g.param(*m.init_b));
  LstmState s1 = lstm_zero_state(g, m.cfg.dec_hidden);
  LstmState s2{s2h, g.constant(Tensor(1, m.cfg.dec_hidden))};
  return DecoderState{s1, s2, m.rep.word_representation(g, "<sos>")};
}

// One full decoding step at time t: alpha from s1^(t-1), then v, then the
// c1/c2 cascade, then the generative distribution, switch, and mixture.
inline StepOutput qgen_step(Graph& g, const QgenModel& m, DecoderState& state,
                            const AnnotationMatrix& doc, Var answer_enc,
                            const QgenDropout& drop) {
  StepOutput out;
  out.alpha = attention_alpha(g, m, doc, answer_enc, state.s1.h);
  out.v = context_vector(g, out.alpha, doc);
  state = decoder_step(g, m, state, out.v, drop);
  out.o = generative_distribution(g, m, state.y_prev, state.s2.h, out.v, answer_enc);
  out.s = switch_scalar(g, m, state.s2.h, out.v, out.alpha, out.o);
  out.mixed = pointer_softmax_mix(g, out.alpha, out.o, out.s);
  return out;
}

struct QgenLoss {
  Var loss;
  std::size_t oov_fallback_steps = 0;  // gold tokens absent from doc and vocab
};

// Teacher-forced mean NLL over the gold question (EOS appended), by marginal
// likelihood over the copy and generate channels.
inline QgenLoss qgen_loss(Graph& g, const QgenModel& m, const std::vector<std::string>& doc_tokens,
                          const AnswerSpan& span, const std::vector<std::string>& question,
                          DropoutMode mode = DropoutMode::Eval, RngStream* rng = nullptr) {
  if (question.empty()) throw ConfigError("qgen_loss requires a nonempty question");
  QgenDropout drop = QgenDropout::make(g, m, mode, rng);
  AnnotationMatrix doc = qgen_encode(g, m, doc_tokens, drop);
  Var answer_enc = answer_condition_encode(g, m.ans_enc, doc, span);
  DecoderState state = qgen_init_state(g, m, doc, answer_enc);

  std::vector<std::string> targets = question;
  targets.push_back("<eos>");

  QgenLoss out;
  Var total = g.constant(Tensor::scalar(0.0));
  for (const std::string& gold : targets) {
    StepOutput step = qgen_step(g, m, state, doc, answer_enc, drop);
    TokenLikelihood like = token_likelihood(g, m, step.mixed, doc_tokens, gold);
    if (like.oov_fallback) out.oov_fallback_steps += 1;
    total = add(total, affine(log(affine(like.prob, 1.0, kLogEps)), -1.0, 0.0));
    state.y_prev = drop.embedding(m.rep.word_representation(g, gold));
  }
  out.loss = affine(total, 1.0 / static_cast<double>(targets.size()), 0.0);
  return out;
}

struct TokenProvenance {
  enum class Kind { Copied, Generated } kind;
  std::size_t index;  // document position or decoder vocab id
};

struct GeneratedQuestion {
  std::vector<std::string> tokens;
  std::vector<TokenProvenance> provenance;
  enum class StopReason { Eos, MaxLength } stop_reason = StopReason::MaxLength;
};

// Greedy decoding: argmax of the mixed distribution at each step; document
// positions emit the document token (provenance Copied), vocab ids emit the
// vocab token (provenance Generated). Stops at EOS or max_length.
inline GeneratedQuestion greedy_decode(const QgenModel& m,
                                       const std::vector<std::string>& doc_tokens,
                                       const AnswerSpan& span, std::size_t max_length = 0) {
  if (max_length == 0) max_length = m.cfg.max_length;
  const std::size_t n = doc_tokens.size();

  Graph g;
  QgenDropout drop;  // eval: inactive
  AnnotationMatrix doc = qgen_encode(g, m, doc_tokens, drop);
  Var answer_enc = answer_condition_encode(g, m.ans_enc, doc, span);
  DecoderState state = qgen_init_state(g, m, doc, answer_enc);

  GeneratedQuestion out;
  for (std::size_t t = 0; t < max_length; ++t) {
    StepOutput step = qgen_step(g, m, state, doc, answer_enc, drop);
    const Tensor& mixed = step.mixed.value();
    std::size_t best = 0;
    for (std::size_t i = 1; i < mixed.size(); ++i)
      if (mixed.data[i] > mixed.data[best]) best = i;

    std::string token;
    if (best < n) {
      token = doc_tokens[best];
      out.provenance.push_back({TokenProvenance::Kind::Copied, best});
    } else {
      const std::size_t vid = best - n;
      if (vid == Vocabulary::kEos) {
        out.stop_reason = GeneratedQuestion::StopReason::Eos;
        return out;
      }
      token = m.decoder_vocab.token(vid);
      out.provenance.push_back({TokenProvenance::Kind::Generated, vid});
    }
    out.tokens.push_back(token);
    state.y_prev = m.rep.word_representation(g, token);
  }
  out.stop_reason = GeneratedQuestion::StopReason::MaxLength;
  return out;
}

}  // namespace qg
