#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "qg/adam.hpp"
#include "qg/gradcheck.hpp"
#include "qg/qgen.hpp"
#include "testutil.hpp"

using namespace qg;
using Catch::Approx;
using qgtest::loss_fn;
using qgtest::randomize_params;
using qgtest::ScalarLstmOracle;

namespace {

QgenConfig toy_config() {
  QgenConfig cfg;
  cfg.wordrep = WordRepConfig{.word_dim = 4, .char_dim = 3, .char_hidden = 2};
  cfg.enc_hidden = 3;
  cfg.agg_hidden = 2;
  cfg.dec_hidden = 4;
  cfg.att_hidden = 3;
  cfg.gen_hidden = 4;
  cfg.dropout = 0.0;
  return cfg;
}

QgenModel make_toy_model(const std::vector<std::string>& doc_tokens,
                         const std::vector<std::string>& question_tokens, std::uint64_t seed,
                         QgenConfig cfg = toy_config()) {
  Vocabulary input = build_vocab({doc_tokens, question_tokens}, 50);
  Vocabulary dec = build_vocab({question_tokens}, 20);
  CharVocabulary chars = CharVocabulary::build({doc_tokens, question_tokens});
  return QgenModel(std::move(input), std::move(dec), std::move(chars), cfg, seed);
}

const std::vector<std::string> kDoc = {"the", "fox", "jumped", "over", "dogs"};
const std::vector<std::string> kQuestion = {"who", "jumped", "?"};

}  // namespace

TEST_CASE("attention alpha uniform at zero weights and normalized", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 1);
  for (Param* p : m.params.all()) p->value.fill(0.0);

  Graph g;
  QgenDropout drop;
  AnnotationMatrix doc = qgen_encode(g, m, kDoc, drop);
  Var ans = answer_condition_encode(g, m.ans_enc, doc, AnswerSpan{1, 1});
  Var s1 = g.constant(Tensor(1, m.cfg.dec_hidden));
  Var alpha = attention_alpha(g, m, doc, ans, s1);
  REQUIRE(alpha.cols() == kDoc.size());
  for (double v : alpha.value().data) CHECK(v == Approx(0.2).margin(1e-12));
}

TEST_CASE("attention alpha is a distribution for random inputs", "[qgen][property]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 2);
  randomize_params(m.params, 21);
  RngStream rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    QgenDropout drop;
    AnnotationMatrix doc = qgen_encode(g, m, kDoc, drop);
    Var ans = answer_condition_encode(g, m.ans_enc, doc, AnswerSpan{0, 2});
    Var s1 = g.constant(Tensor::uniform(1, m.cfg.dec_hidden, rng, -2, 2));
    Var alpha = attention_alpha(g, m, doc, ans, s1);
    double sum = 0.0;
    for (double v : alpha.value().data) {
      REQUIRE(v >= 0.0);
      sum += v;
    }
    REQUIRE(std::fabs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("attention alpha matches scripted oracle on a 3-position instance", "[qgen][oracle]") {
  QgenConfig cfg = toy_config();
  cfg.enc_hidden = 1;  // annotation_dim 2
  cfg.agg_hidden = 1;
  cfg.dec_hidden = 1;
  cfg.att_hidden = 2;
  QgenModel m = make_toy_model(kDoc, kQuestion, 4, cfg);
  randomize_params(m.params, 41);

  // Hand inputs.
  Tensor H{{0.3, -0.2}, {0.8, 0.1}, {-0.5, 0.4}};
  RngStream rng(5);
  Tensor ha_t = Tensor::uniform(1, m.cfg.answer_dim(), rng, -1, 1);
  Tensor s1_t = Tensor::uniform(1, 1, rng, -1, 1);

  Graph g;
  AnnotationMatrix doc{g.constant(H), 3, 3, {}, {}};
  Var alpha = attention_alpha(g, m, doc, g.constant(ha_t), g.constant(s1_t));

  // Scripted two-layer MLP per position: tanh(h_i Wh + ha Wa + s1 Ws + b) . v
  auto dotcol = [](const Tensor& row, const Tensor& mat, std::size_t col) {
    double acc = 0.0;
    for (std::size_t k = 0; k < row.cols; ++k) acc += row.data[k] * mat.at(k, col);
    return acc;
  };
  std::vector<double> scores(3);
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor hrow(1, 2, {H.at(i, 0), H.at(i, 1)});
    double score = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      double pre = dotcol(hrow, m.att_wh->value, c) + dotcol(ha_t, m.att_wa->value, c) +
                   dotcol(s1_t, m.att_ws->value, c) + m.att_b->value.data[c];
      score += std::tanh(pre) * m.att_v->value.at(c, 0);
    }
    scores[i] = score;
  }
  const double mx = std::max({scores[0], scores[1], scores[2]});
  double z = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    z += s;
  }
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(alpha.value().data[i] == Approx(scores[i] / z).margin(1e-12));
}

TEST_CASE("context vector selection and averaging", "[qgen]") {
  Graph g;
  Tensor H{{1, 2}, {3, 4}, {5, 6}};
  AnnotationMatrix doc{g.constant(H), 3, 3, {}, {}};

  Var onehot = g.constant({{0, 1, 0}});
  Var v1 = context_vector(g, onehot, doc);
  CHECK(v1.value().data == std::vector<double>{3, 4});

  Var uniform = g.constant({{1.0 / 3, 1.0 / 3, 1.0 / 3}});
  Var v2 = context_vector(g, uniform, doc);
  CHECK(v2.value().data[0] == Approx(3.0));
  CHECK(v2.value().data[1] == Approx(4.0));

  CHECK_THROWS_AS(context_vector(g, g.constant({{1, 0}}), doc), ShapeError);

  Param alpha("alpha", Tensor{{0.2, 0.5, 0.3}});
  Param ann("ann", H);
  auto report = finite_difference_check(
      {&alpha, &ann},
      loss_fn([&](Graph& gg) {
        AnnotationMatrix d{gg.param(ann), 3, 3, {}, {}};
        return qgtest::weighted_sum(gg, context_vector(gg, gg.param(alpha), d));
      }),
      1e-6);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("decoder step at zero and determinism", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 6);
  for (Param* p : m.params.all()) p->value.fill(0.0);

  Graph g;
  QgenDropout drop;
  DecoderState st{lstm_zero_state(g, 4), lstm_zero_state(g, 4),
                  g.constant(Tensor(1, m.cfg.wordrep.rep_dim()))};
  DecoderState next = decoder_step(g, m, st, g.constant(Tensor(1, m.cfg.annotation_dim())), drop);
  for (double v : next.s1.h.value().data) CHECK(v == 0.0);
  for (double v : next.s2.h.value().data) CHECK(v == 0.0);

  // Purity: identical inputs give identical states.
  DecoderState again = decoder_step(g, m, st, g.constant(Tensor(1, m.cfg.annotation_dim())), drop);
  CHECK(again.s2.h.value().data == next.s2.h.value().data);
}

TEST_CASE("1-dim cascading cells match scripted oracle", "[qgen][oracle]") {
  QgenConfig cfg = toy_config();
  cfg.wordrep = WordRepConfig{.word_dim = 1, .char_dim = 1, .char_hidden = 1};
  cfg.enc_hidden = 1;
  cfg.agg_hidden = 1;
  cfg.dec_hidden = 1;
  // rep_dim = 1 + 2 = 3 != 1, so drive the cells directly instead of embeds.
  QgenModel m = make_toy_model(kDoc, kQuestion, 7, cfg);

  // c1 consumes a 3-wide y_prev; to keep the oracle scalar, zero two columns.
  auto set_cell = [](LstmCellParams& cell, const ScalarLstmOracle& o) {
    cell.w_i->value.fill(0.0);
    cell.w_f->value.fill(0.0);
    cell.w_o->value.fill(0.0);
    cell.w_c->value.fill(0.0);
    cell.w_i->value.data[0] = o.wi;
    cell.w_f->value.data[0] = o.wf;
    cell.w_o->value.data[0] = o.wo;
    cell.w_c->value.data[0] = o.wc;
    cell.u_i->value.data[0] = o.ui;
    cell.u_f->value.data[0] = o.uf;
    cell.u_o->value.data[0] = o.uo;
    cell.u_c->value.data[0] = o.uc;
    cell.b_i->value.data[0] = o.bi;
    cell.b_f->value.data[0] = o.bf;
    cell.b_o->value.data[0] = o.bo;
    cell.b_c->value.data[0] = o.bc;
  };
  ScalarLstmOracle o1{0.4, -0.3, 0.6, 0.2, 0.1, -0.5, 0.3, 0.7, 0.0, 1.0, 0.1, -0.2};
  ScalarLstmOracle o2{-0.6, 0.2, 0.5, -0.4, 0.3, 0.1, -0.2, 0.6, 0.2, 1.0, -0.1, 0.4};
  set_cell(m.c1, o1);
  set_cell(m.c2, o2);

  double s1h = 0, s1c = 0, s2h = 0, s2c = 0;
  Graph g;
  QgenDropout drop;
  DecoderState st{lstm_zero_state(g, 1), lstm_zero_state(g, 1),
                  g.constant(Tensor(1, 3))};  // y_prev = 0 vector
  const std::vector<double> vs = {0.9, -0.7};
  for (double vt : vs) {
    // Oracle: s1 = c1(y=0, h=s2_prev, c=s1_prev); s2 = c2(v, h=s1, c=s2_prev).
    std::tie(s1h, s1c) = o1.step(0.0, s2h, s1c);
    double nh, nc;
    std::tie(nh, nc) = o2.step(vt, s1h, s2c);
    s2h = nh;
    s2c = nc;

    st = decoder_step(g, m, st, g.constant(Tensor::scalar(vt)), drop);
    st.y_prev = g.constant(Tensor(1, 3));
    CHECK(st.s1.h.item() == Approx(s1h).margin(1e-12));
    CHECK(st.s2.h.item() == Approx(s2h).margin(1e-12));
  }
}

TEST_CASE("generative distribution uniform, normalized, bias injection", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 8);
  const std::size_t V = m.decoder_vocab.size();

  for (Param* p : m.params.all()) p->value.fill(0.0);
  Graph g;
  RngStream rng(9);
  Var y = g.constant(Tensor::uniform(1, m.cfg.wordrep.rep_dim(), rng, -1, 1));
  Var s2 = g.constant(Tensor::uniform(1, m.cfg.dec_hidden, rng, -1, 1));
  Var v = g.constant(Tensor::uniform(1, m.cfg.annotation_dim(), rng, -1, 1));
  Var ha = g.constant(Tensor::uniform(1, m.cfg.answer_dim(), rng, -1, 1));

  Var o = generative_distribution(g, m, y, s2, v, ha);
  REQUIRE(o.cols() == V);
  for (double p : o.value().data) CHECK(p == Approx(1.0 / double(V)).margin(1e-12));

  // A large bias on one vocab id moves the argmax there.
  const std::size_t target = V - 1;
  m.gen_b2->value.data[target] = 7.0;
  Var o2 = generative_distribution(g, m, y, s2, v, ha);
  std::size_t best = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < V; ++i) {
    if (o2.value().data[i] > o2.value().data[best]) best = i;
    sum += o2.value().data[i];
  }
  CHECK(best == target);
  CHECK(std::fabs(sum - 1.0) <= 1e-9);
}

TEST_CASE("switch scalar zero weights and range", "[qgen][property]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 10);
  const std::size_t n = 4;

  {
    for (Param* p : m.params.all()) p->value.fill(0.0);
    Graph g;
    Var s2 = g.constant(Tensor(1, m.cfg.dec_hidden));
    Var v = g.constant(Tensor(1, m.cfg.annotation_dim()));
    Var alpha = g.constant(Tensor::full(1, n, 1.0 / n));
    Var o = g.constant(Tensor::full(1, 8, 0.125));
    CHECK(switch_scalar(g, m, s2, v, alpha, o).item() == 0.5);
  }

  randomize_params(m.params, 101);
  RngStream rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    Graph g;
    Var s2 = g.constant(Tensor::uniform(1, m.cfg.dec_hidden, rng, -3, 3));
    Var v = g.constant(Tensor::uniform(1, m.cfg.annotation_dim(), rng, -3, 3));
    Tensor araw = Tensor::uniform(1, n, rng, -4, 4);
    Graph tmp;
    Tensor a = softmax_rows(tmp.constant(araw)).value();
    Tensor oraw = Tensor::uniform(1, 8, rng, -4, 4);
    Tensor ov = softmax_rows(tmp.constant(oraw)).value();
    const double s = switch_scalar(g, m, s2, v, g.constant(a), g.constant(ov)).item();
    REQUIRE(s > 0.0);
    REQUIRE(s < 1.0);
  }
}

TEST_CASE("pointer softmax mix boundaries and mass", "[qgen]") {
  Graph g;
  Var alpha = g.constant({{0.25, 0.75}});
  Var o = g.constant({{0.5, 0.25, 0.25}});

  Var all_copy = pointer_softmax_mix(g, alpha, o, g.constant(Tensor::scalar(1.0)));
  CHECK(all_copy.value().data == std::vector<double>{0.25, 0.75, 0, 0, 0});

  Var all_gen = pointer_softmax_mix(g, alpha, o, g.constant(Tensor::scalar(0.0)));
  CHECK(all_gen.value().data == std::vector<double>{0, 0, 0.5, 0.25, 0.25});

  RngStream rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    Graph gg;
    Tensor araw = Tensor::uniform(1, 3, rng, -3, 3);
    Tensor oraw = Tensor::uniform(1, 5, rng, -3, 3);
    Var a = softmax_rows(gg.constant(araw));
    Var ov = softmax_rows(gg.constant(oraw));
    Var s = sigmoid(gg.constant(Tensor::scalar(rng.uniform(-4, 4))));
    Var mixed = pointer_softmax_mix(gg, a, ov, s);
    double total = 0.0;
    for (double p : mixed.value().data) total += p;
    REQUIRE(std::fabs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("token likelihood channel summation", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 13);
  const std::size_t n = 4;
  const std::size_t V = m.decoder_vocab.size();
  const std::vector<std::string> doc = {"jumped", "a", "jumped", "b"};

  // Hand-built mixed vector: positions then vocab.
  Tensor mixed(1, n + V);
  mixed.data[0] = 0.1;  // "jumped"
  mixed.data[2] = 0.2;  // "jumped"
  const std::size_t jid = m.decoder_vocab.id("jumped");
  mixed.data[n + jid] = 0.3;

  Graph g;
  TokenLikelihood like = token_likelihood(g, m, g.constant(mixed), doc, "jumped");
  CHECK_FALSE(like.oov_fallback);
  CHECK(like.prob.item() == Approx(0.6).margin(1e-12));

  // Gold only in vocab.
  TokenLikelihood vocab_only = token_likelihood(g, m, g.constant(mixed), {"a", "b"}, "jumped");
  CHECK(vocab_only.prob.item() == Approx(mixed.data[2 + jid]).margin(1e-12));
  CHECK_FALSE(vocab_only.oov_fallback);

  // Gold nowhere: falls back to the UNK channel and is flagged.
  Tensor mixed2(1, 2 + V);
  mixed2.data[2 + Vocabulary::kUnk] = 0.07;
  TokenLikelihood oov = token_likelihood(g, m, g.constant(mixed2), {"a", "b"}, "zzz");
  CHECK(oov.oov_fallback);
  CHECK(oov.prob.item() == Approx(0.07).margin(1e-12));
}

TEST_CASE("qgen loss closed form at zero parameters", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 14);
  for (Param* p : m.params.all()) p->value.fill(0.0);

  const std::size_t n = kDoc.size();
  const std::size_t V = m.decoder_vocab.size();

  Graph g;
  QgenLoss out = qgen_loss(g, m, kDoc, AnswerSpan{1, 1}, kQuestion);

  // alpha uniform over n, o uniform over V, s = 0.5.
  auto step_prob = [&](const std::string& gold) {
    std::size_t count = 0;
    for (const auto& t : kDoc)
      if (t == gold) ++count;
    double p = 0.5 * double(count) / double(n);
    if (m.decoder_vocab.contains(gold))
      p += 0.5 / double(V);
    else if (count == 0)
      p = 0.5 / double(V);  // UNK fallback
    return p;
  };
  std::vector<std::string> targets = kQuestion;
  targets.push_back("<eos>");
  double expected = 0.0;
  for (const auto& tkn : targets) expected += -std::log(step_prob(tkn) + kLogEps);
  expected /= double(targets.size());

  CHECK(out.loss.item() == Approx(expected).margin(1e-9));
  CHECK(out.oov_fallback_steps == 0);
}

TEST_CASE("qgen loss gradient check", "[qgen]") {
  const std::vector<std::string> doc = {"a", "b", "c", "d", "e"};
  const std::vector<std::string> question = {"b", "x", "?"};
  QgenModel m = make_toy_model(doc, question, 15);
  randomize_params(m.params, 151);

  auto report = finite_difference_check(
      m.params.all(),
      loss_fn([&](Graph& g) { return qgen_loss(g, m, doc, AnswerSpan{2, 3}, question).loss; }),
      1e-5);
  CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("qgen loss decreases under adam on one example", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 16);
  AdamState adam(AdamConfig{.learning_rate = 1e-3});

  int decreases = 0;
  double prev = 0.0;
  for (int step = 0; step < 51; ++step) {
    m.params.zero_grads();
    Graph g;
    QgenLoss out = qgen_loss(g, m, kDoc, AnswerSpan{1, 1}, kQuestion);
    g.backward(out.loss);
    if (step > 0 && out.loss.item() < prev) ++decreases;
    prev = out.loss.item();
    adam_step(m.params.all(), adam);
  }
  CHECK(decreases >= 45);
}

TEST_CASE("step output invariants over random models", "[qgen][property]") {
  RngStream seeds(17);
  for (int trial = 0; trial < 30; ++trial) {
    QgenModel m = make_toy_model(kDoc, kQuestion, seeds.next_u64());
    randomize_params(m.params, seeds.next_u64());
    Graph g;
    QgenDropout drop;
    AnnotationMatrix doc = qgen_encode(g, m, kDoc, drop);
    Var ans = answer_condition_encode(g, m.ans_enc, doc, AnswerSpan{0, 1});
    DecoderState st = qgen_init_state(g, m, doc, ans);
    for (int t = 0; t < 4; ++t) {
      StepOutput so = qgen_step(g, m, st, doc, ans, drop);
      auto mass = [](const Var& var) {
        double acc = 0.0;
        for (double p : var.value().data) acc += p;
        return acc;
      };
      REQUIRE(std::fabs(mass(so.alpha) - 1.0) <= 1e-9);
      REQUIRE(std::fabs(mass(so.o) - 1.0) <= 1e-9);
      REQUIRE(std::fabs(mass(so.mixed) - 1.0) <= 1e-9);
      REQUIRE(so.s.item() > 0.0);
      REQUIRE(so.s.item() < 1.0);
      st.y_prev = m.rep.word_representation(g, kDoc[t % kDoc.size()]);
    }
  }
}

TEST_CASE("greedy decode rigged to stop at EOS immediately", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 18);
  // Generative argmax onto EOS and switch forced toward the vocab channel.
  m.gen_b2->value.data[Vocabulary::kEos] = 50.0;
  m.sw_out_b->value.data[0] = -50.0;  // s ~ 0

  GeneratedQuestion q = greedy_decode(m, kDoc, AnswerSpan{1, 1});
  CHECK(q.tokens.empty());
  CHECK(q.stop_reason == GeneratedQuestion::StopReason::Eos);
}

TEST_CASE("greedy decode in pure copy regime emits document tokens", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 19);
  randomize_params(m.params, 191);
  m.sw_out_b->value.data[0] = 50.0;  // s ~ 1: all mass on document positions

  GeneratedQuestion q = greedy_decode(m, kDoc, AnswerSpan{1, 1}, 6);
  CHECK(q.stop_reason == GeneratedQuestion::StopReason::MaxLength);
  REQUIRE(q.tokens.size() == 6);
  for (std::size_t t = 0; t < q.tokens.size(); ++t) {
    REQUIRE(q.provenance[t].kind == TokenProvenance::Kind::Copied);
    CHECK(q.tokens[t] == kDoc[q.provenance[t].index]);
  }
}

TEST_CASE("greedy decode is deterministic", "[qgen]") {
  QgenModel m = make_toy_model(kDoc, kQuestion, 20);
  randomize_params(m.params, 201);
  GeneratedQuestion a = greedy_decode(m, kDoc, AnswerSpan{2, 3});
  GeneratedQuestion b = greedy_decode(m, kDoc, AnswerSpan{2, 3});
  CHECK(a.tokens == b.tokens);
  CHECK(a.stop_reason == b.stop_reason);
}

TEST_CASE("decoded OOV tokens always carry copy provenance", "[qgen][property]") {
  RngStream seeds(21);
  for (int trial = 0; trial < 20; ++trial) {
    QgenModel m = make_toy_model(kDoc, kQuestion, seeds.next_u64());
    randomize_params(m.params, seeds.next_u64());
    GeneratedQuestion q = greedy_decode(m, kDoc, AnswerSpan{0, 4}, 8);
    for (std::size_t t = 0; t < q.tokens.size(); ++t) {
      if (!m.decoder_vocab.contains(q.tokens[t]))
        REQUIRE(q.provenance[t].kind == TokenProvenance::Kind::Copied);
      if (q.provenance[t].kind == TokenProvenance::Kind::Copied)
        CHECK(q.provenance[t].index < kDoc.size());
      else
        CHECK(q.provenance[t].index < m.decoder_vocab.size());
    }
  }
}

TEST_CASE("qgen overfits one training pair", "[qgen][overfit]") {
  const std::vector<std::string> doc = {"maja", "visited", "oslo", "in", "winter", "."};
  const std::vector<std::string> question = {"who", "visited", "oslo", "?"};
  QgenConfig cfg = toy_config();
  cfg.wordrep = WordRepConfig{.word_dim = 8, .char_dim = 4, .char_hidden = 3};
  cfg.enc_hidden = 6;
  cfg.agg_hidden = 4;
  cfg.dec_hidden = 8;
  cfg.att_hidden = 6;
  cfg.gen_hidden = 8;
  QgenModel m = make_toy_model(doc, question, 22, cfg);

  AdamState adam(AdamConfig{.learning_rate = 1e-2});
  const AnswerSpan span{0, 0};  // "maja"
  for (int step = 0; step < 300; ++step) {
    m.params.zero_grads();
    Graph g;
    QgenLoss out = qgen_loss(g, m, doc, span, question);
    g.backward(out.loss);
    adam_step(m.params.all(), adam);
  }
  GeneratedQuestion q = greedy_decode(m, doc, span);
  CHECK(q.tokens == question);
  CHECK(q.stop_reason == GeneratedQuestion::StopReason::Eos);
}
