#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "qg/metrics.hpp"
#include "qg/rng.hpp"

using namespace qg;
using Catch::Approx;

namespace {

// ---------------------------------------------------------------------------
// Brute-force multi-span F1 oracle. Recomputes the definition with naive
// loops and a sort-based token intersection, independent of qg::multi_span_f1.
// ---------------------------------------------------------------------------

double naive_pair_f1(Phrase a, Phrase b) {
  if (a.empty() || b.empty()) return 0.0;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  Phrase common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double p = double(common.size()) / double(a.size());
  const double r = double(common.size()) / double(b.size());
  return 2.0 * p * r / (p + r);
}

double naive_multi_span_f1(const PhraseSet& pred, const PhraseSet& gold) {
  if (pred.empty() || gold.empty()) return 0.0;
  double psum = 0.0;
  for (const auto& pi : pred) {
    double best = 0.0;
    for (const auto& gj : gold) best = std::max(best, naive_pair_f1(pi, gj));
    psum += best;
  }
  double rsum = 0.0;
  for (const auto& gj : gold) {
    double best = 0.0;
    for (const auto& pi : pred) best = std::max(best, naive_pair_f1(pi, gj));
    rsum += best;
  }
  const double pbar = psum / double(pred.size());
  const double rbar = rsum / double(gold.size());
  return (pbar + rbar) > 0.0 ? 2.0 * pbar * rbar / (pbar + rbar) : 0.0;
}

// ---------------------------------------------------------------------------
// Scripted reference BLEU: joined-string n-grams in hash maps, written
// independently of qg::bleu4.
// ---------------------------------------------------------------------------

double reference_bleu4(const std::vector<Phrase>& cands, const std::vector<Phrase>& refs) {
  auto grams = [](const Phrase& s, std::size_t n) {
    std::unordered_map<std::string, std::size_t> out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      std::string key;
      for (std::size_t k = 0; k < n; ++k) key += s[i + k] + "\x01";
      ++out[key];
    }
    return out;
  };
  double c_len = 0, r_len = 0;
  double match[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
  for (std::size_t s = 0; s < cands.size(); ++s) {
    c_len += double(cands[s].size());
    r_len += double(refs[s].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      auto cg = grams(cands[s], n);
      auto rg = grams(refs[s], n);
      for (auto& [k, v] : cg) {
        total[n - 1] += double(v);
        auto it = rg.find(k);
        if (it != rg.end()) match[n - 1] += double(std::min(v, it->second));
      }
    }
  }
  double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  double logsum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (total[n] == 0 || match[n] == 0) return 0.0;
    logsum += std::log(match[n] / total[n]);
  }
  return bp * std::exp(logsum / 4.0);
}

Phrase split(const std::string& s) {
  Phrase out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

PhraseSet random_phrase_set(RngStream& rng, std::size_t max_phrases) {
  static const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "f"};
  PhraseSet out;
  const std::size_t n = rng.below(max_phrases + 1);
  for (std::size_t i = 0; i < n; ++i) {
    Phrase p;
    const std::size_t len = 1 + rng.below(4);
    for (std::size_t j = 0; j < len; ++j) p.push_back(alphabet[rng.below(alphabet.size())]);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("token f1 hand cases", "[metrics]") {
  TokenF1 same = token_f1(split("the cat sat"), split("the cat sat"));
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  TokenF1 partial = token_f1(split("the cat sat"), split("the cat"));
  CHECK(partial.precision == Approx(2.0 / 3.0));
  CHECK(partial.recall == Approx(1.0));
  CHECK(partial.f1 == Approx(0.8));

  TokenF1 disjoint = token_f1(split("a b"), split("c d"));
  CHECK(disjoint.f1 == 0.0);

  CHECK(token_f1({}, split("x")).f1 == 0.0);
}

TEST_CASE("token f1 uses multiset intersection", "[metrics]") {
  TokenF1 r = token_f1(split("a a b"), split("a b b"));
  // Overlap: one "a" plus one "b".
  CHECK(r.precision == Approx(2.0 / 3.0));
  CHECK(r.recall == Approx(2.0 / 3.0));
}

TEST_CASE("multi span f1 hand cases", "[metrics]") {
  CHECK(multi_span_f1({split("the cat")}, {split("the cat")}).f1_ms == 1.0);

  F1Matrix m = multi_span_f1({split("a b"), split("c d")}, {split("a b")});
  CHECK(m.mean_precision == Approx(0.5));
  CHECK(m.mean_recall == Approx(1.0));
  CHECK(m.f1_ms == Approx(2.0 / 3.0));

  CHECK(multi_span_f1({}, {split("x")}).f1_ms == 0.0);
  CHECK(multi_span_f1({split("x")}, {}).f1_ms == 0.0);
  CHECK(multi_span_f1({}, {}).f1_ms == 0.0);
}

TEST_CASE("multi span f1 singleton reduction equals token f1", "[metrics][property]") {
  RngStream rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    PhraseSet a = random_phrase_set(rng, 1);
    PhraseSet b = random_phrase_set(rng, 1);
    if (a.empty() || b.empty()) continue;
    CHECK(multi_span_f1(a, b).f1_ms == Approx(token_f1(a[0], b[0]).f1).margin(1e-12));
  }
}

TEST_CASE("multi span f1 properties", "[metrics][property]") {
  RngStream rng(37);
  for (int trial = 0; trial < 200; ++trial) {
    PhraseSet pred = random_phrase_set(rng, 4);
    PhraseSet gold = random_phrase_set(rng, 4);
    F1Matrix m = multi_span_f1(pred, gold);
    CHECK(m.f1_ms >= 0.0);
    CHECK(m.f1_ms <= 1.0);

    // Swapping pred and gold swaps the precision/recall roles.
    F1Matrix swapped = multi_span_f1(gold, pred);
    CHECK(m.mean_precision == Approx(swapped.mean_recall).margin(1e-12));
    CHECK(m.mean_recall == Approx(swapped.mean_precision).margin(1e-12));
    CHECK(m.f1_ms == Approx(swapped.f1_ms).margin(1e-12));

    // Permutation invariance in both arguments.
    PhraseSet pred_shuf = pred, gold_shuf = gold;
    rng.shuffle(pred_shuf);
    rng.shuffle(gold_shuf);
    CHECK(multi_span_f1(pred_shuf, gold_shuf).f1_ms == Approx(m.f1_ms).margin(1e-12));

    // f1 == 1 iff every prediction and every gold has a perfect counterpart.
    if (!pred.empty() && !gold.empty()) {
      bool all_perfect = true;
      for (double p : m.precision_per_pred) all_perfect &= (p == 1.0);
      for (double r : m.recall_per_gold) all_perfect &= (r == 1.0);
      CHECK((m.f1_ms == Approx(1.0).margin(1e-12)) == all_perfect);
    }
  }
}

TEST_CASE("multi span f1 equals brute force oracle on 500 random cases", "[metrics][oracle]") {
  RngStream rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    PhraseSet pred = random_phrase_set(rng, 4);
    PhraseSet gold = random_phrase_set(rng, 4);
    double expected = naive_multi_span_f1(pred, gold);
    double actual = multi_span_f1(pred, gold).f1_ms;
    REQUIRE(actual == Approx(expected).margin(1e-12));
  }
}

TEST_CASE("exact match pipeline", "[metrics]") {
  PhraseSet gold = {split("a b"), split("c")};
  CHECK(exact_match_rate(gold, gold) == 1.0);

  F1Matrix m = exact_match_matrix({split("a b"), split("z z")}, {split("a b")});
  CHECK(m.mean_precision == Approx(0.5));

  // Token overlap without equality scores zero.
  CHECK(exact_match_rate({split("a b c")}, {split("a b")}) == 0.0);
}

TEST_CASE("bleu4 boundary cases", "[metrics]") {
  std::vector<Phrase> refs = {split("the cat sat on the mat"), split("a stitch in time saves nine")};
  BleuReport perfect = bleu4(refs, refs);
  CHECK(perfect.score == Approx(1.0));
  CHECK(perfect.brevity_penalty == 1.0);

  std::vector<Phrase> disjoint = {split("w x y z"), split("p q r s t u")};
  CHECK(bleu4(disjoint, refs).score == 0.0);

  CHECK_THROWS_AS(bleu4({}, {}), ConfigError);
  CHECK_THROWS_AS(bleu4({split("a")}, {}), ShapeError);
}

TEST_CASE("bleu4 matches scripted reference on hand fixture", "[metrics][oracle]") {
  std::vector<Phrase> cands = {split("the cat sat on the mat today"),
                               split("there is a cat on the mat")};
  std::vector<Phrase> refs = {split("the cat sat on the mat"),
                              split("the cat is on the mat")};
  BleuReport r = bleu4(cands, refs);
  CHECK(r.score == Approx(reference_bleu4(cands, refs)).margin(1e-9));
  CHECK(r.score > 0.0);
  CHECK(r.score < 1.0);

  // Short candidates attract a brevity penalty.
  std::vector<Phrase> shorty = {split("the cat sat"), split("the cat is")};
  BleuReport s = bleu4(shorty, refs);
  CHECK(s.brevity_penalty == Approx(std::exp(1.0 - 12.0 / 6.0)));
  CHECK(s.score == Approx(reference_bleu4(shorty, refs)).margin(1e-9));
}
