#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "qg/error.hpp"

namespace qg {

// A set of phrases, each a token list. Used for both predictions and gold.
using Phrase = std::vector<std::string>;
using PhraseSet = std::vector<Phrase>;

struct TokenF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Bag-of-tokens F1 between two phrases (the single-answer SQuAD convention:
// multiset intersection). Empty vs anything scores 0.
inline TokenF1 token_f1(const Phrase& pred, const Phrase& gold) {
  if (pred.empty() || gold.empty()) return {};
  std::map<std::string, std::size_t> gold_counts;
  for (const auto& t : gold) ++gold_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : pred) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  TokenF1 out;
  out.precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  out.recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// Pairwise token-level F1 matrix between prediction and gold phrase sets,
// max-pooled into mean precision / recall and combined harmonically.
struct F1Matrix {
  std::vector<std::vector<double>> f;  // f[i][j]: pred i vs gold j
  std::vector<double> precision_per_pred;   // max over gold
  std::vector<double> recall_per_gold;      // max over predictions
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double f1_ms = 0.0;
};

namespace metric_detail {

template <class PairScore>
inline F1Matrix multi_span_pipeline(const PhraseSet& pred, const PhraseSet& gold,
                                    PairScore score) {
  F1Matrix out;
  out.f.assign(pred.size(), std::vector<double>(gold.size(), 0.0));
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gold.size(); ++j) out.f[i][j] = score(pred[i], gold[j]);

  out.precision_per_pred.assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < gold.size(); ++j)
      out.precision_per_pred[i] = std::max(out.precision_per_pred[i], out.f[i][j]);

  out.recall_per_gold.assign(gold.size(), 0.0);
  for (std::size_t j = 0; j < gold.size(); ++j)
    for (std::size_t i = 0; i < pred.size(); ++i)
      out.recall_per_gold[j] = std::max(out.recall_per_gold[j], out.f[i][j]);

  // Degenerate sets score 0 by convention so entity-less documents stay
  // well-defined in corpus aggregates.
  if (!pred.empty()) {
    for (double p : out.precision_per_pred) out.mean_precision += p;
    out.mean_precision /= static_cast<double>(pred.size());
  }
  if (!gold.empty()) {
    for (double r : out.recall_per_gold) out.mean_recall += r;
    out.mean_recall /= static_cast<double>(gold.size());
  }
  const double denom = out.mean_precision + out.mean_recall;
  out.f1_ms = denom > 0.0 ? 2.0 * out.mean_precision * out.mean_recall / denom : 0.0;
  if (pred.empty() || gold.empty()) out.f1_ms = 0.0;
  return out;
}

}  // namespace metric_detail

inline F1Matrix multi_span_f1(const PhraseSet& pred, const PhraseSet& gold) {
  return metric_detail::multi_span_pipeline(
      pred, gold, [](const Phrase& a, const Phrase& b) { return token_f1(a, b).f1; });
}

// Same pipeline on the 0/1 exact-match matrix.
inline F1Matrix exact_match_matrix(const PhraseSet& pred, const PhraseSet& gold) {
  return metric_detail::multi_span_pipeline(
      pred, gold, [](const Phrase& a, const Phrase& b) { return a == b ? 1.0 : 0.0; });
}

inline double exact_match_rate(const PhraseSet& pred, const PhraseSet& gold) {
  return exact_match_matrix(pred, gold).f1_ms;
}

// ---------------------------------------------------------------------------
// BLEU-4
// ---------------------------------------------------------------------------

struct BleuReport {
  std::array<double, 4> precisions{};  // modified n-gram precisions, n = 1..4
  double brevity_penalty = 1.0;
  double score = 0.0;  // in [0, 1]
};

// Corpus-level BLEU-4: clipped modified n-gram precision, brevity penalty
// exp(1 - r/c) for c <= r, geometric mean over n = 1..4, no smoothing (any
// zero precision zeroes the score). One reference per candidate.
inline BleuReport bleu4(const std::vector<Phrase>& candidates,
                        const std::vector<Phrase>& references) {
  if (candidates.empty()) throw ConfigError("bleu4 on empty corpus");
  if (candidates.size() != references.size())
    throw ShapeError("bleu4 needs one reference per candidate: " +
                     std::to_string(candidates.size()) + " vs " +
                     std::to_string(references.size()));

  auto ngram_counts = [](const Phrase& toks, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (toks.size() >= n)
      for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
  };

  BleuReport out;
  std::size_t cand_len = 0, ref_len = 0;
  std::array<std::size_t, 4> matched{}, total{};
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    cand_len += candidates[s].size();
    ref_len += references[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      auto cc = ngram_counts(candidates[s], n);
      auto rc = ngram_counts(references[s], n);
      for (const auto& [gram, count] : cc) {
        total[n - 1] += count;
        auto it = rc.find(gram);
        if (it != rc.end()) matched[n - 1] += std::min(count, it->second);
      }
    }
  }

  out.brevity_penalty =
      (cand_len <= ref_len && cand_len > 0)
          ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len))
          : 1.0;
  if (cand_len == 0) out.brevity_penalty = 0.0;

  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    out.precisions[n] =
        total[n] > 0 ? static_cast<double>(matched[n]) / static_cast<double>(total[n]) : 0.0;
    if (out.precisions[n] == 0.0)
      any_zero = true;
    else
      log_sum += std::log(out.precisions[n]);
  }
  out.score = any_zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / 4.0);
  return out;
}

}  // namespace qg
