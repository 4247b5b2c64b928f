#pragma once

// Shared-task scoring: unweighted precision, weighted recall, weighted F1
// per prompt, and their macro average over a corpus.
//
// Precision uses the standard denominator |TP| + |FP|. Every ratio with a
// zero denominator is defined as 0, so an empty prediction set scores 0.

#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "staple/corpus.hpp"
#include "staple/error.hpp"

namespace staple::metrics {

using corpus::GoldSet;
using corpus::NormalizationPolicy;
using corpus::PredictionSet;

struct MatchResult {
  std::vector<std::pair<std::string, std::string>> tp;  // (prediction, gold text)
  std::vector<std::string> fp;
  std::vector<std::string> fn;
  double wtp = 0.0;
  double wfn = 0.0;
};

struct PromptScore {
  std::string prompt_id;
  double precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  MatchResult match;
};

struct CorpusScore {
  double macro_f1 = 0.0;
  double mean_precision = 0.0;
  double mean_weighted_recall = 0.0;
  std::vector<PromptScore> per_prompt;
  std::size_t num_prompts = 0;
  std::vector<std::string> warnings;
};

inline double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

inline double harmonic_f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/// Exact set intersection after normalization. Weights are summed in gold order.
inline MatchResult match_sets(const GoldSet& gold, const PredictionSet& pred,
                              const NormalizationPolicy& policy) {
  std::unordered_map<std::string, std::size_t> gold_index;
  for (std::size_t i = 0; i < gold.translations.size(); ++i) {
    gold_index.emplace(corpus::normalize(gold.translations[i].text, policy), i);
  }
  std::vector<bool> hit(gold.translations.size(), false);
  MatchResult r;
  for (const auto& cand : pred.candidates) {
    auto it = gold_index.find(corpus::normalize(cand, policy));
    if (it != gold_index.end() && !hit[it->second]) {
      hit[it->second] = true;
      r.tp.emplace_back(cand, gold.translations[it->second].text);
    } else {
      r.fp.push_back(cand);
    }
  }
  for (std::size_t i = 0; i < gold.translations.size(); ++i) {
    if (hit[i]) {
      r.wtp += gold.translations[i].weight;
    } else {
      r.fn.push_back(gold.translations[i].text);
      r.wfn += gold.translations[i].weight;
    }
  }
  return r;
}

inline PromptScore score_prompt(const GoldSet& gold, const PredictionSet& pred,
                                const NormalizationPolicy& policy) {
  PromptScore s;
  s.prompt_id = gold.prompt.id;
  s.match = match_sets(gold, pred, policy);
  const auto tp = static_cast<double>(s.match.tp.size());
  s.precision = safe_ratio(tp, tp + static_cast<double>(s.match.fp.size()));
  s.weighted_recall = safe_ratio(s.match.wtp, s.match.wtp + s.match.wfn);
  s.weighted_f1 = harmonic_f1(s.precision, s.weighted_recall);
  return s;
}

/// Averages over gold prompts. Missing prediction sets count as empty;
/// prediction sets with unknown ids are reported in `warnings` and ignored.
inline CorpusScore score_corpus(const std::vector<GoldSet>& golds, const std::vector<PredictionSet>& preds,
                                const NormalizationPolicy& policy) {
  std::unordered_set<std::string> gold_ids;
  for (const auto& g : golds) {
    if (!gold_ids.insert(g.prompt.id).second) {
      throw ValidationError("duplicate gold prompt id '" + g.prompt.id + "'");
    }
  }
  CorpusScore out;
  std::unordered_map<std::string, const PredictionSet*> by_id;
  for (const auto& p : preds) {
    if (!gold_ids.count(p.prompt_id)) {
      out.warnings.push_back("prediction set '" + p.prompt_id + "' has no gold prompt");
      continue;
    }
    by_id.emplace(p.prompt_id, &p);
  }

  const PredictionSet empty;
  double sum_f1 = 0.0;
  double sum_p = 0.0;
  double sum_r = 0.0;
  for (const auto& g : golds) {
    auto it = by_id.find(g.prompt.id);
    auto s = score_prompt(g, it == by_id.end() ? empty : *it->second, policy);
    sum_f1 += s.weighted_f1;
    sum_p += s.precision;
    sum_r += s.weighted_recall;
    out.per_prompt.push_back(std::move(s));
  }
  out.num_prompts = golds.size();
  const auto n = static_cast<double>(out.num_prompts);
  out.macro_f1 = safe_ratio(sum_f1, n);
  out.mean_precision = safe_ratio(sum_p, n);
  out.mean_weighted_recall = safe_ratio(sum_r, n);
  return out;
}

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

inline std::string summary_line(const CorpusScore& score) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "macro_f1=%.6f", score.macro_f1);
  return buf;
}

/// TSV report in percent with two decimals, one row per prompt plus MACRO.
inline void write_report(const CorpusScore& score, std::ostream& out) {
  out << "# precision=tp/(tp+fp); weighted_recall=wtp/(wtp+wfn); values in percent\n";
  out << "prompt_id\tprecision\tweighted_recall\tweighted_f1\n";
  for (const auto& s : score.per_prompt) {
    out << s.prompt_id << '\t' << percent(s.precision) << '\t' << percent(s.weighted_recall) << '\t'
        << percent(s.weighted_f1) << '\n';
  }
  out << "MACRO\t" << percent(score.mean_precision) << '\t' << percent(score.mean_weighted_recall) << '\t'
      << percent(score.macro_f1) << '\n';
}

}  // namespace staple::metrics
