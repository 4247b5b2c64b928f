#pragma once

// Translation-set generation over trained checkpoints:
//
//   nbest_predict             the n best beam-search hypotheses per prompt
//   paraphrase_predict        round trip through a backward model, then
//                             1-best forward translation of each paraphrase
//   multi_checkpoint_predict  union of n-best lists from the m latest checkpoints
//
// Every output list is de-duplicated under the match policy, keeps the first
// surface form seen, and is ordered by generation preference. A prompt that
// fails to decode yields an empty list and a MethodWarning.

#include <exception>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "staple/corpus.hpp"
#include "staple/decoder.hpp"
#include "staple/error.hpp"
#include "staple/parallel.hpp"
#include "staple/textproc.hpp"
#include "staple/translator.hpp"

namespace staple::methods {

using corpus::NormalizationPolicy;
using corpus::PredictionSet;
using corpus::Prompt;
using translator::Checkpoint;
using translator::CheckpointSeries;
using translator::Hypothesis;

struct MethodParams {
  std::size_t n = 10;
  std::size_t n_prime = 3;
  std::size_t m = 6;
  translator::BeamParams beam;
  NormalizationPolicy match_policy = NormalizationPolicy::defaults();
  NormalizationPolicy input_policy = NormalizationPolicy::defaults();
  std::size_t threads = 1;

  void validate() const {
    if (n < 1) throw UsageError("n must be at least 1");
    if (n_prime < 1) throw UsageError("n' must be at least 1");
    if (m < 1) throw UsageError("m must be at least 1");
    if (n > beam.beam_width) {
      throw UsageError("n=" + std::to_string(n) + " exceeds beam width " + std::to_string(beam.beam_width));
    }
    if (n_prime > beam.beam_width) {
      throw UsageError("n'=" + std::to_string(n_prime) + " exceeds beam width " + std::to_string(beam.beam_width));
    }
  }
};

struct MethodWarning {
  std::string prompt_id;
  std::string stage;
  std::string message;

  bool operator==(const MethodWarning&) const = default;
};

/// Sizes observed while paraphrasing one prompt.
struct ParaphraseStats {
  std::size_t forward = 0;      // step-1 hypotheses
  std::size_t pool_raw = 0;     // back-translations before de-duplication
  std::size_t pool_unique = 0;  // after de-duplication and removal of the prompt
  std::size_t paraphrase_outputs = 0;
};

/// Stable de-duplication: the first candidate of each normalized form wins.
inline std::vector<std::string> dedup(const std::vector<std::string>& candidates, const NormalizationPolicy& policy) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& c : candidates) {
    if (seen.insert(corpus::normalize(c, policy)).second) out.push_back(c);
  }
  return out;
}

inline void write_warnings(const std::vector<MethodWarning>& warnings, std::ostream& out) {
  out << "prompt_id\tstage\tmessage\n";
  for (const auto& w : warnings) out << w.prompt_id << '\t' << w.stage << '\t' << w.message << '\n';
}

namespace detail {

inline std::vector<Hypothesis> decode(const Checkpoint& ckpt, const textproc::TokenSeq& source, std::size_t n,
                                      const translator::BeamParams& base) {
  auto params = base;
  params.n_best = n;
  return translator::decode_nbest(ckpt, source, params);
}

/// Detokenized non-empty outputs in rank order.
inline std::vector<std::string> surface(const std::vector<Hypothesis>& hyps) {
  std::vector<std::string> out;
  for (const auto& h : hyps) {
    auto s = textproc::detokenize(h.tokens);
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

/// Runs `job` for every prompt, collecting per-prompt warnings in prompt order.
template <typename Job>
std::vector<PredictionSet> run_per_prompt(const std::vector<Prompt>& prompts, std::size_t threads,
                                          std::vector<MethodWarning>* warnings, Job&& job) {
  std::vector<PredictionSet> out(prompts.size());
  std::vector<std::vector<MethodWarning>> notes(prompts.size());
  parallel_for(prompts.size(), threads, [&](std::size_t i) {
    out[i].prompt_id = prompts[i].id;
    out[i].prompt_text = prompts[i].text;
    try {
      out[i].candidates = job(prompts[i], notes[i]);
    } catch (const std::exception& e) {
      out[i].candidates.clear();
      notes[i].push_back({prompts[i].id, "decode", e.what()});
    }
  });
  if (warnings != nullptr) {
    for (auto& n : notes) warnings->insert(warnings->end(), n.begin(), n.end());
  }
  return out;
}

inline textproc::TokenSeq source_tokens(const Prompt& prompt, const MethodParams& params,
                                        std::vector<MethodWarning>& notes) {
  auto tokens = textproc::preprocess(prompt.text, params.input_policy);
  if (tokens.empty()) notes.push_back({prompt.id, "preprocess", "prompt is empty after preprocessing"});
  return tokens;
}

inline std::vector<std::string> nbest_one(const Checkpoint& ckpt, const Prompt& prompt, const MethodParams& params,
                                          std::vector<MethodWarning>& notes) {
  const auto source = source_tokens(prompt, params, notes);
  if (source.empty()) return {};
  return dedup(surface(decode(ckpt, source, params.n, params.beam)), params.match_policy);
}

}  // namespace detail

inline std::vector<PredictionSet> nbest_predict(const Checkpoint& ckpt, const std::vector<Prompt>& prompts,
                                                const MethodParams& params,
                                                std::vector<MethodWarning>* warnings = nullptr) {
  params.validate();
  return detail::run_per_prompt(prompts, params.threads, warnings, [&](const Prompt& p, auto& notes) {
    return detail::nbest_one(ckpt, p, params, notes);
  });
}

/// Round-trip paraphrasing: (1) forward n-best; (2) n'-best back-translation of
/// each, pooled, de-duplicated, with the prompt itself removed; (3) forward
/// 1-best of each paraphrase. Output is step 1 followed by step 3, de-duplicated,
/// so it always contains the n-best output.
inline std::vector<PredictionSet> paraphrase_predict(const Checkpoint& fwd, const Checkpoint& bwd,
                                                     const std::vector<Prompt>& prompts, const MethodParams& params,
                                                     std::vector<MethodWarning>* warnings = nullptr,
                                                     std::vector<ParaphraseStats>* stats = nullptr) {
  params.validate();
  if (fwd.direction == bwd.direction) {
    throw UsageError("paraphrasing needs forward and backward models of opposite direction");
  }
  std::vector<ParaphraseStats> per_prompt(prompts.size());
  auto out = detail::run_per_prompt(prompts, params.threads, warnings, [&](const Prompt& p, auto& notes) {
    auto& st = per_prompt[static_cast<std::size_t>(&p - prompts.data())];
    const auto source = detail::source_tokens(p, params, notes);
    if (source.empty()) return std::vector<std::string>{};

    const auto forward = detail::decode(fwd, source, params.n, params.beam);
    st.forward = forward.size();
    auto candidates = detail::surface(forward);

    const auto original = corpus::normalize(textproc::detokenize(source), params.match_policy);
    std::unordered_set<std::string> pooled{original};
    std::vector<textproc::TokenSeq> paraphrases;
    for (const auto& h : forward) {
      if (h.tokens.empty()) continue;
      std::vector<Hypothesis> back;
      try {
        back = detail::decode(bwd, h.tokens, params.n_prime, params.beam);
      } catch (const std::exception& e) {
        notes.push_back({p.id, "back-translate", e.what()});
        continue;
      }
      for (auto& b : back) {
        ++st.pool_raw;
        if (b.tokens.empty()) continue;
        if (pooled.insert(corpus::normalize(textproc::detokenize(b.tokens), params.match_policy)).second) {
          paraphrases.push_back(std::move(b.tokens));
        }
      }
    }
    st.pool_unique = paraphrases.size();

    for (const auto& para : paraphrases) {
      try {
        const auto best = detail::surface(detail::decode(fwd, para, 1, params.beam));
        if (!best.empty()) {
          candidates.push_back(best.front());
          ++st.paraphrase_outputs;
        }
      } catch (const std::exception& e) {
        notes.push_back({p.id, "paraphrase-translate", e.what()});
      }
    }
    return dedup(candidates, params.match_policy);
  });
  if (stats != nullptr) *stats = std::move(per_prompt);
  return out;
}

/// Union of n-best lists from the m highest-iteration checkpoints, latest first.
inline std::vector<PredictionSet> multi_checkpoint_predict(const CheckpointSeries& series,
                                                           const std::vector<Prompt>& prompts,
                                                           const MethodParams& params,
                                                           std::vector<MethodWarning>* warnings = nullptr) {
  params.validate();
  if (params.m > series.size()) {
    throw UsageError("m=" + std::to_string(params.m) + " exceeds the series length of " +
                     std::to_string(series.size()) + " checkpoints");
  }
  const auto first = series.checkpoints.size() - params.m;
  return detail::run_per_prompt(prompts, params.threads, warnings, [&](const Prompt& p, auto& notes) {
    const auto source = detail::source_tokens(p, params, notes);
    if (source.empty()) return std::vector<std::string>{};
    std::vector<std::string> pooled;
    for (auto k = series.checkpoints.size(); k-- > first;) {
      const auto part = detail::surface(detail::decode(series.checkpoints[k], source, params.n, params.beam));
      pooled.insert(pooled.end(), part.begin(), part.end());
    }
    return dedup(pooled, params.match_policy);
  });
}

}  // namespace staple::methods
