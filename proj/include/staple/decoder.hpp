#pragma once

// Monotone word-for-word decoding. Position j emits one of the top-k lexicon
// targets for source word j (or copies an unknown source word through at a
// fixed log-probability). A hypothesis scores
//
//   sum_j [ log t(y_j | x_j) + log P_lm(y_j | y_{j-1}) ] + log P_lm(</s> | y_last)
//
// and is ranked by that score divided by its length. Ties are broken by
// comparing token sequences lexicographically, which makes every ranking a
// total order.

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "staple/error.hpp"
#include "staple/translator.hpp"

namespace staple::translator {

struct BeamParams {
  std::size_t beam_width = 100;
  std::size_t n_best = 10;
  double max_len_ratio = 2.0;  // monotone output length equals source length; checked, never binding for ratio >= 1
  std::size_t top_k_lexicon = 8;

  void validate() const {
    if (n_best < 1) throw UsageError("n_best must be at least 1");
    if (n_best > beam_width) {
      throw UsageError("n_best (" + std::to_string(n_best) + ") exceeds beam width (" +
                       std::to_string(beam_width) + ")");
    }
    if (!(max_len_ratio > 0.0)) throw UsageError("max_len_ratio must be positive");
    if (top_k_lexicon < 1) throw UsageError("top_k_lexicon must be at least 1");
  }
};

struct Hypothesis {
  TokenSeq tokens;
  double total_logprob = 0.0;
  double avg_logprob = 0.0;

  bool operator==(const Hypothesis&) const = default;
};

using Emission = std::pair<std::string, double>;  // target word, log t

/// Per-position candidate lists for `source`.
inline std::vector<std::vector<Emission>> emission_options(const Checkpoint& ckpt, const TokenSeq& source,
                                                           std::size_t top_k) {
  std::vector<std::vector<Emission>> options;
  options.reserve(source.size());
  for (const auto& word : source) {
    std::vector<Emission> opts;
    for (auto& [target, p] : ckpt.lexicon.top_candidates(word, top_k)) opts.emplace_back(target, safe_log(p));
    if (opts.empty()) opts.emplace_back(word, kCopyLogProb);
    options.push_back(std::move(opts));
  }
  return options;
}

namespace detail {

struct Partial {
  TokenSeq tokens;
  double score = 0.0;
};

inline double step_score(const Checkpoint& ckpt, const TokenSeq& prefix, const Emission& e) {
  const std::string_view prev = prefix.empty() ? kBos : std::string_view(prefix.back());
  return e.second + ckpt.lm.logprob(prev, e.first);
}

/// Length-normalizes a complete path. total is re-derived from the average
/// so that avg * len == total holds exactly for the stored values.
inline Hypothesis finish(const Checkpoint& ckpt, TokenSeq tokens, double score) {
  score += ckpt.lm.logprob(tokens.back(), kEos);
  const auto len = static_cast<double>(tokens.size());
  Hypothesis h;
  h.avg_logprob = score / len;
  h.total_logprob = h.avg_logprob * len;
  h.tokens = std::move(tokens);
  return h;
}

inline bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.avg_logprob != b.avg_logprob) return a.avg_logprob > b.avg_logprob;
  return a.tokens < b.tokens;
}

inline void rank(std::vector<Hypothesis>& hyps, std::size_t n_best) {
  std::sort(hyps.begin(), hyps.end(), ranks_before);
  hyps.erase(std::unique(hyps.begin(), hyps.end(),
                         [](const auto& a, const auto& b) { return a.tokens == b.tokens; }),
             hyps.end());
  if (hyps.size() > n_best) hyps.resize(n_best);
}

}  // namespace detail

/// Beam search keeping `beam_width` partial hypotheses per source position.
inline std::vector<Hypothesis> decode_nbest(const Checkpoint& ckpt, const TokenSeq& source,
                                            const BeamParams& params) {
  params.validate();
  if (source.empty()) return {Hypothesis{}};
  const auto options = emission_options(ckpt, source, params.top_k_lexicon);

  std::vector<detail::Partial> beam{detail::Partial{}};
  std::vector<detail::Partial> next;
  for (const auto& opts : options) {
    next.clear();
    next.reserve(beam.size() * opts.size());
    for (const auto& p : beam) {
      for (const auto& e : opts) {
        detail::Partial q{p.tokens, p.score + detail::step_score(ckpt, p.tokens, e)};
        q.tokens.push_back(e.first);
        next.push_back(std::move(q));
      }
    }
    const auto keep = std::min(params.beam_width, next.size());
    std::partial_sort(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(keep), next.end(),
                      [](const auto& a, const auto& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return a.tokens < b.tokens;
                      });
    next.resize(keep);
    std::swap(beam, next);
  }

  std::vector<Hypothesis> hyps;
  hyps.reserve(beam.size());
  for (auto& p : beam) hyps.push_back(detail::finish(ckpt, std::move(p.tokens), p.score));
  detail::rank(hyps, params.n_best);
  return hyps;
}

inline constexpr double kExhaustiveLimit = 1e6;

/// Scores every path through the emission lattice. Refuses lattices with
/// more than 10^6 paths.
inline std::vector<Hypothesis> exhaustive_nbest(const Checkpoint& ckpt, const TokenSeq& source,
                                                std::size_t n_best, std::size_t top_k = BeamParams{}.top_k_lexicon) {
  if (n_best < 1) throw UsageError("n_best must be at least 1");
  if (source.empty()) return {Hypothesis{}};
  const auto options = emission_options(ckpt, source, top_k);
  double size = 1.0;
  for (const auto& o : options) size *= static_cast<double>(o.size());
  if (size > kExhaustiveLimit) {
    throw UsageError("search space of " + std::to_string(static_cast<long long>(size)) +
                     " paths is too large to enumerate");
  }

  std::vector<Hypothesis> all;
  all.reserve(static_cast<std::size_t>(size));
  std::vector<std::size_t> choice(options.size(), 0);
  for (;;) {
    TokenSeq tokens;
    double score = 0.0;
    for (std::size_t j = 0; j < options.size(); ++j) {
      const auto& e = options[j][choice[j]];
      score = score + detail::step_score(ckpt, tokens, e);
      tokens.push_back(e.first);
    }
    all.push_back(detail::finish(ckpt, std::move(tokens), score));

    std::size_t j = options.size();
    while (j > 0) {
      --j;
      if (++choice[j] < options[j].size()) break;
      choice[j] = 0;
      if (j == 0) {
        detail::rank(all, n_best);
        return all;
      }
    }
  }
}

}  // namespace staple::translator
