#pragma once

// Desk-scale translation model: an EM-trained word lexicon t(target|source)
// (IBM Model 1 without a NULL source word) plus an add-alpha bigram language
// model over the target side. Training snapshots every EM iteration as a
// Checkpoint; later checkpoints never have lower corpus log-likelihood.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "staple/error.hpp"
#include "staple/textproc.hpp"

namespace staple::translator {

using textproc::TokenSeq;
using ParallelCorpus = std::vector<std::pair<TokenSeq, TokenSeq>>;

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kCopyLogProb = -10.0;
inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";

/// Decimal form used for every persisted real: 12 significant digits.
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::optional<double> parse_real(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

/// Rounds to the persisted precision. Idempotent and monotone.
inline double quantize(double v) { return *parse_real(format_real(v)); }

inline double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

enum class Direction { forward, backward };

inline std::string_view to_string(Direction d) { return d == Direction::forward ? "fwd" : "bwd"; }

inline std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "fwd") return Direction::forward;
  if (s == "bwd") return Direction::backward;
  return std::nullopt;
}

class LexiconTable {
 public:
  using Row = std::map<std::string, double, std::less<>>;

  void set(std::string_view source, std::string_view target, double prob) {
    rows_[std::string(source)][std::string(target)] = prob;
  }

  double prob(std::string_view source, std::string_view target) const {
    const auto* r = row(source);
    if (r == nullptr) return 0.0;
    auto it = r->find(target);
    return it == r->end() ? 0.0 : it->second;
  }

  const Row* row(std::string_view source) const {
    auto it = rows_.find(source);
    return it == rows_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, Row, std::less<>>& rows() const { return rows_; }

  /// Best `k` targets by probability, ties broken lexicographically.
  std::vector<std::pair<std::string, double>> top_candidates(std::string_view source, std::size_t k) const {
    std::vector<std::pair<std::string, double>> out;
    const auto* r = row(source);
    if (r == nullptr) return out;
    out.assign(r->begin(), r->end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (out.size() > k) out.resize(k);
    return out;
  }

  void quantize() {
    for (auto& [src, r] : rows_) {
      for (auto& [tgt, p] : r) p = translator::quantize(p);
    }
  }

  bool operator==(const LexiconTable&) const = default;

 private:
  std::map<std::string, Row, std::less<>> rows_;
};

/// Add-alpha bigram model. Histories never seen in training back off to
/// the add-alpha unigram distribution. A next word outside the vocabulary
/// (copy-through output) receives the row's unseen-continuation mass.
class BigramLm {
 public:
  struct Row {
    std::map<std::string, double, std::less<>> seen;  // log-probabilities
    double unseen = 0.0;

    double logprob(std::string_view next) const {
      auto it = seen.find(next);
      return it == seen.end() ? unseen : it->second;
    }
    bool operator==(const Row&) const = default;
  };

  static BigramLm estimate(const std::vector<TokenSeq>& sentences, double alpha) {
    if (!(alpha > 0.0)) throw UsageError("lm alpha must be positive");
    std::map<std::string, std::map<std::string, double>> bigram;
    std::map<std::string, double> unigram;
    double total = 0.0;
    for (const auto& s : sentences) {
      std::string prev(kBos);
      for (const auto& w : s) {
        bigram[prev][w] += 1.0;
        unigram[w] += 1.0;
        total += 1.0;
        prev = w;
      }
      bigram[prev][std::string(kEos)] += 1.0;
      unigram[std::string(kEos)] += 1.0;
      total += 1.0;
    }

    BigramLm lm;
    lm.alpha_ = alpha;
    const double vocab = static_cast<double>(unigram.size());
    for (const auto& [history, nexts] : bigram) {
      double count = 0.0;
      for (const auto& [w, c] : nexts) count += c;
      const double denom = count + alpha * vocab;
      Row& row = lm.histories_[history];
      for (const auto& [w, c] : nexts) row.seen[w] = std::log((c + alpha) / denom);
      row.unseen = std::log(alpha / denom);
    }
    const double denom = total + alpha * vocab;
    for (const auto& [w, c] : unigram) lm.unigram_.seen[w] = std::log((c + alpha) / denom);
    lm.unigram_.unseen = std::log(alpha / denom);
    return lm;
  }

  double logprob(std::string_view prev, std::string_view next) const {
    auto it = histories_.find(prev);
    return (it == histories_.end() ? unigram_ : it->second).logprob(next);
  }

  /// Every word the model assigns mass to, including the end marker.
  std::vector<std::string> vocabulary() const {
    std::vector<std::string> out;
    for (const auto& [w, lp] : unigram_.seen) out.push_back(w);
    return out;
  }

  const std::map<std::string, Row, std::less<>>& histories() const { return histories_; }
  const Row& unigram() const { return unigram_; }
  double alpha() const { return alpha_; }

  void quantize() {
    auto q = [](Row& r) {
      for (auto& [w, lp] : r.seen) lp = translator::quantize(lp);
      r.unseen = translator::quantize(r.unseen);
    };
    for (auto& [h, r] : histories_) q(r);
    q(unigram_);
    alpha_ = translator::quantize(alpha_);
  }

  // Used by the checkpoint reader.
  Row& mutable_history(std::string_view h) { return histories_[std::string(h)]; }
  Row& mutable_unigram() { return unigram_; }
  void set_alpha(double a) { alpha_ = a; }

  bool operator==(const BigramLm&) const = default;

 private:
  std::map<std::string, Row, std::less<>> histories_;
  Row unigram_;
  double alpha_ = 1.0;
};

struct Checkpoint {
  std::size_t iteration = 1;
  Direction direction = Direction::forward;
  LexiconTable lexicon;
  BigramLm lm;
  double corpus_loglik = 0.0;
  std::int64_t created_at = 0;  // seconds since the epoch

  bool operator==(const Checkpoint&) const = default;
};

struct CheckpointSeries {
  Direction direction = Direction::forward;
  std::vector<Checkpoint> checkpoints;  // ascending iteration

  std::size_t size() const { return checkpoints.size(); }
  const Checkpoint& latest() const {
    if (checkpoints.empty()) throw UsageError("checkpoint series is empty");
    return checkpoints.back();
  }

  /// Iterations strictly increase; log-likelihood never drops by more than `tolerance`.
  void validate(double tolerance = 1e-9) const {
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
      const auto& c = checkpoints[k];
      if (c.iteration < 1) throw IntegrityError("checkpoint iteration must be >= 1");
      if (!std::isfinite(c.corpus_loglik)) throw IntegrityError("checkpoint log-likelihood is not finite");
      if (c.direction != direction) throw IntegrityError("checkpoint direction differs from its series");
      if (k == 0) continue;
      const auto& p = checkpoints[k - 1];
      if (c.iteration <= p.iteration) throw IntegrityError("checkpoint iterations are not increasing");
      if (c.corpus_loglik < p.corpus_loglik - tolerance) {
        throw IntegrityError("corpus log-likelihood decreases between iterations " +
                             std::to_string(p.iteration) + " and " + std::to_string(c.iteration));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// EM training

/// t(f|e) uniform over the targets that co-occur with each source word.
inline LexiconTable initial_lexicon(const ParallelCorpus& parallel) {
  std::map<std::string, std::map<std::string, bool>> cooc;
  for (const auto& [src, tgt] : parallel) {
    for (const auto& e : src) {
      auto& row = cooc[e];
      for (const auto& f : tgt) row[f] = true;
    }
  }
  LexiconTable lex;
  for (const auto& [e, row] : cooc) {
    const double p = 1.0 / static_cast<double>(row.size());
    for (const auto& [f, unused] : row) lex.set(e, f, p);
  }
  return lex;
}

/// One expectation-maximization step.
inline LexiconTable em_step(const LexiconTable& lexicon, const ParallelCorpus& parallel) {
  std::map<std::string, std::map<std::string, double>> counts;
  std::vector<double> weights;
  for (const auto& [src, tgt] : parallel) {
    weights.resize(src.size());
    for (const auto& f : tgt) {
      double denom = 0.0;
      for (std::size_t i = 0; i < src.size(); ++i) {
        weights[i] = lexicon.prob(src[i], f);
        denom += weights[i];
      }
      if (!(denom > 0.0)) continue;
      for (std::size_t i = 0; i < src.size(); ++i) counts[src[i]][f] += weights[i] / denom;
    }
  }
  LexiconTable next;
  for (const auto& [e, row] : counts) {
    double total = 0.0;
    for (const auto& [f, c] : row) total += c;
    for (const auto& [f, c] : row) next.set(e, f, c / total);
  }
  return next;
}

/// Sum over pairs and target positions of log((1/l) * sum_i t(f_j|e_i)).
inline double corpus_loglikelihood(const LexiconTable& lexicon, const ParallelCorpus& parallel) {
  double ll = 0.0;
  for (const auto& [src, tgt] : parallel) {
    if (src.empty()) continue;
    const double inv_len = 1.0 / static_cast<double>(src.size());
    for (const auto& f : tgt) {
      double sum = 0.0;
      for (const auto& e : src) sum += lexicon.prob(e, f);
      ll += safe_log(inv_len * sum);
    }
  }
  return ll;
}

struct TrainOptions {
  std::size_t iterations = 5;
  double lm_alpha = 0.1;
  Direction direction = Direction::forward;
  std::optional<std::int64_t> created_at;  // default: $SOURCE_DATE_EPOCH, else now
};

inline std::int64_t resolve_timestamp(const std::optional<std::int64_t>& fixed) {
  if (fixed) return *fixed;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env != nullptr && *env != '\0') {
    return std::strtoll(env, nullptr, 10);
  }
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Runs `options.iterations` EM steps and snapshots a Checkpoint after each.
/// Pairs with an empty side are skipped and reported through `warnings`.
/// `on_checkpoint` sees each snapshot as it is produced (used for persistence).
inline CheckpointSeries train_toy(const ParallelCorpus& parallel, const TrainOptions& options,
                                  std::vector<std::string>* warnings = nullptr,
                                  const std::function<void(const Checkpoint&)>& on_checkpoint = {}) {
  if (options.iterations == 0) throw UsageError("iterations must be at least 1");
  ParallelCorpus usable;
  for (std::size_t k = 0; k < parallel.size(); ++k) {
    if (parallel[k].first.empty() || parallel[k].second.empty()) {
      if (warnings != nullptr) warnings->push_back("sentence pair " + std::to_string(k + 1) + " is empty; skipped");
      continue;
    }
    usable.push_back(parallel[k]);
  }
  if (usable.empty()) throw ValidationError("parallel corpus has no usable sentence pairs");

  std::vector<TokenSeq> targets;
  targets.reserve(usable.size());
  for (const auto& [src, tgt] : usable) targets.push_back(tgt);
  auto lm = BigramLm::estimate(targets, options.lm_alpha);
  lm.quantize();

  const auto stamp = resolve_timestamp(options.created_at);
  CheckpointSeries series;
  series.direction = options.direction;
  auto lexicon = initial_lexicon(usable);
  for (std::size_t it = 1; it <= options.iterations; ++it) {
    lexicon = em_step(lexicon, usable);
    Checkpoint ckpt;
    ckpt.iteration = it;
    ckpt.direction = options.direction;
    ckpt.lexicon = lexicon;
    ckpt.lexicon.quantize();
    ckpt.lm = lm;
    ckpt.corpus_loglik = quantize(corpus_loglikelihood(lexicon, usable));
    ckpt.created_at = stamp;
    if (on_checkpoint) on_checkpoint(ckpt);
    series.checkpoints.push_back(std::move(ckpt));
  }
  return series;
}

}  // namespace staple::translator
