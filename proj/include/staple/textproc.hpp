#pragma once

// Rule-based tokenization and joint byte-pair encoding.

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "staple/corpus.hpp"
#include "staple/error.hpp"
#include "staple/unicode.hpp"

namespace staple::textproc {

using TokenSeq = std::vector<std::string>;

inline constexpr std::string_view kContinuation = "@@";
inline constexpr std::string_view kDefaultEow = "</w>";

namespace detail {

inline bool joins_words(UChar32 c) {
  return c == '\'' || c == '-' || c == 0x2019 || c == 0x2010 || c == 0x2011;
}

}  // namespace detail

/// Splits on whitespace, then isolates each maximal run of punctuation.
/// Apostrophes and hyphens between two word characters stay inside the word.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  const auto cps = unicode::code_points(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    if (unicode::is_space(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < cps.size() && !unicode::is_space(cps[end].value)) ++end;

    // [i, end) is one whitespace-delimited chunk.
    auto breaks = [&](std::size_t k) {
      if (!unicode::is_punct(cps[k].value)) return false;
      const bool inner = detail::joins_words(cps[k].value) && k > i && k + 1 < end &&
                         !unicode::is_punct(cps[k - 1].value) && !unicode::is_punct(cps[k + 1].value);
      return !inner;
    };
    std::size_t k = i;
    while (k < end) {
      const bool punct = breaks(k);
      std::size_t j = k;
      while (j < end && breaks(j) == punct) ++j;
      tokens.emplace_back(text.substr(cps[k].begin, cps[j - 1].end - cps[k].begin));
      k = j;
    }
    i = end;
  }
  return tokens;
}

/// Joins with single spaces; tokens made only of ?!.,;: attach to the left.
inline std::string detokenize(const TokenSeq& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    const bool attach = !tok.empty() && tok.find_first_not_of("?!.,;:") == std::string::npos;
    if (!out.empty() && !attach) out += ' ';
    out += tok;
  }
  return out;
}

/// The model-side view of a sentence: normalized, then tokenized.
inline TokenSeq preprocess(std::string_view text, const corpus::NormalizationPolicy& policy) {
  return tokenize(corpus::normalize(text, policy));
}

using SymbolPair = std::pair<std::string, std::string>;

struct BpeModel {
  std::vector<SymbolPair> merges;  // rank = position
  std::string eow_marker = std::string(kDefaultEow);

  std::size_t num_merges() const { return merges.size(); }
  bool operator==(const BpeModel&) const = default;
};

namespace detail {

/// Characters of `word`, with the end-of-word marker suffixed to the last one.
inline std::vector<std::string> initial_symbols(std::string_view word, std::string_view eow) {
  auto symbols = unicode::characters(word);
  if (!symbols.empty()) symbols.back() += eow;
  return symbols;
}

/// Merges every non-overlapping occurrence of (left, right), scanning left to right.
inline bool merge_pair(std::vector<std::string>& symbols, const SymbolPair& pair) {
  bool changed = false;
  std::vector<std::string> merged;
  merged.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == pair.first && symbols[i + 1] == pair.second) {
      merged.push_back(symbols[i] + symbols[i + 1]);
      ++i;
      changed = true;
    } else {
      merged.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(merged);
  return changed;
}

/// Incremental pair statistics: counts, the words containing each pair,
/// and a queue ordered by (count desc, left, right).
class PairIndex {
 public:
  void add_word(std::size_t word, const std::vector<std::string>& symbols, long freq) {
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      adjust({symbols[i], symbols[i + 1]}, freq);
      where_[{symbols[i], symbols[i + 1]}].insert(word);
    }
  }

  void remove_word(std::size_t word, const std::vector<std::string>& symbols, long freq) {
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      SymbolPair p{symbols[i], symbols[i + 1]};
      adjust(p, -freq);
      if (auto it = where_.find(p); it != where_.end()) it->second.erase(word);
    }
  }

  bool empty() const { return queue_.empty(); }

  SymbolPair best() const {
    const auto& top = *queue_.begin();
    return {std::get<1>(top), std::get<2>(top)};
  }

  std::vector<std::size_t> words_with(const SymbolPair& p) const {
    auto it = where_.find(p);
    if (it == where_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }

 private:
  void adjust(const SymbolPair& p, long delta) {
    long& count = counts_[p];
    if (count > 0) queue_.erase({-count, p.first, p.second});
    count += delta;
    if (count > 0) {
      queue_.insert({-count, p.first, p.second});
    } else {
      counts_.erase(p);
    }
  }

  std::map<SymbolPair, long> counts_;
  std::map<SymbolPair, std::set<std::size_t>> where_;
  std::set<std::tuple<long, std::string, std::string>> queue_;
};

}  // namespace detail

/// Learns up to `num_merges` merges over word types weighted by token
/// frequency. Ties on frequency go to the lexicographically smallest pair.
/// For joint BPE, pass source and target sentences in one corpus.
inline BpeModel bpe_learn(const std::vector<TokenSeq>& corpus, std::size_t num_merges,
                          std::string_view eow = kDefaultEow) {
  BpeModel model;
  model.eow_marker = std::string(eow);

  std::map<std::string, long> word_freq;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (!tok.empty()) ++word_freq[tok];
    }
  }
  std::vector<std::vector<std::string>> words;
  std::vector<long> freqs;
  for (const auto& [word, freq] : word_freq) {
    words.push_back(detail::initial_symbols(word, eow));
    freqs.push_back(freq);
  }

  detail::PairIndex index;
  for (std::size_t w = 0; w < words.size(); ++w) index.add_word(w, words[w], freqs[w]);

  while (model.merges.size() < num_merges && !index.empty()) {
    const auto pair = index.best();
    model.merges.push_back(pair);
    for (const auto w : index.words_with(pair)) {
      index.remove_word(w, words[w], freqs[w]);
      detail::merge_pair(words[w], pair);
      index.add_word(w, words[w], freqs[w]);
    }
  }
  return model;
}

/// Segments one word; every subword but the last carries the `@@` marker.
inline TokenSeq bpe_segment(const BpeModel& model, std::string_view word,
                            const std::map<SymbolPair, std::size_t>& ranks) {
  auto symbols = detail::initial_symbols(word, model.eow_marker);
  while (symbols.size() > 1) {
    std::size_t best_rank = ranks.size();
    const SymbolPair* best = nullptr;
    SymbolPair probe;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      probe = {symbols[i], symbols[i + 1]};
      if (auto it = ranks.find(probe); it != ranks.end() && it->second < best_rank) {
        best_rank = it->second;
        best = &it->first;
      }
    }
    if (best == nullptr) break;
    detail::merge_pair(symbols, *best);
  }
  if (!symbols.empty()) {
    auto& last = symbols.back();
    if (last.size() >= model.eow_marker.size() &&
        last.compare(last.size() - model.eow_marker.size(), std::string::npos, model.eow_marker) == 0) {
      last.resize(last.size() - model.eow_marker.size());
    }
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i] += kContinuation;
  }
  return symbols;
}

inline std::map<SymbolPair, std::size_t> merge_ranks(const BpeModel& model) {
  std::map<SymbolPair, std::size_t> ranks;
  for (std::size_t r = 0; r < model.merges.size(); ++r) ranks.emplace(model.merges[r], r);
  return ranks;
}

inline TokenSeq bpe_apply(const BpeModel& model, const TokenSeq& tokens) {
  const auto ranks = merge_ranks(model);
  TokenSeq out;
  for (const auto& tok : tokens) {
    if (tok.empty()) continue;
    auto pieces = bpe_segment(model, tok, ranks);
    out.insert(out.end(), std::make_move_iterator(pieces.begin()), std::make_move_iterator(pieces.end()));
  }
  return out;
}

/// Rejoins `@@`-terminated subwords with the subword that follows them.
/// A dangling continuation at the end is emitted as-is and counted.
inline TokenSeq bpe_decode(const TokenSeq& tokens, std::size_t* dangling = nullptr) {
  TokenSeq out;
  std::string pending;
  bool open = false;
  for (const auto& tok : tokens) {
    const bool continues = tok.size() >= kContinuation.size() &&
                           std::string_view(tok).substr(tok.size() - kContinuation.size()) == kContinuation;
    if (continues) {
      pending.append(tok, 0, tok.size() - kContinuation.size());
      open = true;
    } else {
      pending += tok;
      out.push_back(std::move(pending));
      pending.clear();
      open = false;
    }
  }
  if (open) {
    out.push_back(std::move(pending));
    if (dangling != nullptr) ++*dangling;
  }
  return out;
}

inline void save_bpe(const BpeModel& model, std::ostream& out) {
  out << "#bpe v1 eow=" << model.eow_marker << '\n';
  for (const auto& [left, right] : model.merges) out << left << '\t' << right << '\n';
  if (!out) throw Error("failed writing BPE model");
}

inline BpeModel load_bpe(std::istream& in, const std::string& source = "<bpe>") {
  static constexpr std::string_view kHeader = "#bpe v1 eow=";
  BpeModel model;
  std::string line;
  if (!std::getline(in, line) || line.compare(0, kHeader.size(), kHeader) != 0 ||
      line.size() == kHeader.size()) {
    throw ParseError(source, 1, "missing '#bpe v1 eow=<marker>' header");
  }
  model.eow_marker = line.substr(kHeader.size());
  std::set<SymbolPair> seen;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(source, number, "expected 'left<TAB>right'");
    }
    SymbolPair pair{line.substr(0, tab), line.substr(tab + 1)};
    if (!seen.insert(pair).second) throw ValidationError(source, number, "duplicate merge");
    model.merges.push_back(std::move(pair));
  }
  return model;
}

}  // namespace staple::textproc
