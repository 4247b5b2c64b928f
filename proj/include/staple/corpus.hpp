#pragma once

// Prompt / weighted-translation corpora in the block format:
//
//   id|prompt text
//   translation|weight
//   translation|weight
//   <blank line>
//
// Prediction files use the same layout with bare translation lines.

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "staple/error.hpp"
#include "staple/unicode.hpp"

namespace staple::corpus {

struct NormalizationPolicy {
  bool lowercase = true;
  bool strip_punctuation = true;
  bool collapse_whitespace = true;
  bool unicode_nfc = true;

  static NormalizationPolicy defaults() { return {}; }
  static NormalizationPolicy exact() { return {false, false, false, false}; }

  bool operator==(const NormalizationPolicy&) const = default;
};

/// Canonical form used for matching and de-duplication. Idempotent.
/// Collapsing whitespace also trims both ends.
inline std::string normalize(std::string_view text, const NormalizationPolicy& policy) {
  if (!policy.lowercase && !policy.strip_punctuation && !policy.collapse_whitespace &&
      !policy.unicode_nfc) {
    return std::string(text);
  }
  icu::UnicodeString s =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = policy.unicode_nfc ? icu::Normalizer2::getNFCInstance(status) : nullptr;
  if (U_FAILURE(status)) nfc = nullptr;

  if (nfc != nullptr) s = nfc->normalize(s, status);
  if (policy.lowercase) s.toLower(icu::Locale::getRoot());
  if (policy.strip_punctuation) {
    icu::UnicodeString kept;
    for (int32_t i = 0; i < s.length(); i = s.moveIndex32(i, 1)) {
      const UChar32 c = s.char32At(i);
      if (!u_ispunct(c)) kept.append(c);
    }
    s = kept;
  }
  // Dropping punctuation can bring a combining mark next to a new base.
  if (nfc != nullptr) s = nfc->normalize(s, status);
  if (policy.collapse_whitespace) {
    icu::UnicodeString collapsed;
    bool pending_space = false;
    for (int32_t i = 0; i < s.length(); i = s.moveIndex32(i, 1)) {
      const UChar32 c = s.char32At(i);
      if (u_isUWhiteSpace(c)) {
        pending_space = true;
        continue;
      }
      if (pending_space && collapsed.length() > 0) collapsed.append(static_cast<UChar>(' '));
      pending_space = false;
      collapsed.append(c);
    }
    s = collapsed;
  }
  std::string out;
  s.toUTF8String(out);
  return out;
}

struct Prompt {
  std::string id;
  std::string text;

  bool operator==(const Prompt&) const = default;
};

struct WeightedTranslation {
  std::string text;
  double weight = 0.0;

  bool operator==(const WeightedTranslation&) const = default;
};

struct GoldSet {
  Prompt prompt;
  std::vector<WeightedTranslation> translations;  // weight non-increasing

  double total_weight() const {
    double sum = 0.0;
    for (const auto& t : translations) sum += t.weight;
    return sum;
  }

  bool operator==(const GoldSet&) const = default;
};

struct PredictionSet {
  std::string prompt_id;
  std::string prompt_text;  // optional, carried through for readability
  std::vector<std::string> candidates;

  bool operator==(const PredictionSet&) const = default;
};

struct ParseWarning {
  std::size_t line = 0;
  std::string message;
};

/// Weight sums above 1 by more than this are rejected.
inline constexpr double kWeightSumSlack = 1e-6;

namespace detail {

struct Line {
  std::size_t number;
  std::string text;
};

struct Block {
  Line header;
  std::vector<Line> body;
};

inline std::vector<Block> read_blocks(std::istream& in) {
  std::vector<Block> blocks;
  std::string raw;
  std::size_t number = 0;
  bool open = false;
  while (std::getline(in, raw)) {
    ++number;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) {
      open = false;
      continue;
    }
    if (!open) {
      blocks.push_back({{number, raw}, {}});
      open = true;
    } else {
      blocks.back().body.push_back({number, raw});
    }
  }
  return blocks;
}

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

inline Prompt parse_header(const Line& line, const std::string& source) {
  const auto bar = line.text.find('|');
  if (bar == std::string::npos) {
    throw ParseError(source, line.number, "malformed header, expected 'id|prompt'");
  }
  Prompt p{line.text.substr(0, bar), line.text.substr(bar + 1)};
  if (p.id.empty()) throw ValidationError(source, line.number, "empty prompt id");
  return p;
}

inline double parse_weight(std::string_view field, const Line& line, const std::string& source) {
  const auto token = trim(field);
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value, std::chars_format::fixed);
  if (token.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(source, line.number, "weight '" + std::string(token) + "' is not a decimal number");
  }
  if (!(value > 0.0 && value <= 1.0)) {
    throw ValidationError(source, line.number,
                          "weight " + std::string(token) + " outside (0, 1]");
  }
  return value;
}

}  // namespace detail

/// Shortest decimal with at most six fractional digits.
inline std::string format_weight(double weight) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", weight);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

inline std::vector<GoldSet> parse_gold(std::istream& in,
                                       const NormalizationPolicy& policy = NormalizationPolicy::defaults(),
                                       const std::string& source = "<gold>") {
  std::vector<GoldSet> out;
  std::unordered_set<std::string> ids;
  for (const auto& block : detail::read_blocks(in)) {
    GoldSet gold;
    gold.prompt = detail::parse_header(block.header, source);
    if (detail::trim(gold.prompt.text).empty()) {
      throw ValidationError(source, block.header.number, "empty prompt text");
    }
    if (!ids.insert(gold.prompt.id).second) {
      throw ValidationError(source, block.header.number, "duplicate prompt id '" + gold.prompt.id + "'");
    }
    if (block.body.empty()) {
      throw ValidationError(source, block.header.number,
                            "block '" + gold.prompt.id + "' has no translations");
    }
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& line : block.body) {
      const auto bar = line.text.rfind('|');
      if (bar == std::string::npos) {
        throw ParseError(source, line.number, "malformed translation line, expected 'text|weight'");
      }
      WeightedTranslation t{line.text.substr(0, bar),
                            detail::parse_weight(std::string_view(line.text).substr(bar + 1), line, source)};
      auto key = normalize(t.text, policy);
      if (key.empty()) throw ValidationError(source, line.number, "translation is empty after normalization");
      if (auto [it, fresh] = seen.emplace(std::move(key), line.number); !fresh) {
        throw ValidationError(source, line.number,
                              "duplicate translation (first seen on line " + std::to_string(it->second) + ")");
      }
      gold.translations.push_back(std::move(t));
    }
    if (gold.total_weight() > 1.0 + kWeightSumSlack) {
      throw ValidationError(source, block.header.number,
                            "weights of '" + gold.prompt.id + "' sum to more than 1");
    }
    std::stable_sort(gold.translations.begin(), gold.translations.end(),
                     [](const auto& a, const auto& b) { return a.weight > b.weight; });
    out.push_back(std::move(gold));
  }
  return out;
}

/// Reads the block headers of any block-format file (gold or predictions).
inline std::vector<Prompt> parse_prompts(std::istream& in, const std::string& source = "<prompts>") {
  std::vector<Prompt> out;
  std::unordered_set<std::string> ids;
  for (const auto& block : detail::read_blocks(in)) {
    auto p = detail::parse_header(block.header, source);
    if (detail::trim(p.text).empty()) throw ValidationError(source, block.header.number, "empty prompt text");
    if (!ids.insert(p.id).second) {
      throw ValidationError(source, block.header.number, "duplicate prompt id '" + p.id + "'");
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Every candidate line either survives or produces one warning.
inline std::vector<PredictionSet> parse_predictions(std::istream& in,
                                                    const NormalizationPolicy& policy = NormalizationPolicy::defaults(),
                                                    std::vector<ParseWarning>* warnings = nullptr,
                                                    const std::string& source = "<predictions>") {
  std::vector<PredictionSet> out;
  std::unordered_set<std::string> ids;
  auto warn = [&](std::size_t line, std::string msg) {
    if (warnings != nullptr) warnings->push_back({line, std::move(msg)});
  };
  for (const auto& block : detail::read_blocks(in)) {
    const auto header = detail::parse_header(block.header, source);
    if (!ids.insert(header.id).second) {
      throw ValidationError(source, block.header.number, "duplicate prompt id '" + header.id + "'");
    }
    PredictionSet set{header.id, header.text, {}};
    std::unordered_set<std::string> seen;
    for (const auto& line : block.body) {
      if (detail::is_blank(line.text)) {
        warn(line.number, "empty candidate skipped");
        continue;
      }
      if (!seen.insert(normalize(line.text, policy)).second) {
        warn(line.number, "duplicate candidate skipped");
        continue;
      }
      set.candidates.push_back(line.text);
    }
    out.push_back(std::move(set));
  }
  return out;
}

inline void write_predictions(const std::vector<PredictionSet>& sets, std::ostream& out) {
  bool first = true;
  for (const auto& set : sets) {
    if (!first) out << '\n';
    first = false;
    out << set.prompt_id << '|' << set.prompt_text << '\n';
    for (const auto& c : set.candidates) out << c << '\n';
  }
  if (!out) throw Error("failed writing predictions");
}

inline void write_gold(const std::vector<GoldSet>& sets, std::ostream& out) {
  bool first = true;
  for (const auto& gold : sets) {
    if (!first) out << '\n';
    first = false;
    out << gold.prompt.id << '|' << gold.prompt.text << '\n';
    auto sorted = gold.translations;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.weight > b.weight; });
    for (const auto& t : sorted) out << t.text << '|' << format_weight(t.weight) << '\n';
  }
  if (!out) throw Error("failed writing gold sets");
}

inline std::vector<Prompt> prompts_of(const std::vector<GoldSet>& golds) {
  std::vector<Prompt> out;
  out.reserve(golds.size());
  for (const auto& g : golds) out.push_back(g.prompt);
  return out;
}

}  // namespace staple::corpus
