#pragma once

// Code-point level helpers over UTF-8 byte strings, backed by ICU.

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace staple::unicode {

struct CodePoint {
  UChar32 value;      // negative for an ill-formed byte sequence
  std::size_t begin;  // byte offset
  std::size_t end;
};

inline std::vector<CodePoint> code_points(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(bytes, i, length, c);
    out.push_back({c, static_cast<std::size_t>(start), static_cast<std::size_t>(i)});
  }
  return out;
}

inline bool is_punct(UChar32 c) { return c >= 0 && u_ispunct(c); }
inline bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

/// Splits a word into its code points, each as a UTF-8 substring.
inline std::vector<std::string> characters(std::string_view word) {
  std::vector<std::string> out;
  for (const auto& cp : code_points(word)) {
    out.emplace_back(word.substr(cp.begin, cp.end - cp.begin));
  }
  return out;
}

}  // namespace staple::unicode
