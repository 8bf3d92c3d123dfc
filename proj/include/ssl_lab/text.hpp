#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "ssl_lab/error.hpp"

namespace ssl_lab::text {

inline std::u32string to_u32(std::string_view utf8) {
  const icu::UnicodeString us = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  std::u32string out;
  out.reserve(static_cast<std::size_t>(us.length()));
  for (int32_t i = 0; i < us.length();) {
    const UChar32 c = us.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

inline std::string to_utf8(std::u32string_view s) {
  icu::UnicodeString us;
  for (char32_t c : s) us.append(static_cast<UChar32>(c));
  std::string out;
  us.toUTF8String(out);
  return out;
}

inline const icu::Normalizer2& nfd() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFDInstance(status);
  require(U_SUCCESS(status) && n != nullptr, ErrorKind::InvalidArgument, "ICU NFD normalizer unavailable");
  return *n;
}

inline bool is_combining_mark(char32_t c) {
  return u_charType(static_cast<UChar32>(c)) == U_NON_SPACING_MARK;
}

/// Canonical decomposition followed by removal of non-spacing marks.
inline std::u32string strip_diacritics(std::u32string_view s) {
  icu::UnicodeString us;
  for (char32_t c : s) us.append(static_cast<UChar32>(c));
  UErrorCode status = U_ZERO_ERROR;
  const icu::UnicodeString decomposed = nfd().normalize(us, status);
  require(U_SUCCESS(status), ErrorKind::InvalidArgument, "NFD normalization failed");
  std::u32string out;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 c = decomposed.char32At(i);
    i += U16_LENGTH(c);
    if (!is_combining_mark(static_cast<char32_t>(c))) out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

inline std::u32string lowercase(std::u32string_view s) {
  icu::UnicodeString us;
  for (char32_t c : s) us.append(static_cast<UChar32>(c));
  us.toLower(icu::Locale::getRoot());
  std::u32string out;
  for (int32_t i = 0; i < us.length();) {
    const UChar32 c = us.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

/// Diacritics-insensitive, case-insensitive comparison form.
inline std::u32string fold(std::u32string_view s) { return strip_diacritics(lowercase(strip_diacritics(s))); }

inline bool is_space(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

inline bool is_word_char(char32_t c) {
  return u_isalnum(static_cast<UChar32>(c)) != 0 || c == U'_' || is_combining_mark(c);
}

/// Whitespace and punctuation tokenizer: maximal runs of word characters and
/// maximal runs of other non-space characters each form one token.
inline std::vector<std::string> tokenize(std::string_view utf8) {
  const std::u32string s = to_u32(utf8);
  std::vector<std::string> tokens;
  std::u32string current;
  int current_kind = 0;  // 0 none, 1 word, 2 punctuation
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(to_utf8(current));
    current.clear();
    current_kind = 0;
  };
  for (char32_t c : s) {
    if (is_space(c)) {
      flush();
      continue;
    }
    const int kind = is_word_char(c) ? 1 : 2;
    if (kind != current_kind) flush();
    current.push_back(c);
    current_kind = kind;
  }
  flush();
  return tokens;
}

inline std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view utf8) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : utf8) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace ssl_lab::text
