#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gobs {

struct Segmentation {
  std::vector<std::string> tokens;     // lowercased
  std::vector<std::string> sentences;  // original text, trimmed, terminator kept
  bool operator==(const Segmentation&) const = default;
};

namespace detail {

// Decodes one UTF-8 code point starting at text[i] and advances i.
// Invalid bytes decode as U+FFFD and consume one byte.
inline char32_t next_code_point(std::string_view text, std::size_t& i) {
  auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
  if (len == 0 || i + len > text.size()) {
    ++i;
    return 0xFFFD;
  }
  char32_t cp = b0 & (0xFF >> (len + 1));
  for (int k = 1; k < len; ++k) {
    auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

// Letters and digits; non-ASCII code points count as letters except the
// Latin-1 punctuation/symbol range, the general punctuation block and U+FFFD.
inline bool is_word_char(char32_t cp) {
  if (cp < 0x80)
    return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x206F) return false;
  if (cp == 0xFFFD) return false;
  return true;
}

inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
  return cp;
}

inline bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0xA0;
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Maximal runs of letters, digits and apostrophes in original case. Curly
// apostrophes are normalized to '. Runs made only of apostrophes are dropped.
inline std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  bool has_alnum = false;
  auto flush = [&] {
    if (has_alnum) out.push_back(std::move(cur));
    cur.clear();
    has_alnum = false;
  };
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = detail::next_code_point(text, i);
    if (detail::is_word_char(cp)) {
      detail::append_utf8(cur, cp);
      has_alnum = true;
    } else if (detail::is_apostrophe(cp)) {
      cur.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline std::string lowercase(std::string_view word) {
  std::string out;
  out.reserve(word.size());
  std::size_t i = 0;
  while (i < word.size()) detail::append_utf8(out, detail::to_lower(detail::next_code_point(word, i)));
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  auto ws = words(text);
  for (auto& w : ws) w = lowercase(w);
  return ws;
}

// Sentences end at '.', '!' or '?' followed by whitespace or end of text.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  auto flush = [&](std::size_t end) {
    auto s = detail::trim(text.substr(start, end - start));
    if (!s.empty()) out.emplace_back(s);
    start = end;
  };
  while (i < text.size()) {
    char c = text[i];
    std::size_t here = i;
    detail::next_code_point(text, i);
    if (c == '.' || c == '!' || c == '?') {
      bool boundary = i >= text.size();
      if (!boundary) {
        std::size_t j = i;
        boundary = detail::is_space(detail::next_code_point(text, j));
      }
      if (boundary) flush(here + 1);
    }
  }
  flush(text.size());
  return out;
}

inline Segmentation segment(std::string_view text) {
  return Segmentation{tokenize(text), split_sentences(text)};
}

}  // namespace gobs
