#pragma once

// Text normalization for short social-media posts: strips URLs, user handles,
// emoji and control characters, unfolds hashtags into their lexical content,
// normalizes width/case, and splits on whitespace/punctuation. CJK text passes
// through untouched except for punctuation stripping.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace pdtopics {

using Tokenizer = std::function<std::vector<std::string>(const std::string&)>;

namespace text {

// Decodes the UTF-8 sequence starting at s[i]; advances i. Invalid bytes
// decode as U+FFFD and consume one byte.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline bool is_control(char32_t cp) {
  return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F);
}

inline bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x3000;
}

inline bool is_emoji_or_symbol(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // pictographs, emoticons, transport
         (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols, dingbats
         (cp >= 0x2300 && cp <= 0x23FF) ||    // technical symbols
         (cp >= 0x2B00 && cp <= 0x2BFF) ||    // stars, arrows
         (cp >= 0xFE00 && cp <= 0xFE0F) ||    // variation selectors
         cp == 0x200D || cp == 0x20E3;        // ZWJ, keycap
}

// ASCII and CJK punctuation act as token separators. '_' is a token character
// so that protected multi-word terms survive re-tokenization.
inline bool is_separator(char32_t cp) {
  if (cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r') return true;
  if (cp < 0x80) {
    const bool wordchar = (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || cp == '_';
    return !wordchar;
  }
  if (cp >= 0x3000 && cp <= 0x303F) return true;  // CJK punctuation
  if (cp >= 0xFF00 && cp <= 0xFF65) return true;  // fullwidth punctuation (post width-folding)
  if (cp >= 0x2000 && cp <= 0x206F) return true;  // general punctuation
  return false;
}

// Maps fullwidth ASCII variants to their halfwidth forms, lowercases ASCII.
inline char32_t fold_char(char32_t cp) {
  if (cp >= 0xFF01 && cp <= 0xFF5E) cp = cp - 0xFF01 + 0x21;
  if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
  return cp;
}

inline bool is_url_start(std::string_view s, std::size_t i) {
  const auto rest = s.substr(i);
  return rest.starts_with("http://") || rest.starts_with("https://") || rest.starts_with("www.");
}

// Applies the cleaning contract and returns a whitespace-normalized string:
// URLs and @handles removed, '#tag_word' -> 'tag word', emoji/control stripped,
// width/case folded. The output only ever shrinks the character classes it
// touches, so running it twice is a no-op.
inline std::string clean(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  const auto skip_nonspace = [&] {
    while (i < raw.size()) {
      std::size_t j = i;
      const char32_t cp = decode_utf8(raw, j);
      if (is_space(cp)) break;
      i = j;
    }
  };
  while (i < raw.size()) {
    if (is_url_start(raw, i)) {
      skip_nonspace();
      continue;
    }
    std::size_t j = i;
    char32_t cp = decode_utf8(raw, j);
    if (cp == '@') {
      i = j;
      skip_nonspace();  // handle = '@' up to next whitespace
      continue;
    }
    if (cp == '#') {
      // hashtag: emit lexical content with '_' as a word break
      i = j;
      while (i < raw.size()) {
        std::size_t k = i;
        const char32_t c2 = decode_utf8(raw, k);
        if (c2 == '_') {
          out += ' ';
          i = k;
          continue;
        }
        if (c2 == '#' || is_space(c2)) break;
        const char32_t f = fold_char(c2);
        if (!is_control(f) && !is_emoji_or_symbol(f)) encode_utf8(f, out);
        i = k;
      }
      continue;
    }
    i = j;
    cp = fold_char(cp);
    if (is_control(cp)) {
      out += ' ';
      continue;
    }
    if (is_emoji_or_symbol(cp)) continue;
    encode_utf8(cp, out);
  }
  return out;
}

// Splits cleaned text on whitespace and punctuation. Bytes 0x01 are treated as
// opaque token characters (used internally to protect multi-word terms).
inline std::vector<std::string> split_tokens(const std::string& cleaned) {
  std::vector<std::string> tokens;
  std::string cur;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    const std::size_t start = i;
    const char32_t cp = decode_utf8(cleaned, i);
    if (cp != 0x01 && is_separator(cp)) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.append(cleaned, start, i - start);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

inline Tokenizer default_tokenizer() {
  return [](const std::string& cleaned) { return split_tokens(cleaned); };
}

}  // namespace text
}  // namespace pdtopics
