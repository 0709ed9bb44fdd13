// Copyright 2026 The Commentary Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef COMMENTARY_TEXT_HPP
#define COMMENTARY_TEXT_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "commentary/core.hpp"

namespace commentary {

enum class UnitKind { kWord, kCharacter };

namespace text {

// Decodes the UTF-8 sequence starting at s[i] and advances i. Malformed bytes
// decode as U+FFFD, one byte at a time.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto lead = static_cast<unsigned char>(s[i]);
  int extra = 0;
  char32_t cp = 0;
  if (lead < 0x80) {
    ++i;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    extra = 1;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    extra = 2;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    extra = 3;
    cp = lead & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + extra >= s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += extra + 1;
  return cp;
}

inline bool is_space(char32_t cp) {
  switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\f': case U'\v':
    case 0x00A0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

/// Whitespace-delimited tokens.
inline std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  std::size_t begin = std::string_view::npos;
  while (i < s.size()) {
    const std::size_t at = i;
    const char32_t cp = next_code_point(s, i);
    if (is_space(cp)) {
      if (begin != std::string_view::npos) out.push_back(s.substr(begin, at - begin));
      begin = std::string_view::npos;
    } else if (begin == std::string_view::npos) {
      begin = at;
    }
  }
  if (begin != std::string_view::npos) out.push_back(s.substr(begin));
  return out;
}

/// Non-whitespace code points, each as its own UTF-8 slice.
inline std::vector<std::string_view> characters(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t at = i;
    if (!is_space(next_code_point(s, i))) out.push_back(s.substr(at, i - at));
  }
  return out;
}

inline std::vector<std::string_view> units(std::string_view s, UnitKind kind) {
  return kind == UnitKind::kWord ? words(s) : characters(s);
}

/// Default unit for a language: words for English, characters for Japanese.
inline UnitKind default_unit(Language language) {
  return language == Language::kEnglish ? UnitKind::kWord : UnitKind::kCharacter;
}

inline std::size_t count_units(std::string_view s, UnitKind kind) {
  return units(s, kind).size();
}

}  // namespace text
}  // namespace commentary

#endif  // COMMENTARY_TEXT_HPP
