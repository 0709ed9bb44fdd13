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

#ifndef COMMENTARY_PROMPTING_HPP
#define COMMENTARY_PROMPTING_HPP

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "commentary/core.hpp"
#include "commentary/media.hpp"
#include "commentary/text.hpp"

namespace commentary {

enum class TemplateKind { kInit, kDecision };

inline constexpr std::string_view kContextPlaceholder = "{context}";

struct PromptTemplate {
  std::string id;
  Language language = Language::kEnglish;
  TemplateKind kind = TemplateKind::kDecision;
  std::string body;
  std::string role_preamble;

  // Decision templates carry {context}; init templates never do.
  void validate() const {
    const bool has_context = body.find(kContextPlaceholder) != std::string::npos ||
                             role_preamble.find(kContextPlaceholder) != std::string::npos;
    if (kind == TemplateKind::kDecision && !has_context) {
      throw InvalidArgument("prompting: decision template '" + id + "' lacks {context}");
    }
    if (kind == TemplateKind::kInit && has_context) {
      throw InvalidArgument("prompting: init template '" + id + "' must not contain {context}");
    }
  }
};

struct Demonstration {
  FrameWindow frames;
  std::string utterance_text;
};

struct RenderedPrompt {
  std::string text;
  std::vector<std::string> attachments;  // image URIs
  std::string digest;
  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

/// 16 hex chars of SHA-256 over the text and attachment URIs.
inline std::string prompt_digest(std::string_view text, const std::vector<std::string>& attachments) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, text.data(), text.size());
  for (const auto& uri : attachments) {
    static constexpr char kSep = '\x1f';
    EVP_DigestUpdate(ctx, &kSep, 1);
    EVP_DigestUpdate(ctx, uri.data(), uri.size());
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < 8 && i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

namespace detail {

inline std::string compose(const PromptTemplate& tmpl, std::string_view context) {
  std::string text = tmpl.role_preamble;
  if (!text.empty() && !tmpl.body.empty()) text += '\n';
  text += tmpl.body;
  if (const auto pos = text.find(kContextPlaceholder); pos != std::string::npos) {
    text.replace(pos, kContextPlaceholder.size(), context);
  }
  return text;
}

inline void append_frames(std::vector<std::string>& out, const FrameWindow& window) {
  for (const auto& f : window.frames) out.push_back(f.uri);
}

inline RenderedPrompt finish(std::string text, std::vector<std::string> attachments) {
  auto digest = prompt_digest(text, attachments);
  return RenderedPrompt{std::move(text), std::move(attachments), std::move(digest)};
}

}  // namespace detail

inline RenderedPrompt render_init(const PromptTemplate& tmpl, const FrameWindow& window) {
  if (tmpl.kind != TemplateKind::kInit) {
    throw InvalidArgument("prompting: '" + tmpl.id + "' is not an init template");
  }
  if (window.frames.empty()) throw InvalidArgument("prompting: init window has no frames");
  std::vector<std::string> attachments;
  detail::append_frames(attachments, window);
  return detail::finish(detail::compose(tmpl, {}), std::move(attachments));
}

/// Numbered lines, oldest first; "none" when there is no history.
inline std::string format_history(const std::vector<std::string>& history) {
  if (history.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += '\n';
    out += std::to_string(i + 1) + ". " + history[i];
  }
  return out;
}

inline RenderedPrompt render_decision(const PromptTemplate& tmpl,
                                      const std::vector<std::string>& history,
                                      const std::vector<Demonstration>& demos,
                                      const FrameWindow& window) {
  if (tmpl.kind != TemplateKind::kDecision) {
    throw InvalidArgument("prompting: '" + tmpl.id + "' is not a decision template");
  }
  std::string text;
  std::vector<std::string> attachments;
  if (!demos.empty()) {
    text += "Examples:\n";
    for (std::size_t i = 0; i < demos.size(); ++i) {
      const auto first = attachments.size() + 1;
      detail::append_frames(attachments, demos[i].frames);
      const auto last = attachments.size();
      text += "Example " + std::to_string(i + 1) + " ";
      text += first == last ? "[image " + std::to_string(first) + "]"
                            : "[images " + std::to_string(first) + "-" + std::to_string(last) + "]";
      text += ": " + demos[i].utterance_text + "\n";
    }
    text += '\n';
  }
  text += detail::compose(tmpl, format_history(history));
  detail::append_frames(attachments, window);
  return detail::finish(std::move(text), std::move(attachments));
}

// Templates shipped with the library, verbatim.
namespace templates {

inline const std::vector<PromptTemplate>& builtin() {
  static const std::vector<PromptTemplate> kAll = {
      {"race-en", Language::kEnglish, TemplateKind::kInit,
       "You will be provided with a video clip that represents the start of a race. Your task is "
       "to generate one sentence of commentary.\n"
       "1) You should identify the number of players and their names, along with cars.\n"
       "2) Ignore the background information and refrain from describing the scenery.\n"
       "3) Initial information about the game without being too verbose.",
       "You are a professional commentator for car racing games."},
      {"race-ja", Language::kJapanese, TemplateKind::kInit,
       "これからレース開始時のビデオクリップが提示されます。\n"
       "それに対して1文の日本語実況を生成してください。\n"
       "冗長になりすぎず、レースの初期情報を伝えてください。人名や車種には言及せず「プレイヤー」"
       "や車の色を使って説明してください．",
       "あなたはカーレースのプロの実況者です。"},
      {"fight-ja", Language::kJapanese, TemplateKind::kInit,
       "これから対戦開始時のビデオクリップが提示されます。\n"
       "このシーンを1文で説明する日本語の実況を生成し視聴者を楽しませてください。\n"
       "観客が没入できるよう驚きや感嘆句も含めてエキサイティングな実況となるよう心がけてください。"
       "話すべきことがなければ <WAIT> を出力してください。",
       "あなたは大乱闘スマッシュブラザーズのプロの実況者です。"},
      {"race-en", Language::kEnglish, TemplateKind::kDecision,
       "You are provided with a video clip from an ongoing car racing game and commentary "
       "generated for the game so far.\n"
       "Previous generated Commentary: {context}\n"
       "Your task is to compare the given video with the previously generated commentary.\n"
       "1) Identify if the video has any new development as compared to the already provided "
       "commentary.\n"
       "2) Ignore the background information and refrain from describing the scenery too much.\n"
       "3) If the state of the game as compared to the provided commentary has not changed, then "
       "generate <WAIT>\n"
       "4) If there are new developments in the provided video, then generate 1 - 2 lines of "
       "commentary to describe it.",
       "You are a professional commentator for car racing games."},
      {"race-ja", Language::kJapanese, TemplateKind::kDecision,
       "以下に示すのは現在進行中のレースのビデオクリップと、これまでに生成された実況です。\n"
       "これまでの実況: {context}\n"
       "以下のルールに従って日本語実況を1〜2文生成してください：\n"
       "1) 新たな展開があるかどうかを特定してください。\n"
       "2) 背景や風景の描写は避けてください\n"
       "3) 変化がある場合は、それを説明する1文の実況を生成してください。\n"
       "4) 人名や車種には言及せず「プレイヤー」や車の色を使って説明してください．",
       "あなたはカーレースのプロの実況者です。"},
      // Shipped as published, including its racing wording.
      {"fight-ja", Language::kJapanese, TemplateKind::kDecision,
       "以下に示すのは現在進行中のレースのビデオクリップと、これまでに生成された実況です。\n"
       "これまでの実況: {context}\n"
       "ビデオに新たな展開があるかどうかを比較・分析し、以下のルールに従って日本語実況を生成して"
       "ください：\n"
       "1) 新たな展開があるかどうかを特定してください。\n"
       "2) 状況に変化がなければ <WAIT> を出力してください。\n"
       "3) 明確な変化があれば、それを説明する1文の実況を生成してください。\n"
       "4) 人名や車種には言及せず「プレイヤー」や車の色を使って説明してください",
       "あなたはカーレースのプロの実況者です。"},
  };
  return kAll;
}

inline const PromptTemplate& find(std::string_view id, TemplateKind kind) {
  for (const auto& t : builtin()) {
    if (t.id == id && t.kind == kind) return t;
  }
  throw InvalidArgument("prompting: no built-in " +
                        std::string(kind == TemplateKind::kInit ? "init" : "decision") +
                        " template '" + std::string(id) + "'");
}

}  // namespace templates

/// Template file: `id:`, `language:`, `kind:` header lines, then the body.
inline PromptTemplate parse_template(std::istream& in, const std::string& source = "<stream>") {
  PromptTemplate tmpl;
  const char* keys[] = {"id:", "language:", "kind:"};
  std::string line;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError("prompting: " + source + ": truncated template header");
    }
    detail::strip_cr(line);
    if (line.rfind(keys[i], 0) != 0) {
      throw ParseError("prompting: " + source + ":" + std::to_string(i + 1) + ": expected '" +
                       keys[i] + "'");
    }
    const auto value = std::string(detail::trim(std::string_view(line).substr(std::strlen(keys[i]))));
    if (i == 0) {
      tmpl.id = value;
    } else if (i == 1) {
      tmpl.language = parse_language(value);
    } else if (value == "init") {
      tmpl.kind = TemplateKind::kInit;
    } else if (value == "decision") {
      tmpl.kind = TemplateKind::kDecision;
    } else {
      throw ParseError("prompting: " + source + ":3: kind must be init or decision");
    }
  }
  std::ostringstream body;
  body << in.rdbuf();
  tmpl.body = body.str();
  while (!tmpl.body.empty() && (tmpl.body.back() == '\n' || tmpl.body.back() == '\r')) {
    tmpl.body.pop_back();
  }
  tmpl.validate();
  return tmpl;
}

inline PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("prompting: cannot open template '" + path.string() + "'");
  return parse_template(in, path.string());
}

/// Demonstration file: `uri<TAB>utterance_text` per line.
inline std::vector<Demonstration> parse_demonstrations(std::istream& in,
                                                       const std::string& source = "<stream>") {
  std::vector<Demonstration> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    const auto uri = tab == std::string::npos ? std::string_view{} : detail::trim(std::string_view(line).substr(0, tab));
    const auto text = tab == std::string::npos ? std::string_view{} : detail::trim(std::string_view(line).substr(tab + 1));
    if (uri.empty() || text.empty()) {
      throw ParseError("prompting: " + source + ":" + std::to_string(line_no) +
                       ": expected '<uri><TAB><utterance>'");
    }
    FrameWindow window{{FrameRef{"demo", out.size(), std::string(uri)}}, Seconds(0), Seconds(0)};
    out.push_back(Demonstration{std::move(window), std::string(text)});
  }
  return out;
}

inline std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("prompting: cannot open demonstrations '" + path.string() + "'");
  return parse_demonstrations(in, path.string());
}

/// Uniform sample of `k` demonstrations (all of them when the pool is smaller),
/// in pool order.
inline std::vector<Demonstration> sample_demonstrations(const std::vector<Demonstration>& pool,
                                                        std::size_t k, std::uint64_t seed) {
  std::vector<Demonstration> out;
  std::mt19937_64 rng(seed);
  std::sample(pool.begin(), pool.end(), std::back_inserter(out), k, rng);
  return out;
}

enum class ResponseNote { kNone, kEmptyResponseWait, kMixedWaitText };

inline std::string_view to_string(ResponseNote note) {
  switch (note) {
    case ResponseNote::kEmptyResponseWait: return "empty-response-wait";
    case ResponseNote::kMixedWaitText: return "mixed-wait-text";
    case ResponseNote::kNone: break;
  }
  return "";
}

/// A backend reply classified as silence or speech. Turning speech into an
/// Utterance needs its decision time and duration, which the session supplies.
struct ParsedResponse {
  bool wait = true;
  std::string text;  // normalized utterance when !wait
  ResponseNote note = ResponseNote::kNone;
};

namespace detail {

// Punctuation and symbol blocks that never carry content on their own.
inline bool is_markup_code_point(char32_t cp) {
  if (cp < 0x80) {
    const auto c = static_cast<char>(cp);
    return !((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
  }
  return (cp >= 0x2000 && cp <= 0x206F) ||  // general punctuation
         (cp >= 0x3000 && cp <= 0x303F) ||  // CJK symbols and punctuation
         (cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) ||
         (cp >= 0xFF3B && cp <= 0xFF40) || (cp >= 0xFF5B && cp <= 0xFF65) ||
         cp == 0x00A0 || cp == 0x00AB || cp == 0x00BB || cp == 0x30FB || cp == 0xFFFD;
}

inline std::vector<std::string> content_tokens(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t at = i;
    const char32_t cp = text::next_code_point(s, i);
    if (text::is_space(cp) || is_markup_code_point(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.append(s.substr(at, i - at));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// Runs of whitespace that contain a line break become one space.
inline std::string collapse_newlines(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_ascii_space(s[i])) {
      std::size_t j = i;
      bool newline = false;
      for (; j < s.size() && is_ascii_space(s[j]); ++j) newline |= s[j] == '\n' || s[j] == '\r';
      if (newline) {
        out += ' ';
      } else {
        out.append(s.substr(i, j - i));
      }
      i = j;
    } else {
      out += s[i++];
    }
  }
  return out;
}

}  // namespace detail

/// Silence iff, ignoring case, whitespace and punctuation or markup, the only
/// content left is the WAIT token. Replies mixing WAIT with commentary speak.
inline ParsedResponse parse_response(std::string_view raw, Language /*language*/) {
  const auto trimmed = detail::trim(raw);
  if (trimmed.empty()) return {true, {}, ResponseNote::kEmptyResponseWait};
  const auto tokens = detail::content_tokens(trimmed);
  const auto is_wait = [](const std::string& t) { return detail::iequals_ascii(t, "wait"); };
  if (tokens.empty()) {
    // Pure punctuation: nothing to say.
    return {true, {}, ResponseNote::kEmptyResponseWait};
  }
  if (std::all_of(tokens.begin(), tokens.end(), is_wait)) return {true, {}, ResponseNote::kNone};
  ParsedResponse out{false, detail::collapse_newlines(trimmed), ResponseNote::kNone};
  if (std::any_of(tokens.begin(), tokens.end(), is_wait)) out.note = ResponseNote::kMixedWaitText;
  return out;
}

}  // namespace commentary

#endif  // COMMENTARY_PROMPTING_HPP
