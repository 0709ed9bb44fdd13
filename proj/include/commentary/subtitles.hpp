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

#ifndef COMMENTARY_SUBTITLES_HPP
#define COMMENTARY_SUBTITLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "commentary/core.hpp"
#include "commentary/media.hpp"

namespace commentary {

struct SrtEntry {
  std::size_t index = 1;
  Seconds start;
  Seconds end;
  std::string text;

  void validate() const {
    if (!(start < end)) throw InvalidArgument("subtitles: entry " + std::to_string(index) + " ends before it starts");
    if (detail::trim(text).empty()) throw InvalidArgument("subtitles: entry " + std::to_string(index) + " has no text");
  }
  friend bool operator==(const SrtEntry&, const SrtEntry&) = default;
};

inline std::int64_t to_millis(Seconds t) { return std::llround(t.value() * 1000.0); }

/// HH:MM:SS,mmm
inline std::string format_srt_time(Seconds t) {
  const std::int64_t ms = to_millis(t);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld,%03lld", static_cast<long long>(ms / 3600000),
                static_cast<long long>(ms / 60000 % 60), static_cast<long long>(ms / 1000 % 60),
                static_cast<long long>(ms % 1000));
  return buf;
}

inline std::vector<SrtEntry> srt_entries(const CommentaryTrack& track) {
  std::vector<SrtEntry> entries;
  entries.reserve(track.utterances().size());
  for (const auto& u : track.utterances()) {
    const auto [start, end] = utterance_interval(u);
    entries.push_back(SrtEntry{entries.size() + 1, start, end, u.text()});
  }
  return entries;
}

inline std::string to_srt(const std::vector<SrtEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out += '\n';
    std::string text = e.text;
    std::replace(text.begin(), text.end(), '\n', ' ');
    text.erase(std::remove(text.begin(), text.end(), '\r'), text.end());
    out += std::to_string(e.index) + '\n' + format_srt_time(e.start) + " --> " +
           format_srt_time(e.end) + '\n' + text + '\n';
  }
  return out;
}

inline std::string to_srt(const CommentaryTrack& track) { return to_srt(srt_entries(track)); }

namespace detail {

// Accepts "," or "." before the fraction and 1 to 3 fraction digits.
inline std::optional<Seconds> parse_srt_time(const std::string& s) {
  static const std::regex kTime(R"(^\s*(\d+):(\d{1,2}):(\d{1,2})(?:[,.](\d{1,3}))?\s*$)");
  std::smatch m;
  if (!std::regex_match(s, m, kTime)) return std::nullopt;
  double fraction = 0.0;
  if (m[4].matched) fraction = std::stod(m[4].str()) / std::pow(10.0, double(m[4].length()));
  const double minutes = std::stod(m[2].str());
  const double seconds = std::stod(m[3].str());
  if (minutes >= 60 || seconds >= 60) return std::nullopt;
  const double total_ms =
      std::round((std::stod(m[1].str()) * 3600 + minutes * 60 + seconds + fraction) * 1000.0);
  return Seconds(total_ms / 1000.0);
}

}  // namespace detail

/// Lenient reader: CRLF, a leading BOM, dot fraction separators and missing
/// index lines are accepted. Index jumps are reported through `warnings`.
inline std::vector<SrtEntry> parse_srt(std::string_view input,
                                       std::vector<std::string>* warnings = nullptr) {
  if (input.substr(0, 3) == "\xEF\xBB\xBF") input.remove_prefix(3);
  std::vector<std::string> lines;
  {
    std::string s(input);
    std::istringstream in(s);
    std::string line;
    while (std::getline(in, line)) {
      detail::strip_cr(line);
      lines.push_back(std::move(line));
    }
  }
  const auto warn = [&](std::string msg) {
    if (warnings) warnings->push_back("subtitles: " + std::move(msg));
  };

  std::vector<SrtEntry> entries;
  std::size_t i = 0;
  std::size_t expected_index = 1;
  while (i < lines.size()) {
    if (detail::trim(lines[i]).empty()) {
      ++i;
      continue;
    }
    std::size_t index = expected_index;
    if (lines[i].find("-->") == std::string::npos) {
      const auto parsed = detail::parse_index(lines[i]);
      if (!parsed) {
        throw ParseError("subtitles: line " + std::to_string(i + 1) + ": expected entry index, got '" +
                         lines[i] + "'");
      }
      index = *parsed;
      ++i;
    }
    if (index != expected_index) {
      warn("entry index " + std::to_string(index) + " at line " + std::to_string(i) +
           " breaks the sequence (expected " + std::to_string(expected_index) + ")");
    }
    expected_index = index + 1;

    const std::size_t ts_line = i + 1;
    if (i >= lines.size()) {
      throw ParseError("subtitles: entry " + std::to_string(index) + " (line " +
                       std::to_string(ts_line) + "): missing timestamp line");
    }
    const auto arrow = lines[i].find("-->");
    std::optional<Seconds> start, end;
    if (arrow != std::string::npos) {
      start = detail::parse_srt_time(lines[i].substr(0, arrow));
      // Anything after the end time (position hints) is ignored.
      std::string rest = lines[i].substr(arrow + 3);
      const auto first = rest.find_first_not_of(" \t");
      const auto stop = first == std::string::npos ? first : rest.find_first_of(" \t", first);
      end = detail::parse_srt_time(first == std::string::npos ? "" : rest.substr(first, stop - first));
    }
    if (!start || !end) {
      throw ParseError("subtitles: entry " + std::to_string(index) + " (line " +
                       std::to_string(ts_line) + "): malformed timestamp line '" + lines[i] + "'");
    }
    ++i;
    std::string text;
    for (; i < lines.size() && !detail::trim(lines[i]).empty(); ++i) {
      if (!text.empty()) text += ' ';
      text += detail::trim(lines[i]);
    }
    if (text.empty()) {
      warn("entry " + std::to_string(index) + " (line " + std::to_string(ts_line) + ") has no text; skipped");
      continue;
    }
    if (!(*start < *end)) {
      throw ParseError("subtitles: entry " + std::to_string(index) + " (line " +
                       std::to_string(ts_line) + "): end time is not after start time");
    }
    entries.push_back(SrtEntry{index, *start, *end, std::move(text)});
  }
  return entries;
}

/// Fraction of adjacent pairs (by start time) whose display intervals overlap.
inline double overlap_proportion(std::vector<SrtEntry> entries) {
  if (entries.size() < 2) return 0.0;
  std::stable_sort(entries.begin(), entries.end(),
                   [](const SrtEntry& a, const SrtEntry& b) { return a.start < b.start; });
  std::size_t overlapping = 0;
  for (std::size_t i = 0; i + 1 < entries.size(); ++i) {
    if (entries[i].end > entries[i + 1].start) ++overlapping;
  }
  return static_cast<double>(overlapping) / static_cast<double>(entries.size() - 1);
}

/// Rebuilds a track from subtitle entries; each entry's display time becomes
/// the utterance duration.
inline CommentaryTrack track_from_srt(const std::vector<SrtEntry>& entries, std::string video_id,
                                      Seconds video_duration, Language language) {
  CommentaryTrack track(std::move(video_id), video_duration);
  for (const auto& e : entries) {
    track.append(Utterance(e.text, language, e.start, Seconds(e.end.value() - e.start.value())));
  }
  return track;
}

}  // namespace commentary

#endif  // COMMENTARY_SUBTITLES_HPP
