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

#ifndef COMMENTARY_MEDIA_HPP
#define COMMENTARY_MEDIA_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "commentary/core.hpp"

namespace commentary {

class ManifestError : public Error {
 public:
  explicit ManifestError(const std::string& what, std::optional<std::size_t> second = {})
      : Error("media: " + what), second_(second) {}
  /// The offending second, when the failure concerns one.
  std::optional<std::size_t> second() const { return second_; }

 private:
  std::optional<std::size_t> second_;
};

struct FrameRef {
  std::string video_id;
  std::size_t second = 0;
  std::string uri;
  friend bool operator==(const FrameRef&, const FrameRef&) = default;
};

/// Pre-extracted 1 fps frames of one video, one per integer second in
/// [0, ceil(duration)).
class FrameStore {
 public:
  FrameStore(std::string video_id, Seconds duration, std::vector<FrameRef> frames)
      : video_id_(std::move(video_id)), duration_(duration), frames_(std::move(frames)) {
    if (frames_.size() != timeline_length(duration_)) {
      throw ManifestError("video '" + video_id_ + "' needs " +
                          std::to_string(timeline_length(duration_)) + " frames, got " +
                          std::to_string(frames_.size()));
    }
    for (std::size_t s = 0; s < frames_.size(); ++s) {
      if (frames_[s].second != s) throw ManifestError("frames out of order", s);
    }
  }

  const std::string& video_id() const { return video_id_; }
  Seconds video_duration() const { return duration_; }
  std::size_t size() const { return frames_.size(); }
  const FrameRef& at(std::size_t second) const { return frames_.at(second); }
  const std::vector<FrameRef>& frames() const { return frames_; }

 private:
  std::string video_id_;
  Seconds duration_;
  std::vector<FrameRef> frames_;
};

struct FrameWindow {
  std::vector<FrameRef> frames;
  Seconds window_start;
  Seconds window_end;
  friend bool operator==(const FrameWindow&, const FrameWindow&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> parse_index(std::string_view s) {
  s = trim(s);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads a manifest: `#video_id<TAB>id<TAB>duration<TAB>seconds` on line 1,
/// then `second<TAB>uri` records covering every second contiguously.
inline FrameStore parse_manifest(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ManifestError(source + ": empty manifest");
  detail::strip_cr(line);
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = detail::split_tabs(line);
  if (header.size() != 4 || header[0] != "#video_id" || header[2] != "duration") {
    throw ManifestError(source + ": line 1 must be '#video_id<TAB><id><TAB>duration<TAB><seconds>'");
  }
  const auto duration = detail::parse_double(header[3]);
  if (!duration || !std::isfinite(*duration) || *duration < 0.0) {
    throw ManifestError(source + ": invalid duration '" + std::string(header[3]) + "'");
  }
  const std::string video_id(header[1]);
  if (video_id.empty()) throw ManifestError(source + ": empty video id");

  const std::size_t n = timeline_length(Seconds(*duration));
  std::vector<std::optional<std::string>> uris(n);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_tabs(line);
    const auto second = fields.size() == 2 ? detail::parse_index(fields[0]) : std::nullopt;
    if (!second || detail::trim(fields[1]).empty()) {
      throw ManifestError(source + ":" + std::to_string(line_no) +
                          ": expected '<second><TAB><uri>'");
    }
    if (*second >= n) {
      throw ManifestError(source + ":" + std::to_string(line_no) + ": second " +
                              std::to_string(*second) + " is past the end of the video",
                          *second);
    }
    if (uris[*second]) {
      throw ManifestError(source + ":" + std::to_string(line_no) + ": duplicate second " +
                              std::to_string(*second),
                          *second);
    }
    uris[*second] = std::string(detail::trim(fields[1]));
  }

  std::vector<FrameRef> frames;
  frames.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (!uris[s]) throw ManifestError(source + ": no frame for second " + std::to_string(s), s);
    frames.push_back(FrameRef{video_id, s, std::move(*uris[s])});
  }
  return FrameStore(video_id, Seconds(*duration), std::move(frames));
}

inline FrameStore load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest '" + path.string() + "'");
  return parse_manifest(in, path.string());
}

/// Frames with t_a <= second < t_b, ascending, newest `cap` retained. When no
/// whole second falls in the range (including t_a == t_b) the window holds the
/// current frame, floor(t_b), clamped to the last frame of the video.
inline FrameWindow frames_between(const FrameStore& store, Seconds t_a, Seconds t_b,
                                  std::size_t cap) {
  if (cap == 0) throw InvalidArgument("media: window cap must be positive");
  if (t_a > t_b || t_b > store.video_duration()) {
    throw InvalidArgument("media: window [" + std::to_string(t_a.value()) + ", " +
                          std::to_string(t_b.value()) + ") outside video '" + store.video_id() +
                          "' of " + std::to_string(store.video_duration().value()) + " s");
  }
  FrameWindow window{{}, t_a, t_b};
  const std::size_t n = store.size();
  if (n == 0) return window;

  const auto first = static_cast<std::size_t>(std::ceil(t_a.value()));
  const auto last = std::min(n, static_cast<std::size_t>(std::ceil(t_b.value())));  // exclusive
  if (first >= last) {
    window.frames.push_back(store.at(std::min(static_cast<std::size_t>(std::floor(t_b.value())), n - 1)));
    return window;
  }
  const std::size_t begin = last - first > cap ? last - cap : first;
  window.frames.assign(store.frames().begin() + static_cast<std::ptrdiff_t>(begin),
                       store.frames().begin() + static_cast<std::ptrdiff_t>(last));
  return window;
}

}  // namespace commentary

#endif  // COMMENTARY_MEDIA_HPP
