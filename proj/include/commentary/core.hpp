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

#ifndef COMMENTARY_CORE_HPP
#define COMMENTARY_CORE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "commentary/error.hpp"

namespace commentary {

/// A non-negative, finite point or span on the video timeline.
class Seconds {
 public:
  constexpr Seconds() = default;
  explicit Seconds(double value) : value_(value) {
    if (!std::isfinite(value) || value < 0.0) {
      throw InvalidArgument("core: seconds must be finite and non-negative, got " +
                            std::to_string(value));
    }
  }

  constexpr double value() const { return value_; }

  friend constexpr auto operator<=>(Seconds, Seconds) = default;
  friend Seconds operator+(Seconds a, Seconds b) { return Seconds(a.value_ + b.value_); }

 private:
  double value_ = 0.0;
};

enum class Language { kEnglish, kJapanese };

inline std::string_view to_string(Language language) {
  return language == Language::kEnglish ? "en" : "ja";
}

inline Language parse_language(std::string_view tag) {
  if (tag == "en") return Language::kEnglish;
  if (tag == "ja" || tag == "jp") return Language::kJapanese;
  throw InvalidArgument("core: unknown language tag '" + std::string(tag) + "'");
}

inline constexpr std::string_view kWaitToken = "<WAIT>";

namespace detail {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool iequals_ascii(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? char(c - 'A' + 'a') : c; };
    return lower(x) == lower(y);
  });
}

}  // namespace detail

/// One spoken (or subtitled) line of commentary.
class Utterance {
 public:
  Utterance(std::string text, Language language, Seconds start, Seconds est_duration)
      : text_(std::move(text)), language_(language), start_(start), est_duration_(est_duration) {
    auto trimmed = detail::trim(text_);
    if (trimmed.empty()) throw InvalidArgument("core: utterance text is empty");
    if (detail::iequals_ascii(trimmed, kWaitToken)) {
      throw InvalidArgument("core: utterance text is the WAIT token");
    }
    if (est_duration_.value() <= 0.0) {
      throw InvalidArgument("core: utterance duration must be positive");
    }
  }

  const std::string& text() const { return text_; }
  Language language() const { return language_; }
  Seconds start() const { return start_; }
  Seconds est_duration() const { return est_duration_; }

  friend bool operator==(const Utterance&, const Utterance&) = default;

 private:
  std::string text_;
  Language language_;
  Seconds start_;
  Seconds est_duration_;
};

/// Display window [start, start + est_duration).
inline std::pair<Seconds, Seconds> utterance_interval(const Utterance& u) {
  return {u.start(), u.start() + u.est_duration()};
}

struct Speak {
  Utterance utterance;
  friend bool operator==(const Speak&, const Speak&) = default;
};

struct Wait {
  friend bool operator==(const Wait&, const Wait&) = default;
};

using DecisionOutcome = std::variant<Speak, Wait>;

inline bool is_speak(const DecisionOutcome& outcome) {
  return std::holds_alternative<Speak>(outcome);
}

/// Ordered utterances of one video. Start times are strictly increasing and
/// never past the end of the video.
class CommentaryTrack {
 public:
  CommentaryTrack(std::string video_id, Seconds video_duration)
      : video_id_(std::move(video_id)), video_duration_(video_duration) {}

  CommentaryTrack(std::string video_id, Seconds video_duration, std::vector<Utterance> utterances)
      : CommentaryTrack(std::move(video_id), video_duration) {
    utterances_.reserve(utterances.size());
    for (auto& u : utterances) append(std::move(u));
  }

  void append(Utterance u) {
    if (u.start() > video_duration_) {
      throw InvalidArgument("core: utterance at " + std::to_string(u.start().value()) +
                            " s starts after the end of video '" + video_id_ + "'");
    }
    if (!utterances_.empty() && u.start() <= utterances_.back().start()) {
      throw InvalidArgument("core: utterance start times must be strictly increasing (" +
                            std::to_string(u.start().value()) + " s after " +
                            std::to_string(utterances_.back().start().value()) + " s)");
    }
    utterances_.push_back(std::move(u));
  }

  const std::string& video_id() const { return video_id_; }
  Seconds video_duration() const { return video_duration_; }
  const std::vector<Utterance>& utterances() const { return utterances_; }
  bool empty() const { return utterances_.empty(); }

  friend bool operator==(const CommentaryTrack&, const CommentaryTrack&) = default;

 private:
  std::string video_id_;
  Seconds video_duration_;
  std::vector<Utterance> utterances_;
};

/// Language of a track, taken from its first utterance.
inline Language track_language(const CommentaryTrack& track,
                               Language fallback = Language::kEnglish) {
  return track.empty() ? fallback : track.utterances().front().language();
}

inline std::size_t timeline_length(Seconds duration) {
  return static_cast<std::size_t>(std::ceil(duration.value()));
}

/// Per-second speaking flags; element s covers [s, s+1).
using SpeakingTimeline = std::vector<bool>;

// A second counts as speaking only when the utterance interval overlaps it
// with nonzero measure; touching its boundary is not enough.
inline SpeakingTimeline speaking_timeline(const CommentaryTrack& track) {
  const std::size_t n = timeline_length(track.video_duration());
  SpeakingTimeline timeline(n, false);
  for (const auto& u : track.utterances()) {
    const double a = u.start().value();
    const double b = a + u.est_duration().value();
    const auto first = static_cast<std::size_t>(std::floor(a));
    const auto last = static_cast<std::size_t>(std::ceil(b));  // exclusive
    for (std::size_t s = first; s < std::min(last, n); ++s) {
      if (a < double(s) + 1.0 && b > double(s)) timeline[s] = true;
    }
  }
  return timeline;
}

/// Time source for a session. now() never decreases.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Seconds now() const = 0;
  virtual void advance_to(Seconds t) = 0;
};

/// Jumps instantly; used for offline and deterministic runs.
class SimulatedClock final : public Clock {
 public:
  Seconds now() const override { return now_; }
  void advance_to(Seconds t) override { now_ = std::max(now_, t); }

 private:
  Seconds now_;
};

/// Follows a steady clock started at construction; advance_to sleeps.
class WallClock final : public Clock {
 public:
  WallClock() : origin_(std::chrono::steady_clock::now()) {}

  Seconds now() const override {
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - origin_;
    return Seconds(std::max(0.0, elapsed.count()));
  }

  void advance_to(Seconds t) override {
    std::this_thread::sleep_until(
        origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                      std::chrono::duration<double>(t.value())));
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace commentary

#endif  // COMMENTARY_CORE_HPP
