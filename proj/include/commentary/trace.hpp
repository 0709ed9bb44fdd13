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

#ifndef COMMENTARY_TRACE_HPP
#define COMMENTARY_TRACE_HPP

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "commentary/strategies.hpp"

namespace commentary {

// Line-oriented session trace: a `#key<TAB>value` header, then one line per
// step: index, time, digest, SPEAK|WAIT, text (the raw reply for WAIT).
// `#note<TAB>index<TAB>flag` lines follow steps whose reply was flagged.

inline constexpr std::string_view kTraceMagic = "#commentary-trace";

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string serialize_trace(const GenerationRecord& record) {
  const auto& c = record.config;
  std::string out;
  const auto header = [&](std::string_view key, const std::string& value) {
    out += '#';
    out += key;
    out += '\t' + value + '\n';
  };
  out += std::string(kTraceMagic) + "\t1\n";
  header("video_id", record.video_id);
  header("video_duration", format_number(record.track.video_duration().value()));
  header("strategy", std::string(to_string(c.kind)));
  header("step", format_number(c.step.value()));
  header("window_cap", std::to_string(c.window_cap));
  header("icl_shots", std::to_string(c.icl_shots));
  header("max_history", c.max_history ? std::to_string(*c.max_history) : "unlimited");
  header("language", std::string(to_string(c.language)));
  header("rate_model", c.rate_model.to_spec());
  header("status", record.complete ? "complete" : "incomplete");
  if (!record.complete) header("failure", detail::escape_field(record.failure));
  header("columns", "index\ttime\tdigest\toutcome\ttext");
  for (const auto& step : record.steps) {
    const auto* speak = std::get_if<Speak>(&step.outcome);
    out += std::to_string(step.point.index) + '\t' + format_number(step.point.time.value()) + '\t' +
           step.digest + '\t' + (speak ? "SPEAK" : "WAIT") + '\t' +
           detail::escape_field(speak ? speak->utterance.text() : step.raw_response) + '\n';
    if (step.note != ResponseNote::kNone) {
      out += "#note\t" + std::to_string(step.point.index) + '\t' + std::string(to_string(step.note)) + '\n';
    }
  }
  return out;
}

struct TraceStep {
  std::size_t index = 0;
  Seconds time;
  std::string digest;
  bool speak = false;
  std::string text;
  std::string note;
};

struct Trace {
  std::string video_id;
  Seconds video_duration;
  StrategyConfig config;
  bool complete = true;
  std::string failure;
  std::vector<TraceStep> steps;

  /// Speak steps as a track, durations re-estimated from the rate model.
  CommentaryTrack track() const {
    CommentaryTrack track(video_id, video_duration);
    for (const auto& s : steps) {
      if (!s.speak) continue;
      track.append(Utterance(s.text, config.language, s.time,
                             estimate_duration(s.text, config.language, config.rate_model)));
    }
    return track;
  }
};

inline Trace parse_trace(std::istream& in, const std::string& source = "<stream>") {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) -> ParseError {
    return ParseError("cli: " + source + ":" + std::to_string(line_no) + ": " + what);
  };
  bool magic = false;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (line.front() == '#') {
      const std::string_view key = f[0].substr(1);
      const std::string value = f.size() > 1 ? std::string(f[1]) : "";
      if (f[0] == kTraceMagic) {
        magic = true;
      } else if (key == "video_id") {
        trace.video_id = value;
      } else if (key == "video_duration" || key == "step") {
        const auto v = detail::parse_double(value);
        if (!v || *v < 0) throw fail("bad " + std::string(key));
        (key == "step" ? trace.config.step : trace.video_duration) = Seconds(*v);
      } else if (key == "strategy") {
        trace.config.kind = parse_strategy(value);
      } else if (key == "window_cap" || key == "icl_shots") {
        const auto v = detail::parse_index(value);
        if (!v) throw fail("bad " + std::string(key));
        (key == "window_cap" ? trace.config.window_cap : trace.config.icl_shots) = *v;
      } else if (key == "max_history") {
        if (value != "unlimited") {
          const auto v = detail::parse_index(value);
          if (!v) throw fail("bad max_history");
          trace.config.max_history = *v;
        }
      } else if (key == "language") {
        trace.config.language = parse_language(value);
      } else if (key == "rate_model") {
        trace.config.rate_model = SpeechRateModel::parse(value);
      } else if (key == "status") {
        trace.complete = value == "complete";
      } else if (key == "failure") {
        trace.failure = detail::unescape_field(value);
      } else if (key == "note") {
        const auto index = detail::parse_index(value);
        if (!index || f.size() < 3) throw fail("bad note");
        for (auto& s : trace.steps) {
          if (s.index == *index) s.note = std::string(f[2]);
        }
      }
      continue;
    }
    if (!magic) throw fail("not a commentary trace");
    if (f.size() != 5) throw fail("expected 5 tab-separated fields");
    const auto index = detail::parse_index(f[0]);
    const auto time = detail::parse_double(f[1]);
    if (!index || !time || *time < 0 || (f[3] != "SPEAK" && f[3] != "WAIT")) throw fail("malformed step");
    trace.steps.push_back(TraceStep{*index, Seconds(*time), std::string(f[2]), f[3] == "SPEAK",
                                    detail::unescape_field(f[4]), {}});
  }
  if (!magic) throw ParseError("cli: " + source + ": not a commentary trace");
  return trace;
}

inline Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cli: cannot open trace '" + path.string() + "'");
  return parse_trace(in, path.string());
}

}  // namespace commentary

#endif  // COMMENTARY_TRACE_HPP
