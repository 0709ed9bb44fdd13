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

#ifndef COMMENTARY_EVAL_HPP
#define COMMENTARY_EVAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "commentary/backend.hpp"
#include "commentary/core.hpp"
#include "commentary/strategies.hpp"
#include "commentary/subtitles.hpp"
#include "commentary/text.hpp"

namespace commentary {

/// Human commentary with timestamps; same invariants as a generated track.
using ReferenceTrack = CommentaryTrack;

inline constexpr std::size_t kSimilarityBins = 10;

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  /// Higher is more similar; score(x, x) is the maximum for non-empty x.
  virtual double score(std::string_view candidate, std::string_view reference) const = 0;
  virtual std::string name() const = 0;
};

/// Unit-overlap F1 in [0, 1] (bag of words for English, characters for
/// Japanese).
class TokenF1Scorer final : public SimilarityScorer {
 public:
  explicit TokenF1Scorer(Language language = Language::kEnglish) : unit_(text::default_unit(language)) {}

  double score(std::string_view candidate, std::string_view reference) const override {
    const auto c = text::units(candidate, unit_);
    const auto r = text::units(reference, unit_);
    if (c.empty() || r.empty()) return 0.0;
    std::map<std::string_view, long> counts;
    for (auto u : r) ++counts[u];
    long common = 0;
    for (auto u : c) {
      if (auto it = counts.find(u); it != counts.end() && it->second > 0) {
        --it->second;
        ++common;
      }
    }
    if (common == 0) return 0.0;
    const double p = double(common) / double(c.size());
    const double rc = double(common) / double(r.size());
    return 2 * p * rc / (p + rc);
  }

  std::string name() const override { return "token-f1"; }

 private:
  UnitKind unit_;
};

class ExactMatchScorer final : public SimilarityScorer {
 public:
  double score(std::string_view candidate, std::string_view reference) const override {
    candidate = detail::trim(candidate);
    return !candidate.empty() && candidate == detail::trim(reference) ? 1.0 : 0.0;
  }
  std::string name() const override { return "exact"; }
};

/// Cosine similarity of embeddings from an `/embeddings` endpoint.
class EmbeddingScorer final : public SimilarityScorer {
 public:
  explicit EmbeddingScorer(RemoteConfig config) : http_(std::move(config)) {}

  double score(std::string_view candidate, std::string_view reference) const override {
    if (detail::trim(candidate).empty() || detail::trim(reference).empty()) return 0.0;
    const nlohmann::json body = {{"model", http_.config().model},
                                 {"input", {std::string(candidate), std::string(reference)}}};
    const auto reply = http_.post("/embeddings", body);
    try {
      const auto a = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
      const auto b = reply.at("data").at(1).at("embedding").get<std::vector<double>>();
      if (a.size() != b.size() || a.empty()) {
        throw BackendError(BackendError::Kind::kProtocol, "embedding sizes differ");
      }
      const double dot = std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
      const double na = std::sqrt(std::inner_product(a.begin(), a.end(), a.begin(), 0.0));
      const double nb = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
      return na == 0 || nb == 0 ? 0.0 : dot / (na * nb);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(BackendError::Kind::kProtocol, std::string("unexpected embeddings reply: ") + e.what());
    }
  }

  std::string name() const override { return "embedding"; }

 private:
  JsonHttpClient http_;
};

namespace detail {

inline void require_same_duration(const CommentaryTrack& a, const CommentaryTrack& b) {
  if (std::abs(a.video_duration().value() - b.video_duration().value()) > 1e-9) {
    throw InvalidArgument("eval: duration mismatch for '" + a.video_id() + "' (" +
                          std::to_string(a.video_duration().value()) + " s vs " +
                          std::to_string(b.video_duration().value()) + " s)");
  }
}

inline std::string join_texts(const std::vector<const Utterance*>& utterances) {
  std::string out;
  for (const auto* u : utterances) {
    if (!out.empty()) out += ' ';
    out += u->text();
  }
  return out;
}

inline std::string join_texts(const CommentaryTrack& track) {
  std::vector<const Utterance*> all;
  for (const auto& u : track.utterances()) all.push_back(&u);
  return join_texts(all);
}

}  // namespace detail

/// Share of seconds where both tracks speak or both are silent. An empty
/// (zero-length) video agrees trivially.
inline double timing_alignment(const CommentaryTrack& gen, const ReferenceTrack& ref) {
  detail::require_same_duration(gen, ref);
  const auto a = speaking_timeline(gen);
  const auto b = speaking_timeline(ref);
  if (a.empty()) return 1.0;
  std::size_t agree = 0;
  for (std::size_t s = 0; s < a.size(); ++s) agree += a[s] == b[s];
  return static_cast<double>(agree) / static_cast<double>(a.size());
}

inline std::size_t lcs_length(const std::vector<std::string_view>& a,
                              const std::vector<std::string_view>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row.back();
}

/// ROUGE-L F1 (precision and recall weighted equally), scaled to [0, 100].
inline double rouge_l(std::string_view candidate, std::string_view reference, Language language) {
  const auto unit = text::default_unit(language);
  const auto c = text::units(candidate, unit);
  const auto r = text::units(reference, unit);
  const auto lcs = lcs_length(c, r);
  if (lcs == 0) return 0.0;
  const double p = double(lcs) / double(c.size());
  const double rc = double(lcs) / double(r.size());
  return 100.0 * 2 * p * rc / (p + rc);
}

inline std::size_t bin_of(Seconds start, Seconds duration) {
  const auto b = static_cast<std::size_t>(std::floor(start.value() * double(kSimilarityBins) / duration.value()));
  return std::min(b, kSimilarityBins - 1);
}

/// Ten equal segments of the video; utterances are binned by start time and
/// compared bin by bin. Bins with an empty side score 0.
inline std::vector<double> binned_similarity(const CommentaryTrack& gen, const ReferenceTrack& ref,
                                             const SimilarityScorer& scorer) {
  detail::require_same_duration(gen, ref);
  std::vector<double> scores(kSimilarityBins, 0.0);
  if (gen.video_duration().value() <= 0.0) return scores;
  std::array<std::vector<const Utterance*>, kSimilarityBins> g, r;
  for (const auto& u : gen.utterances()) g[bin_of(u.start(), gen.video_duration())].push_back(&u);
  for (const auto& u : ref.utterances()) r[bin_of(u.start(), ref.video_duration())].push_back(&u);
  for (std::size_t b = 0; b < kSimilarityBins; ++b) {
    if (g[b].empty() || r[b].empty()) continue;
    scores[b] = scorer.score(detail::join_texts(g[b]), detail::join_texts(r[b]));
  }
  return scores;
}

struct WordStats {
  double avg = 0.0;
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const WordStats&, const WordStats&) = default;
};

inline std::size_t track_units(const CommentaryTrack& track, Language language) {
  std::size_t total = 0;
  for (const auto& u : track.utterances()) total += text::count_units(u.text(), text::default_unit(language));
  return total;
}

inline WordStats summarize(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("eval: statistics over an empty set");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {std::accumulate(values.begin(), values.end(), 0.0) / double(values.size()), *lo, *hi};
}

/// Per-track unit totals summarized across tracks.
inline WordStats word_stats(const std::vector<CommentaryTrack>& tracks, Language language) {
  std::vector<double> totals;
  for (const auto& t : tracks) totals.push_back(double(track_units(t, language)));
  return summarize(totals);
}

struct EvalReport {
  std::string video_id;
  double alignment = 0.0;  // agreement@1s
  double rouge_l = 0.0;
  std::vector<double> bin_scores = std::vector<double>(kSimilarityBins, 0.0);
  double overlap = 0.0;
  WordStats gen_words;
  WordStats ref_words;
};

inline EvalReport evaluate(const CommentaryTrack& gen, const ReferenceTrack& ref,
                           const SimilarityScorer& scorer) {
  detail::require_same_duration(gen, ref);
  const Language language = track_language(ref, track_language(gen));
  EvalReport report;
  report.video_id = gen.video_id();
  report.alignment = timing_alignment(gen, ref);
  report.rouge_l = rouge_l(detail::join_texts(gen), detail::join_texts(ref), language);
  report.bin_scores = binned_similarity(gen, ref, scorer);
  report.overlap = overlap_proportion(srt_entries(gen));
  report.gen_words = word_stats({gen}, language);
  report.ref_words = word_stats({ref}, language);
  return report;
}

/// Corpus averages of per-video reports; word statistics span the videos.
inline EvalReport corpus_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw InvalidArgument("eval: no reports to aggregate");
  EvalReport out;
  out.video_id = "corpus";
  std::vector<double> gen_totals, ref_totals;
  const double n = double(reports.size());
  for (const auto& r : reports) {
    out.alignment += r.alignment / n;
    out.rouge_l += r.rouge_l / n;
    out.overlap += r.overlap / n;
    for (std::size_t b = 0; b < kSimilarityBins; ++b) out.bin_scores[b] += r.bin_scores[b] / n;
    gen_totals.push_back(r.gen_words.avg);
    ref_totals.push_back(r.ref_words.avg);
  }
  out.gen_words = summarize(gen_totals);
  out.ref_words = summarize(ref_totals);
  return out;
}

namespace detail {

inline std::string fmt_metric(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace detail

/// `metric<TAB>value` lines, definitions declared up front.
inline std::string report_tsv(const EvalReport& r, const std::string& scorer_name) {
  using detail::fmt_metric;
  std::string out;
  const auto line = [&](const std::string& k, const std::string& v) { out += k + '\t' + v + '\n'; };
  line("video_id", r.video_id);
  line("alignment_definition", "agreement@1s");
  line("overlap_definition", "adjacent-pairs");
  line("rouge_l_definition", "lcs-f1-whole-track");
  line("bin_scorer", scorer_name);
  line("agreement@1s", fmt_metric(r.alignment));
  line("rouge_l", fmt_metric(r.rouge_l));
  line("overlap", fmt_metric(r.overlap));
  for (std::size_t b = 0; b < r.bin_scores.size(); ++b) line("bin" + std::to_string(b), fmt_metric(r.bin_scores[b]));
  line("gen_words_avg", fmt_metric(r.gen_words.avg));
  line("gen_words_min", fmt_metric(r.gen_words.min));
  line("gen_words_max", fmt_metric(r.gen_words.max));
  line("ref_words_avg", fmt_metric(r.ref_words.avg));
  line("ref_words_min", fmt_metric(r.ref_words.min));
  line("ref_words_max", fmt_metric(r.ref_words.max));
  return out;
}

/// Human-readable `key: value` lines.
inline std::string report_text(const EvalReport& r) {
  using detail::fmt_metric;
  std::string bins;
  for (double b : r.bin_scores) bins += (bins.empty() ? "" : " ") + fmt_metric(b);
  return "video: " + r.video_id + "\n" +
         "agreement@1s: " + fmt_metric(r.alignment) + "\n" +
         "rouge_l: " + fmt_metric(r.rouge_l) + "\n" +
         "bins: " + bins + "\n" +
         "overlap (adjacent pairs): " + fmt_metric(r.overlap) + "\n" +
         "gen words avg/min/max: " + fmt_metric(r.gen_words.avg) + "/" + fmt_metric(r.gen_words.min) + "/" + fmt_metric(r.gen_words.max) + "\n" +
         "ref words avg/min/max: " + fmt_metric(r.ref_words.avg) + "/" + fmt_metric(r.ref_words.min) + "/" + fmt_metric(r.ref_words.max) + "\n";
}

/// Transcript lines `start_seconds<TAB>text`, optionally preceded by a
/// manifest-style `#video_id<TAB>id<TAB>duration<TAB>seconds` header.
/// Durations come from the speech-rate model.
struct Transcript {
  std::string video_id;
  std::optional<Seconds> duration;
  std::vector<std::pair<Seconds, std::string>> lines;
};

inline Transcript parse_transcript(std::istream& in, const std::string& source = "<stream>") {
  Transcript t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (line.front() == '#') {
      if (fields.size() == 4 && fields[0] == "#video_id" && fields[2] == "duration") {
        t.video_id = std::string(fields[1]);
        const auto d = detail::parse_double(fields[3]);
        if (!d || *d < 0 || !std::isfinite(*d)) throw ParseError("eval: " + source + ": bad duration");
        t.duration = Seconds(*d);
      }
      continue;
    }
    const auto start = fields.size() >= 2 ? detail::parse_double(fields[0]) : std::nullopt;
    if (!start || *start < 0 || !std::isfinite(*start)) {
      throw ParseError("eval: " + source + ":" + std::to_string(line_no) + ": expected '<start_seconds><TAB><text>'");
    }
    std::string text(detail::trim(line.substr(line.find('\t') + 1)));
    if (text.empty()) continue;
    t.lines.emplace_back(Seconds(*start), std::move(text));
  }
  return t;
}

inline CommentaryTrack track_from_transcript(const Transcript& t, std::string video_id,
                                             Seconds video_duration, Language language,
                                             const SpeechRateModel& rates) {
  CommentaryTrack track(std::move(video_id), video_duration);
  for (const auto& [start, text] : t.lines) {
    track.append(Utterance(text, language, start, estimate_duration(text, language, rates)));
  }
  return track;
}

}  // namespace commentary

#endif  // COMMENTARY_EVAL_HPP
