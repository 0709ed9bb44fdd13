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

#include "commentary/eval.hpp"

#include <functional>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace commentary {
namespace {

CommentaryTrack track_of(double duration, std::vector<std::tuple<double, double, std::string>> us,
                         Language lang = Language::kEnglish, std::string id = "v") {
  CommentaryTrack t(std::move(id), Seconds(duration));
  for (auto& [s, d, text] : us) t.append(Utterance(text, lang, Seconds(s), Seconds(d)));
  return t;
}

// Exponential-time LCS, independent of the DP under test.
std::size_t lcs_brute(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b,
                      std::size_t i = 0, std::size_t j = 0) {
  if (i == a.size() || j == b.size()) return 0;
  if (a[i] == b[j]) return 1 + lcs_brute(a, b, i + 1, j + 1);
  return std::max(lcs_brute(a, b, i + 1, j), lcs_brute(a, b, i, j + 1));
}

TEST(AlignmentTest, Examples) {
  const auto full = track_of(10, {{0, 10, "talk"}});
  const auto silent = track_of(10, {});
  EXPECT_EQ(timing_alignment(full, full), 1.0);
  EXPECT_EQ(timing_alignment(silent, full), 0.0);
  EXPECT_EQ(timing_alignment(silent, silent), 1.0);
  EXPECT_DOUBLE_EQ(timing_alignment(track_of(10, {{0, 3, "a"}}), track_of(10, {{0, 5, "b"}})), 0.8);
  EXPECT_EQ(timing_alignment(track_of(0, {}), track_of(0, {})), 1.0);
  EXPECT_THROW(timing_alignment(track_of(10, {}), track_of(11, {})), InvalidArgument);
}

TEST(AlignmentTest, PartialSecondsCountAsSpeaking) {
  // [2.9, 3.1) touches seconds 2 and 3.
  EXPECT_DOUBLE_EQ(timing_alignment(track_of(4, {{2.9, 0.2, "a"}}), track_of(4, {{2, 2, "b"}})), 1.0);
}

TEST(AlignmentTest, SymmetricAndBounded) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto random_track = [&] {
      CommentaryTrack t("v", Seconds(60));
      double s = 0;
      while ((s += 0.5 + (rng() % 100) / 10.0) < 60) t.append(Utterance("x", Language::kEnglish, Seconds(s), Seconds(0.2 + (rng() % 80) / 10.0)));
      return t;
    };
    const auto a = random_track(), b = random_track();
    const double ab = timing_alignment(a, b);
    EXPECT_EQ(ab, timing_alignment(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(timing_alignment(a, a), 1.0);
  }
}

TEST(RougeLTest, Examples) {
  EXPECT_DOUBLE_EQ(rouge_l("a b c d", "a c d e", Language::kEnglish), 75.0);
  EXPECT_DOUBLE_EQ(rouge_l("same words here", "same words here", Language::kEnglish), 100.0);
  EXPECT_EQ(rouge_l("", "a b", Language::kEnglish), 0.0);
  EXPECT_EQ(rouge_l("x y", "a b", Language::kEnglish), 0.0);
  // Characters for Japanese: LCS of 速い車 and 速い赤い車 is 3, P=1, R=3/5.
  EXPECT_DOUBLE_EQ(rouge_l("速い車", "速い赤い車", Language::kJapanese), 100.0 * 2 * 0.6 / 1.6);
}

TEST(RougeLTest, AgreesWithBruteForceLcs) {
  std::mt19937 rng(11);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 500; ++trial) {
    auto random_text = [&] {
      std::string s;
      for (int i = 0, n = rng() % 9; i < n; ++i) s += (i ? " " : "") + vocab[rng() % vocab.size()];
      return s;
    };
    const auto c = random_text(), r = random_text();
    const auto cu = text::words(c), ru = text::words(r);
    const auto lcs = lcs_brute(cu, ru);
    EXPECT_EQ(lcs_length(cu, ru), lcs);
    const double expected = lcs == 0 ? 0.0 : 100.0 * 2.0 * lcs / double(cu.size() + ru.size());
    EXPECT_NEAR(rouge_l(c, r, Language::kEnglish), expected, 1e-9);
    EXPECT_NEAR(rouge_l(c, r, Language::kEnglish), rouge_l(r, c, Language::kEnglish), 1e-9);
  }
}

TEST(BinsTest, StartTimeDecidesTheBin) {
  EXPECT_EQ(bin_of(Seconds(35), Seconds(100)), 3u);
  EXPECT_EQ(bin_of(Seconds(0), Seconds(100)), 0u);
  EXPECT_EQ(bin_of(Seconds(99.9), Seconds(100)), 9u);
  EXPECT_EQ(bin_of(Seconds(100), Seconds(100)), 9u);

  const auto gen = track_of(100, {{35, 2, "lead change"}, {91, 2, "finish"}});
  const auto ref = track_of(100, {{30, 2, "lead change"}, {50, 2, "pit stop"}, {99, 0.5, "finish"}});
  const auto scores = binned_similarity(gen, ref, ExactMatchScorer());
  EXPECT_EQ(scores, (std::vector<double>{0, 0, 0, 1, 0, 0, 0, 0, 0, 1}));
}

TEST(BinsTest, TokenF1Scorer) {
  TokenF1Scorer f1;
  EXPECT_DOUBLE_EQ(f1.score("a b c", "a b d"), 2.0 / 3.0);
  EXPECT_EQ(f1.score("", "a"), 0.0);
  EXPECT_DOUBLE_EQ(f1.score("a a b", "a b b"), 2.0 / 3.0);
}

TEST(WordStatsTest, Examples) {
  const auto make = [](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += "w ";
    return track_of(1000, {{0, 1, s}});
  };
  const auto stats = word_stats({make(180), make(866)}, Language::kEnglish);
  EXPECT_EQ(stats, (WordStats{523, 180, 866}));
  EXPECT_THROW(word_stats({}, Language::kEnglish), InvalidArgument);
  EXPECT_EQ(track_units(track_of(10, {{0, 1, "速い 車"}}, Language::kJapanese), Language::kJapanese), 3u);
}

TEST(EvaluateTest, SelfComparison) {
  const auto ref = track_of(20, {{1, 2, "green flag"}, {6, 3, "he takes the lead"}, {15, 2, "chequered flag"}});
  const auto r = evaluate(ref, ref, TokenF1Scorer());
  EXPECT_EQ(r.alignment, 1.0);
  EXPECT_DOUBLE_EQ(r.rouge_l, 100.0);
  EXPECT_EQ(r.overlap, 0.0);
  EXPECT_EQ(r.bin_scores[0], 1.0);
  EXPECT_EQ(r.bin_scores[3], 1.0);
  EXPECT_EQ(r.bin_scores[7], 1.0);
  EXPECT_EQ(r.bin_scores[1], 0.0);
  EXPECT_EQ(r.gen_words, r.ref_words);
}

TEST(EvaluateTest, ReportFormats) {
  const auto ref = track_of(20, {{1, 2, "green flag"}});
  const auto gen = track_of(20, {});
  const auto r = evaluate(gen, ref, TokenF1Scorer());
  const auto tsv = report_tsv(r, "token-f1");
  EXPECT_NE(tsv.find("alignment_definition\tagreement@1s\n"), std::string::npos);
  EXPECT_NE(tsv.find("agreement@1s\t0.9\n"), std::string::npos);
  EXPECT_NE(tsv.find("bin9\t0\n"), std::string::npos);
  const auto corpus = corpus_report({r, evaluate(ref, ref, TokenF1Scorer())});
  EXPECT_DOUBLE_EQ(corpus.alignment, 0.95);
  EXPECT_DOUBLE_EQ(corpus.rouge_l, 50.0);
  EXPECT_EQ(corpus.gen_words, (WordStats{1, 0, 2}));
}

TEST(TranscriptTest, ParsesAndEstimatesDurations) {
  std::istringstream in(
      "#video_id\tlap1\tduration\t30\n"
      "0\tthe red car takes the lead now today\n"
      "12.5\tgo\n");
  const auto t = parse_transcript(in);
  EXPECT_EQ(t.video_id, "lap1");
  ASSERT_TRUE(t.duration.has_value());
  const auto track = track_from_transcript(t, t.video_id, *t.duration, Language::kEnglish,
                                           SpeechRateModel::defaults());
  ASSERT_EQ(track.utterances().size(), 2u);
  EXPECT_EQ(track.utterances()[0].est_duration().value(), 2.0);
  EXPECT_EQ(track.utterances()[1].start().value(), 12.5);
  EXPECT_EQ(track.utterances()[1].est_duration().value(), 0.25);

  std::istringstream bad("zero\ttext\n");
  EXPECT_THROW(parse_transcript(bad), ParseError);
}

}  // namespace
}  // namespace commentary
