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

#include "commentary/media.hpp"

#include <random>
#include <sstream>

#include <gtest/gtest.h>

namespace commentary {
namespace {

std::string manifest_text(const std::string& id, double duration, std::size_t frames,
                          std::optional<std::size_t> skip = {}) {
  std::ostringstream os;
  os << "#video_id\t" << id << "\tduration\t" << duration << "\n";
  for (std::size_t s = 0; s < frames; ++s) {
    if (skip && *skip == s) continue;
    os << s << "\tframes/" << id << "/" << s << ".jpg\n";
  }
  return os.str();
}

FrameStore make_store(double duration) {
  std::istringstream in(manifest_text("v", duration, timeline_length(Seconds(duration))));
  return parse_manifest(in);
}

std::vector<std::size_t> seconds_of(const FrameWindow& w) {
  std::vector<std::size_t> out;
  for (const auto& f : w.frames) out.push_back(f.second);
  return out;
}

std::vector<std::size_t> range(std::size_t a, std::size_t b) {
  std::vector<std::size_t> out;
  for (auto s = a; s < b; ++s) out.push_back(s);
  return out;
}

TEST(ManifestTest, CompleteCoverage) {
  std::istringstream in(manifest_text("race01", 10, 10));
  const auto store = parse_manifest(in);
  EXPECT_EQ(store.video_id(), "race01");
  EXPECT_EQ(store.size(), 10u);
  EXPECT_EQ(store.at(4).uri, "frames/race01/4.jpg");
}

TEST(ManifestTest, FractionalDurationRoundsUp) {
  std::istringstream in(manifest_text("v", 3.5, 4));
  EXPECT_EQ(parse_manifest(in).size(), 4u);
}

TEST(ManifestTest, GapNamesTheMissingSecond) {
  std::istringstream in(manifest_text("v", 10, 10, 4));
  try {
    parse_manifest(in);
    FAIL() << "expected a gap error";
  } catch (const ManifestError& e) {
    ASSERT_TRUE(e.second().has_value());
    EXPECT_EQ(*e.second(), 4u);
    EXPECT_NE(std::string(e.what()).find("second 4"), std::string::npos);
  }
}

TEST(ManifestTest, MalformedInputs) {
  std::istringstream no_header("0\ta.jpg\n");
  EXPECT_THROW(parse_manifest(no_header), ManifestError);
  std::istringstream bad_line("#video_id\tv\tduration\t2\n0 a.jpg\n1\tb.jpg\n");
  EXPECT_THROW(parse_manifest(bad_line), ManifestError);
  std::istringstream past_end("#video_id\tv\tduration\t2\n0\ta\n1\tb\n2\tc\n");
  EXPECT_THROW(parse_manifest(past_end), ManifestError);
  std::istringstream duplicate("#video_id\tv\tduration\t2\n0\ta\n0\tb\n1\tc\n");
  EXPECT_THROW(parse_manifest(duplicate), ManifestError);
  EXPECT_THROW(load_manifest("/nonexistent/manifest.tsv"), ManifestError);
}

TEST(ManifestTest, ToleratesCrlf) {
  std::istringstream in("#video_id\tv\tduration\t2\r\n0\ta.jpg\r\n1\tb.jpg\r\n");
  EXPECT_EQ(parse_manifest(in).at(1).uri, "b.jpg");
}

TEST(FramesBetweenTest, Examples) {
  const auto store = make_store(60);
  EXPECT_EQ(seconds_of(frames_between(store, Seconds(4), Seconds(6), 30)), (std::vector<std::size_t>{4, 5}));
  EXPECT_EQ(seconds_of(frames_between(store, Seconds(0), Seconds(0), 30)), (std::vector<std::size_t>{0}));
  EXPECT_EQ(seconds_of(frames_between(store, Seconds(0), Seconds(45), 30)), range(15, 45));
}

TEST(FramesBetweenTest, DegenerateWindowUsesFloor) {
  const auto store = make_store(10);
  EXPECT_EQ(seconds_of(frames_between(store, Seconds(3.2), Seconds(3.2), 30)), (std::vector<std::size_t>{3}));
  // At the very end of an integer-length video the last frame is current.
  EXPECT_EQ(seconds_of(frames_between(store, Seconds(10), Seconds(10), 30)), (std::vector<std::size_t>{9}));
}

TEST(FramesBetweenTest, OutOfRange) {
  const auto store = make_store(10);
  EXPECT_THROW(frames_between(store, Seconds(5), Seconds(4), 30), InvalidArgument);
  EXPECT_THROW(frames_between(store, Seconds(5), Seconds(10.5), 30), InvalidArgument);
  EXPECT_THROW(frames_between(store, Seconds(1), Seconds(2), 0), InvalidArgument);
}

TEST(FramesBetweenTest, IntegerSpanHasExactlyNFrames) {
  const auto store = make_store(100);
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t t = 0; t + n <= 100; t += 7) {
      ASSERT_EQ(frames_between(store, Seconds(double(t)), Seconds(double(t + n)), n).frames.size(), n);
    }
  }
}

TEST(FramesBetweenTest, EnlargingNeverDropsNewestFrames) {
  const auto store = make_store(80);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 80);
  for (int trial = 0; trial < 500; ++trial) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const double a2 = std::max(0.0, a - u(rng) / 4);
    const auto small = frames_between(store, Seconds(a), Seconds(b), 30);
    const auto large = frames_between(store, Seconds(a2), Seconds(b), 30);
    // The newest frame of the smaller window survives in the larger one.
    const auto newest = small.frames.back().second;
    const auto s = seconds_of(large);
    ASSERT_NE(std::find(s.begin(), s.end(), newest), s.end()) << a << " " << b << " " << a2;
    ASSERT_TRUE(std::is_sorted(s.begin(), s.end()));
    ASSERT_LE(s.size(), 30u);
  }
}

}  // namespace
}  // namespace commentary
