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

#include "commentary/backend.hpp"

#include <atomic>
#include <filesystem>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "commentary/eval.hpp"
#include "commentary/strategies.hpp"
#include "commentary/subtitles.hpp"

namespace commentary {
namespace {

namespace fs = std::filesystem;

GeneratorRequest request_for(std::string text, std::vector<std::string> attachments = {},
                             std::size_t index = 0) {
  GeneratorRequest r;
  r.prompt.text = std::move(text);
  r.prompt.attachments = std::move(attachments);
  r.prompt.digest = prompt_digest(r.prompt.text, r.prompt.attachments);
  r.context.index = index;
  r.context.time = Seconds(2.0 * index);
  if (index > 0) r.context.previous_time = Seconds(2.0 * (index - 1));
  r.video_id = "v";
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("commentary_backend_" + name + "_" +
                                                std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

FrameStore make_store(double duration, const std::string& uri_prefix = "f") {
  std::vector<FrameRef> frames;
  for (std::size_t s = 0; s < timeline_length(Seconds(duration)); ++s) {
    frames.push_back({"v", s, uri_prefix + std::to_string(s) + ".jpg"});
  }
  return FrameStore("v", Seconds(duration), std::move(frames));
}

TEST(ScriptedBackendTest, LookupOrder) {
  ScriptedBackend b("fallback");
  const auto r0 = request_for("p0", {}, 0);
  const auto r1 = request_for("p1", {}, 1);
  b.on_index(1, "by index").on_digest(r0.prompt.digest, "by digest").on_index(0, "shadowed");
  EXPECT_EQ(b.generate(r0).raw_text, "by digest");
  EXPECT_EQ(b.generate(r1).raw_text, "by index");
  EXPECT_EQ(b.generate(request_for("p2", {}, 2)).raw_text, "fallback");
  EXPECT_EQ(ScriptedBackend().generate(r0).raw_text, "<WAIT>");
}

TEST(ScriptedBackendTest, ParsesScriptFile) {
  std::istringstream in(
      "# comment\n"
      "*\tWAIT\n"
      "0\tThe cars line up on the grid.\r\n"
      "3\tline one\\nline two\\ttab\\\\\n"
      "digest:0123456789abcdef\tkeyed\n");
  auto b = parse_script(in);
  EXPECT_EQ(b.generate(request_for("x", {}, 0)).raw_text, "The cars line up on the grid.");
  EXPECT_EQ(b.generate(request_for("x", {}, 3)).raw_text, "line one\nline two\ttab\\");
  EXPECT_EQ(b.generate(request_for("x", {}, 7)).raw_text, "WAIT");
  auto r = request_for("x", {}, 0);
  r.prompt.digest = "0123456789abcdef";
  EXPECT_EQ(b.generate(r).raw_text, "keyed");

  std::istringstream bad("zero\treply\n");
  EXPECT_THROW(parse_script(bad), ParseError);
  std::istringstream no_tab("0 reply\n");
  EXPECT_THROW(parse_script(no_tab), ParseError);
}

TEST(EscapeFieldTest, RoundTrips) {
  for (const std::string s : {"", "plain", "a\nb", "\t\r\\n", "\\\\", "end\\"}) {
    EXPECT_EQ(detail::unescape_field(detail::escape_field(s)), s);
    EXPECT_EQ(detail::escape_field(s).find('\n'), std::string::npos);
  }
}

TEST(OracleBackendTest, SpeaksReferenceUtterancesSinceLastDecision) {
  CommentaryTrack ref("v", Seconds(20));
  for (double t : {3.0, 5.0, 6.0, 7.0}) {
    ref.append(Utterance("u" + std::to_string(int(t)), Language::kEnglish, Seconds(t), Seconds(1)));
  }
  auto oracle = OracleBackend::for_all(ref);
  auto r = request_for("x");
  r.context.time = Seconds(6);
  r.context.previous_time = Seconds(4);
  EXPECT_EQ(oracle.generate(r).raw_text, "u5 u6");
  r.context.time = Seconds(4);
  r.context.previous_time = Seconds(3);
  EXPECT_EQ(oracle.generate(r).raw_text, "<WAIT>");
  r.context.time = Seconds(3);
  r.context.previous_time.reset();
  EXPECT_EQ(oracle.generate(r).raw_text, "u3");
}

TEST(OracleBackendTest, JapaneseJoinsWithoutSpace) {
  CommentaryTrack ref("v", Seconds(10));
  ref.append(Utterance("速い", Language::kJapanese, Seconds(1), Seconds(1)));
  ref.append(Utterance("抜いた", Language::kJapanese, Seconds(1.5), Seconds(1)));
  auto r = request_for("x");
  r.context.time = Seconds(2);
  EXPECT_EQ(OracleBackend::for_all(ref).generate(r).raw_text, "速い抜いた");
}

TEST(OracleBackendTest, UnknownVideoIsAnError) {
  OracleBackend oracle({CommentaryTrack("other", Seconds(5))});
  EXPECT_THROW(oracle.generate(request_for("x")), BackendError);
}

TEST(ReplayCacheTest, RecordThenReplayIsIdentical) {
  const auto dir = fresh_dir("replay");
  auto scripted = std::make_shared<ScriptedBackend>();
  scripted->on_index(0, "Lights out!").on_index(2, "Into turn one\nside by side.");
  const auto config = StrategyConfig::defaults(StrategyKind::kFeedback);
  const auto prompts = PromptSet::builtin("race-en");

  SimulatedClock c1;
  ReplayCache recorder(scripted, dir, CacheMode::kRecord);
  const auto recorded = run_session(make_store(10), config, recorder, c1, prompts);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  EXPECT_EQ(entries, 6u);

  SimulatedClock c2;
  ReplayCache replayer(nullptr, dir, CacheMode::kReplay);
  const auto replayed = run_session(make_store(10), config, replayer, c2, prompts);
  ASSERT_EQ(recorded.steps.size(), replayed.steps.size());
  for (std::size_t i = 0; i < recorded.steps.size(); ++i) {
    EXPECT_EQ(recorded.steps[i].raw_response, replayed.steps[i].raw_response);
    EXPECT_EQ(recorded.steps[i].digest, replayed.steps[i].digest);
  }
  EXPECT_EQ(recorded.track, replayed.track);
  fs::remove_all(dir);
}

TEST(ReplayCacheTest, MissNamesTheDigest) {
  const auto dir = fresh_dir("miss");
  fs::create_directories(dir);
  ReplayCache replayer(nullptr, dir, CacheMode::kReplay);
  const auto r = request_for("never recorded");
  try {
    replayer.generate(r);
    FAIL() << "expected a cache miss";
  } catch (const CacheMissError& e) {
    EXPECT_EQ(e.digest(), r.prompt.digest);
    EXPECT_NE(std::string(e.what()).find(r.prompt.digest), std::string::npos);
    EXPECT_FALSE(e.retriable());
  }
  fs::remove_all(dir);
  EXPECT_THROW(ReplayCache(nullptr, dir, CacheMode::kReplay), BackendError);
}

TEST(ReplayCacheTest, CorruptEntryIsRejected) {
  const auto dir = fresh_dir("corrupt");
  auto scripted = std::make_shared<ScriptedBackend>("hello");
  ReplayCache recorder(scripted, dir, CacheMode::kRecord);
  const auto r = request_for("p");
  recorder.generate(r);
  std::ofstream(recorder.entry_path(r.prompt.digest), std::ios::trunc) << "wrong\n0\nhello";
  ReplayCache replayer(nullptr, dir, CacheMode::kReplay);
  EXPECT_THROW(replayer.generate(r), BackendError);
  fs::remove_all(dir);
}

class CountingBackend final : public Generator {
 public:
  GeneratorResponse generate(const GeneratorRequest&) override {
    const int now = ++active_;
    int prev = peak_.load();
    while (now > prev && !peak_.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --active_;
    return {"<WAIT>", Seconds(0), ""};
  }
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

TEST(ConcurrencyLimitTest, CapsInFlightRequests) {
  auto inner = std::make_shared<CountingBackend>();
  ConcurrencyLimit limited(inner, 2);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { limited.generate(request_for("x")); });
  }
  EXPECT_LE(inner->peak_.load(), 2);
  EXPECT_GE(inner->peak_.load(), 1);
}

TEST(BackendErrorTest, Retriability) {
  using K = BackendError::Kind;
  for (auto k : {K::kTransport, K::kRateLimit, K::kServer}) EXPECT_TRUE(BackendError(k, "x").retriable());
  for (auto k : {K::kAuthentication, K::kPayloadTooLarge, K::kInvalidRequest, K::kProtocol}) {
    EXPECT_FALSE(BackendError(k, "x").retriable());
  }
}

TEST(ImageUrlTest, InlinesLocalFiles) {
  const auto dir = fresh_dir("img");
  fs::create_directories(dir);
  std::ofstream(dir / "a.png", std::ios::binary) << "abc";
  EXPECT_EQ(detail::image_url((dir / "a.png").string()), "data:image/png;base64,YWJj");
  EXPECT_EQ(detail::image_url("file://" + (dir / "a.png").string()), "data:image/png;base64,YWJj");
  EXPECT_EQ(detail::image_url("https://x/y.jpg"), "https://x/y.jpg");
  EXPECT_THROW(detail::image_url((dir / "missing.jpg").string()), BackendError);
  fs::remove_all(dir);
}

// Local stand-in for a chat-completion service.
class FakeService {
 public:
  FakeService() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::jthread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeService() { server_.stop(); }

  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  httplib::Server& server() { return server_; }

  RemoteConfig config() const {
    RemoteConfig c;
    c.api_base = base();
    c.api_key = "sk-test";
    c.model = "vlm-test";
    c.initial_backoff = std::chrono::milliseconds(1);
    return c;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::jthread thread_;
};

TEST(RemoteClientTest, WireFormatAndReply) {
  FakeService service;
  nlohmann::json seen;
  std::string auth, digest;
  service.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    digest = req.get_header_value("X-Prompt-Digest");
    res.set_content(R"({"model":"vlm-test-2","choices":[{"message":{"role":"assistant","content":"  Lights out!\n"}}]})",
                    "application/json");
  });
  RemoteClient client(service.config());
  const std::string text = "Line one\n  spaced\t{literal}";
  auto r = request_for(text, {"https://img/1.jpg", "https://img/2.jpg"});
  r.temperature = 0.0;
  r.max_output_units = 64;
  const auto reply = client.generate(r);
  EXPECT_EQ(reply.raw_text, "  Lights out!\n");
  EXPECT_EQ(reply.model_id, "vlm-test-2");
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(digest, r.prompt.digest);
  EXPECT_EQ(seen["model"], "vlm-test");
  EXPECT_EQ(seen["max_tokens"], 64);
  EXPECT_EQ(seen["temperature"], 0.0);
  const auto& content = seen["messages"][0]["content"];
  ASSERT_EQ(content.size(), 3u);
  EXPECT_EQ(content[0]["text"], text);
  EXPECT_EQ(content[1]["image_url"]["url"], "https://img/1.jpg");
  EXPECT_EQ(content[2]["image_url"]["url"], "https://img/2.jpg");
}

TEST(RemoteClientTest, AuthenticationFailureIsNotRetried) {
  FakeService service;
  std::atomic<int> calls{0};
  service.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
  });
  RemoteClient client(service.config());
  try {
    client.generate(request_for("x"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kAuthentication);
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(RemoteClientTest, RateLimitRetriedThenRecovers) {
  FakeService service;
  std::atomic<int> calls{0};
  service.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 429;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"WAIT"}}]})", "application/json");
  });
  RemoteClient client(service.config());
  EXPECT_EQ(client.generate(request_for("x")).raw_text, "WAIT");
  EXPECT_EQ(calls.load(), 3);
}

TEST(RemoteClientTest, RateLimitExhaustsAttempts) {
  FakeService service;
  std::atomic<int> calls{0};
  service.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
  });
  RemoteClient client(service.config());
  try {
    client.generate(request_for("x"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kRateLimit);
    EXPECT_NE(std::string(e.what()).find("after 3 attempts"), std::string::npos);
  }
  EXPECT_EQ(calls.load(), 3);
}

TEST(RemoteClientTest, PayloadLimits) {
  FakeService service;
  std::atomic<int> calls{0};
  service.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 413;
  });
  auto config = service.config();
  config.payload_limit = 2;
  RemoteClient client(config);
  try {
    client.generate(request_for("x", {"https://a", "https://b", "https://c"}));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kPayloadTooLarge);
  }
  EXPECT_EQ(calls.load(), 0);
  try {
    client.generate(request_for("x", {"https://a"}));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kPayloadTooLarge);
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(RemoteClientTest, MalformedReplyIsProtocolError) {
  FakeService service;
  service.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  RemoteClient client(service.config());
  try {
    client.generate(request_for("x"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kProtocol);
  }
}

TEST(RemoteClientTest, UnreachableHostIsTransportFailure) {
  RemoteConfig config;
  // Nothing listens on port 1.
  config.api_base = "http://127.0.0.1:1/v1";
  config.model = "m";
  config.initial_backoff = std::chrono::milliseconds(1);
  config.connect_timeout = std::chrono::seconds(1);
  config.read_timeout = std::chrono::seconds(1);
  RemoteClient client(config);
  try {
    client.generate(request_for("x"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kTransport);
    EXPECT_NE(std::string(e.what()).find("after 3 attempts"), std::string::npos);
  }
}

TEST(RemoteClientTest, RealtimeSessionOnWallClock) {
  FakeService service;
  std::atomic<int> calls{0};
  service.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const char* reply = ++calls % 2 ? "Go." : "<WAIT>";
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", reply}}}}}}}.dump(), "application/json");
  });
  RemoteClient client(service.config());
  WallClock clock;
  auto config = StrategyConfig::defaults(StrategyKind::kRealtime);
  config.step = Seconds(1);
  const auto r = run_session(make_store(4, "https://frames/"), config, client, clock, PromptSet::builtin("race-en"));
  ASSERT_TRUE(r.complete) << r.failure;
  EXPECT_GE(r.steps.size(), 4u);
  EXPECT_EQ(overlap_proportion(srt_entries(r.track)), 0.0);
  for (std::size_t i = 1; i < r.steps.size(); ++i) {
    const double since = r.steps[i].point.time.value() - r.steps[i - 1].point.time.value();
    const double frames = double(r.steps[i].point.window.frames.size());
    EXPECT_GE(frames, 1.0);
    EXPECT_LE(std::abs(frames - since), 1.0);
  }
}

TEST(RemoteConfigTest, MissingEnvironmentYieldsNothing) {
  ::unsetenv("COMMENTARY_API_BASE");
  EXPECT_FALSE(RemoteConfig::from_env().has_value());
  ::setenv("COMMENTARY_API_BASE", "http://h/v1", 1);
  ::setenv("COMMENTARY_MODEL", "m", 1);
  const auto c = RemoteConfig::from_env();
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->api_base, "http://h/v1");
  ::unsetenv("COMMENTARY_API_BASE");
  ::unsetenv("COMMENTARY_MODEL");
}

TEST(EmbeddingScorerTest, CosineOfReturnedVectors) {
  FakeService service;
  nlohmann::json seen;
  service.server().Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    res.set_content(R"({"data":[{"embedding":[1,0,1]},{"embedding":[1,1,0]}]})", "application/json");
  });
  EmbeddingScorer scorer(service.config());
  EXPECT_NEAR(scorer.score("a", "b"), 0.5, 1e-12);
  EXPECT_EQ(seen["input"], nlohmann::json::array({"a", "b"}));
  EXPECT_EQ(scorer.score("", "b"), 0.0);
}

}  // namespace
}  // namespace commentary
