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

#ifndef COMMENTARY_BACKEND_HPP
#define COMMENTARY_BACKEND_HPP

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "commentary/core.hpp"
#include "commentary/media.hpp"
#include "commentary/prompting.hpp"

namespace commentary {

/// Where in the session a request comes from. Not sent over the wire; lets
/// offline backends key on the schedule.
struct DecisionContext {
  std::size_t index = 0;
  Seconds time;
  std::optional<Seconds> previous_time;
};

struct GeneratorRequest {
  RenderedPrompt prompt;
  std::string model_id;
  std::size_t max_output_units = 256;
  double temperature = 0.0;
  std::string video_id;
  DecisionContext context;
};

struct GeneratorResponse {
  std::string raw_text;
  Seconds latency;
  std::string model_id;
};

class BackendError : public Error {
 public:
  enum class Kind {
    kTransport,
    kAuthentication,
    kRateLimit,
    kServer,
    kPayloadTooLarge,
    kInvalidRequest,
    kProtocol,
    kCacheMiss,
  };

  BackendError(Kind kind, const std::string& what)
      : Error("backend: " + what), kind_(kind), message_(what) {}

  Kind kind() const { return kind_; }
  const std::string& message() const { return message_; }
  bool retriable() const {
    return kind_ == Kind::kTransport || kind_ == Kind::kRateLimit || kind_ == Kind::kServer;
  }

 private:
  Kind kind_;
  std::string message_;
};

class CacheMissError : public BackendError {
 public:
  explicit CacheMissError(std::string digest)
      : BackendError(Kind::kCacheMiss, "replay cache has no entry for digest " + digest),
        digest_(std::move(digest)) {}
  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

/// A multimodal model reachable through one call. Implementations must be
/// safe to call from several sessions at once.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GeneratorResponse generate(const GeneratorRequest& request) = 0;
};

namespace detail {

inline std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char c = s[++i];
      out += c == 'n' ? '\n' : c == 't' ? '\t' : c == 'r' ? '\r' : c;
    } else {
      out += s[i];
    }
  }
  return out;
}

inline std::string escape_field(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Canned replies keyed by prompt digest or decision index.
class ScriptedBackend final : public Generator {
 public:
  explicit ScriptedBackend(std::string default_response = std::string(kWaitToken))
      : default_response_(std::move(default_response)) {}

  ScriptedBackend& on_index(std::size_t index, std::string response) {
    by_index_[index] = std::move(response);
    return *this;
  }
  ScriptedBackend& on_digest(std::string digest, std::string response) {
    by_digest_[std::move(digest)] = std::move(response);
    return *this;
  }
  void set_default(std::string response) { default_response_ = std::move(response); }

  GeneratorResponse generate(const GeneratorRequest& request) override {
    return {lookup(request), Seconds(0), request.model_id};
  }

  const std::string& lookup(const GeneratorRequest& request) const {
    if (auto it = by_digest_.find(request.prompt.digest); it != by_digest_.end()) return it->second;
    if (auto it = by_index_.find(request.context.index); it != by_index_.end()) return it->second;
    return default_response_;
  }

 private:
  std::map<std::size_t, std::string> by_index_;
  std::unordered_map<std::string, std::string> by_digest_;
  std::string default_response_;
};

/// Script file lines: `<index><TAB>reply`, `digest:<hex><TAB>reply`, or
/// `*<TAB>reply` for the default. Replies may use \n, \t and \\ escapes.
inline ScriptedBackend parse_script(std::istream& in, const std::string& source = "<stream>") {
  ScriptedBackend backend;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("backend: " + source + ":" + std::to_string(line_no) +
                       ": expected '<key><TAB><reply>'");
    }
    const std::string_view key = std::string_view(line).substr(0, tab);
    auto reply = detail::unescape_field(std::string_view(line).substr(tab + 1));
    if (key == "*") {
      backend.set_default(std::move(reply));
    } else if (key.rfind("digest:", 0) == 0) {
      backend.on_digest(std::string(key.substr(7)), std::move(reply));
    } else if (auto index = detail::parse_index(key)) {
      backend.on_index(*index, std::move(reply));
    } else {
      throw ParseError("backend: " + source + ":" + std::to_string(line_no) + ": bad key '" +
                       std::string(key) + "'");
    }
  }
  return backend;
}

inline ScriptedBackend load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("backend: cannot open script '" + path.string() + "'");
  return parse_script(in, path.string());
}

/// Replays reference commentary: at a decision at time t it speaks every
/// reference utterance that started since the previous decision (at or before
/// t for the first one), joined into one reply, and waits otherwise.
class OracleBackend final : public Generator {
 public:
  explicit OracleBackend(std::vector<CommentaryTrack> references) {
    for (auto& r : references) references_.emplace(r.video_id(), std::move(r));
  }

  /// One reference used for every video.
  static OracleBackend for_all(CommentaryTrack reference) {
    OracleBackend oracle({});
    oracle.fallback_.emplace(std::move(reference));
    return oracle;
  }

  GeneratorResponse generate(const GeneratorRequest& request) override {
    const CommentaryTrack& ref = reference_for(request.video_id);
    const double t = request.context.time.value();
    const auto prev = request.context.previous_time;
    std::string reply;
    for (const auto& u : ref.utterances()) {
      const double s = u.start().value();
      const bool after_prev = !prev || s > prev->value();
      if (after_prev && s <= t) {
        if (!reply.empty() && u.language() == Language::kEnglish) reply += ' ';
        reply += u.text();
      }
    }
    if (reply.empty()) reply = std::string(kWaitToken);
    return {std::move(reply), Seconds(0), request.model_id};
  }

 private:
  const CommentaryTrack& reference_for(const std::string& video_id) const {
    if (auto it = references_.find(video_id); it != references_.end()) return it->second;
    if (fallback_) return *fallback_;
    throw BackendError(BackendError::Kind::kInvalidRequest,
                       "oracle has no reference for video '" + video_id + "'");
  }

  std::map<std::string, CommentaryTrack> references_;
  std::optional<CommentaryTrack> fallback_;
};

enum class CacheMode { kRecord, kReplay, kPassthrough };

/// Digest-keyed record/replay layer. Each entry is one file: digest line,
/// latency in milliseconds, then the raw reply.
class ReplayCache final : public Generator {
 public:
  ReplayCache(std::shared_ptr<Generator> inner, std::filesystem::path dir, CacheMode mode)
      : inner_(std::move(inner)), dir_(std::move(dir)), mode_(mode) {
    if (mode_ == CacheMode::kRecord) std::filesystem::create_directories(dir_);
    if (mode_ == CacheMode::kReplay && !std::filesystem::is_directory(dir_)) {
      throw BackendError(BackendError::Kind::kInvalidRequest,
                         "cache directory '" + dir_.string() + "' does not exist");
    }
  }

  std::filesystem::path entry_path(const std::string& digest) const {
    return dir_ / (digest + ".entry");
  }

  GeneratorResponse generate(const GeneratorRequest& request) override {
    const auto& digest = request.prompt.digest;
    switch (mode_) {
      case CacheMode::kPassthrough:
        return inner_->generate(request);
      case CacheMode::kReplay:
        return read(digest, request.model_id);
      case CacheMode::kRecord: {
        auto response = inner_->generate(request);
        write(digest, response);
        return response;
      }
    }
    return inner_->generate(request);
  }

 private:
  GeneratorResponse read(const std::string& digest, const std::string& model_id) const {
    std::ifstream in(entry_path(digest), std::ios::binary);
    if (!in) throw CacheMissError(digest);
    std::string stored_digest, latency_ms;
    std::getline(in, stored_digest);
    std::getline(in, latency_ms);
    std::ostringstream raw;
    raw << in.rdbuf();
    const auto ms = detail::parse_double(latency_ms);
    if (stored_digest != digest || !ms || *ms < 0) {
      throw BackendError(BackendError::Kind::kProtocol,
                         "corrupt cache entry '" + entry_path(digest).string() + "'");
    }
    return {raw.str(), Seconds(*ms / 1000.0), model_id};
  }

  void write(const std::string& digest, const GeneratorResponse& response) {
    std::lock_guard lock(write_mutex_);
    const auto target = entry_path(digest);
    auto tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << digest << '\n'
          << static_cast<long long>(std::llround(response.latency.value() * 1000.0)) << '\n'
          << response.raw_text;
      if (!out) {
        throw BackendError(BackendError::Kind::kInvalidRequest,
                           "cannot write cache entry '" + tmp.string() + "'");
      }
    }
    std::filesystem::rename(tmp, target);
  }

  std::shared_ptr<Generator> inner_;
  std::filesystem::path dir_;
  CacheMode mode_;
  std::mutex write_mutex_;
};

/// Caps in-flight calls to the wrapped generator.
class ConcurrencyLimit final : public Generator {
 public:
  ConcurrencyLimit(std::shared_ptr<Generator> inner, std::ptrdiff_t limit = 4)
      : inner_(std::move(inner)), slots_(std::clamp<std::ptrdiff_t>(limit, 1, kMaxSlots)) {}

  GeneratorResponse generate(const GeneratorRequest& request) override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<kMaxSlots>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return inner_->generate(request);
  }

 private:
  static constexpr std::ptrdiff_t kMaxSlots = 256;
  std::shared_ptr<Generator> inner_;
  std::counting_semaphore<kMaxSlots> slots_;
};

struct RemoteConfig {
  std::string api_base;  // e.g. https://host/v1
  std::string api_key;
  std::string model;
  std::size_t payload_limit = 32;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};

  /// COMMENTARY_API_BASE, COMMENTARY_API_KEY, COMMENTARY_MODEL.
  static std::optional<RemoteConfig> from_env() {
    const char* base = std::getenv("COMMENTARY_API_BASE");
    const char* model = std::getenv("COMMENTARY_MODEL");
    if (base == nullptr || model == nullptr || *base == '\0' || *model == '\0') return std::nullopt;
    const char* key = std::getenv("COMMENTARY_API_KEY");
    RemoteConfig config;
    config.api_base = base;
    config.model = model;
    config.api_key = key ? key : "";
    return config;
  }
};

namespace detail {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

inline Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw BackendError(BackendError::Kind::kInvalidRequest, "API base '" + url + "' has no scheme");
  }
  const auto slash = url.find('/', scheme + 3);
  Endpoint e{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

inline std::string base64(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::string mime_for(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "image/jpeg";
}

/// Remote URLs pass through; local paths (optionally file://) become data URIs.
inline std::string image_url(const std::string& uri) {
  if (uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0 || uri.rfind("data:", 0) == 0) {
    return uri;
  }
  const std::filesystem::path path = uri.rfind("file://", 0) == 0 ? uri.substr(7) : uri;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw BackendError(BackendError::Kind::kInvalidRequest, "cannot read image '" + uri + "'");
  }
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return "data:" + mime_for(path) + ";base64," + base64(bytes.str());
}

}  // namespace detail

/// POSTs JSON to an HTTP API with bearer auth and bounded exponential backoff
/// on transport errors, 429 and 5xx.
class JsonHttpClient {
 public:
  explicit JsonHttpClient(RemoteConfig config)
      : config_(std::move(config)), endpoint_(detail::split_url(config_.api_base)) {}

  const RemoteConfig& config() const { return config_; }

  nlohmann::json post(const std::string& path, const nlohmann::json& body,
                      const httplib::Headers& extra_headers = {}) const {
    const std::string payload = body.dump();
    auto backoff = config_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        return post_once(path, payload, extra_headers);
      } catch (const BackendError& e) {
        if (!e.retriable() || attempt >= config_.max_attempts) {
          if (e.retriable()) {
            throw BackendError(e.kind(), e.message() + " (after " +
                                             std::to_string(attempt) + " attempts)");
          }
          throw;
        }
      }
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }

 private:
  nlohmann::json post_once(const std::string& path, const std::string& payload,
                           const httplib::Headers& extra_headers) const {
    httplib::Client client(endpoint_.origin);
    client.set_connection_timeout(config_.connect_timeout);
    client.set_read_timeout(config_.read_timeout);
    httplib::Headers headers = extra_headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    const std::string target = endpoint_.prefix + path;
    auto result = client.Post(target, headers, payload, "application/json");
    if (!result) {
      throw BackendError(BackendError::Kind::kTransport,
                         "POST " + endpoint_.origin + target + " failed: " +
                             httplib::to_string(result.error()));
    }
    const int status = result->status;
    const auto fail = [&](BackendError::Kind kind, const char* what) {
      throw BackendError(kind, std::string(what) + " (HTTP " + std::to_string(status) + ")");
    };
    if (status == 401 || status == 403) fail(BackendError::Kind::kAuthentication, "authentication failed");
    if (status == 413) fail(BackendError::Kind::kPayloadTooLarge, "payload too large");
    if (status == 429) fail(BackendError::Kind::kRateLimit, "rate limited");
    if (status >= 500) fail(BackendError::Kind::kServer, "server error");
    if (status < 200 || status >= 300) fail(BackendError::Kind::kInvalidRequest, "request rejected");
    try {
      return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(BackendError::Kind::kProtocol, std::string("malformed JSON reply: ") + e.what());
    }
  }

  RemoteConfig config_;
  detail::Endpoint endpoint_;
};

/// Chat-completion client: one user message whose content parts are the
/// prompt text followed by every attachment as an inline image URL.
class RemoteClient final : public Generator {
 public:
  explicit RemoteClient(RemoteConfig config) : http_(std::move(config)) {}

  static nlohmann::json request_body(const GeneratorRequest& request, const std::string& model) {
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt.text}});
    for (const auto& uri : request.prompt.attachments) {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", detail::image_url(uri)}}}});
    }
    return {
        {"model", request.model_id.empty() ? model : request.model_id},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_units},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
    };
  }

  GeneratorResponse generate(const GeneratorRequest& request) override {
    if (request.prompt.attachments.size() > http_.config().payload_limit) {
      throw BackendError(BackendError::Kind::kPayloadTooLarge,
                         std::to_string(request.prompt.attachments.size()) +
                             " images exceed the limit of " +
                             std::to_string(http_.config().payload_limit));
    }
    const auto body = request_body(request, http_.config().model);
    const auto started = std::chrono::steady_clock::now();
    const auto reply =
        http_.post("/chat/completions", body, {{"X-Prompt-Digest", request.prompt.digest}});
    const std::chrono::duration<double> latency = std::chrono::steady_clock::now() - started;
    try {
      const auto& message = reply.at("choices").at(0).at("message");
      const auto& content = message.at("content");
      std::string text;
      if (content.is_string()) {
        text = content.get<std::string>();
      } else if (content.is_array()) {
        for (const auto& part : content) {
          if (part.value("type", "") == "text") text += part.value("text", "");
        }
      }
      return {std::move(text), Seconds(latency.count()), reply.value("model", std::string(body["model"]))};
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(BackendError::Kind::kProtocol,
                         std::string("unexpected chat-completion reply: ") + e.what());
    }
  }

 private:
  JsonHttpClient http_;
};

}  // namespace commentary

#endif  // COMMENTARY_BACKEND_HPP
