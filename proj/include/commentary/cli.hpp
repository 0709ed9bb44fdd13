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

#ifndef COMMENTARY_CLI_HPP
#define COMMENTARY_CLI_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "commentary/backend.hpp"
#include "commentary/eval.hpp"
#include "commentary/media.hpp"
#include "commentary/prompting.hpp"
#include "commentary/strategies.hpp"
#include "commentary/subtitles.hpp"
#include "commentary/trace.hpp"

namespace commentary::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kSuccess = 0, kConfigError = 1, kPartial = 2 };

struct BackendSpec {
  enum class Kind { kRemote, kScripted, kOracle };
  Kind kind = Kind::kRemote;
  fs::path path;

  /// remote | scripted:<path> | oracle:<path>
  static BackendSpec parse(const std::string& spec) {
    if (spec == "remote") return {Kind::kRemote, {}};
    if (spec.rfind("scripted:", 0) == 0) return {Kind::kScripted, spec.substr(9)};
    if (spec.rfind("oracle:", 0) == 0) return {Kind::kOracle, spec.substr(7)};
    throw InvalidArgument("cli: backend must be remote, scripted:<path> or oracle:<path>, got '" + spec + "'");
  }
};

struct RunConfig {
  std::vector<fs::path> manifests;
  StrategyConfig strategy;
  std::string templates = "race-en";  // built-in family or "<init-file>,<decision-file>"
  std::optional<fs::path> demonstrations;
  BackendSpec backend;
  CacheMode cache_mode = CacheMode::kPassthrough;
  fs::path cache_dir;
  fs::path out_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = 4;
  bool force = false;
  bool wall_clock = false;
  GenerationParams params;

  void validate() const {
    if (manifests.empty()) throw InvalidArgument("cli: no manifests given");
    if (out_dir.empty()) throw InvalidArgument("cli: --out is required");
    if (cache_mode != CacheMode::kPassthrough) {
      if (cache_dir.empty()) throw InvalidArgument("cli: --cache-dir is required with --cache");
      if (fs::weakly_canonical(cache_dir) == fs::weakly_canonical(out_dir)) {
        throw InvalidArgument("cli: output and cache directories must differ");
      }
    }
    strategy.validate();
  }
};

inline CacheMode parse_cache_mode(const std::string& mode) {
  if (mode == "record") return CacheMode::kRecord;
  if (mode == "replay") return CacheMode::kReplay;
  if (mode == "off" || mode == "passthrough") return CacheMode::kPassthrough;
  throw InvalidArgument("cli: cache mode must be record, replay or off");
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cli: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error("cli: cannot write '" + path.string() + "'");
}

/// Loads a track from a .trace, .srt or .tsv transcript. `duration`, when
/// known, must agree with any duration the file declares.
inline CommentaryTrack load_track_file(const fs::path& path, const std::string& video_id,
                                       std::optional<Seconds> duration, Language language,
                                       const SpeechRateModel& rates) {
  const auto ext = path.extension().string();
  const auto check = [&](Seconds declared) {
    if (duration && std::abs(duration->value() - declared.value()) > 1e-9) {
      throw InvalidArgument("eval: duration mismatch for '" + video_id + "' (" +
                            std::to_string(declared.value()) + " s in " + path.string() + " vs " +
                            std::to_string(duration->value()) + " s)");
    }
  };
  if (ext == ".trace") {
    const auto trace = load_trace(path);
    check(trace.video_duration);
    auto track = trace.track();
    return CommentaryTrack(video_id, track.video_duration(), track.utterances());
  }
  if (ext == ".srt") {
    std::vector<std::string> warnings;
    const auto entries = parse_srt(read_file(path), &warnings);
    Seconds d = duration.value_or(Seconds(0));
    if (!duration) {
      for (const auto& e : entries) d = std::max(d, e.end);
    }
    return track_from_srt(entries, video_id, d, language);
  }
  if (ext == ".tsv") {
    std::ifstream in(path);
    if (!in) throw ParseError("cli: cannot open '" + path.string() + "'");
    const auto transcript = parse_transcript(in, path.string());
    if (transcript.duration) check(*transcript.duration);
    Seconds d = duration ? *duration : transcript.duration.value_or(Seconds(0));
    if (!duration && !transcript.duration) {
      for (const auto& [start, text] : transcript.lines) {
        d = std::max(d, start + estimate_duration(text, language, rates));
      }
    }
    return track_from_transcript(transcript, video_id, d, language, rates);
  }
  throw InvalidArgument("cli: unsupported track file '" + path.string() + "'");
}

/// Track files in a directory keyed by video id; .trace wins over .srt over .tsv.
inline std::map<std::string, fs::path> list_tracks(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("cli: '" + dir.string() + "' is not a directory");
  const auto rank = [](const fs::path& p) {
    const auto e = p.extension();
    return e == ".trace" ? 0 : e == ".srt" ? 1 : e == ".tsv" ? 2 : 3;
  };
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    const auto name = p.filename().string();
    if (rank(p) == 3 || name.ends_with(".report.tsv") || name == "sweep.tsv") continue;
    const auto id = p.stem().string();
    auto it = out.find(id);
    if (it == out.end() || rank(p) < rank(it->second)) out[id] = p;
  }
  return out;
}

inline PromptSet load_prompts(const RunConfig& config) {
  PromptSet prompts;
  if (const auto comma = config.templates.find(','); comma != std::string::npos) {
    prompts.init = load_template(config.templates.substr(0, comma));
    prompts.decision = load_template(config.templates.substr(comma + 1));
  } else {
    prompts = PromptSet::builtin(config.templates);
  }
  if (prompts.init.kind != TemplateKind::kInit || prompts.decision.kind != TemplateKind::kDecision) {
    throw InvalidArgument("cli: --templates needs an init template then a decision template");
  }
  if (prompts.init.language != config.strategy.language ||
      prompts.decision.language != config.strategy.language) {
    throw InvalidArgument("cli: template language differs from --language");
  }
  if (config.demonstrations) prompts.demonstrations = load_demonstrations(*config.demonstrations);
  if (config.strategy.kind == StrategyKind::kFeedbackIcl &&
      prompts.demonstrations.size() < config.strategy.icl_shots) {
    throw InvalidArgument("cli: feedback-icl needs " + std::to_string(config.strategy.icl_shots) +
                          " demonstrations, --demos provides " + std::to_string(prompts.demonstrations.size()));
  }
  return prompts;
}

inline std::shared_ptr<Generator> make_backend(const RunConfig& config,
                                               const std::vector<FrameStore>& stores) {
  std::shared_ptr<Generator> backend;
  // Replay answers from disk only; the configured backend is never built.
  if (config.cache_mode == CacheMode::kReplay) {
    return std::make_shared<ConcurrencyLimit>(
        std::make_shared<ReplayCache>(nullptr, config.cache_dir, CacheMode::kReplay), 4);
  }
  switch (config.backend.kind) {
    case BackendSpec::Kind::kScripted:
      backend = std::make_shared<ScriptedBackend>(load_script(config.backend.path));
      break;
    case BackendSpec::Kind::kOracle: {
      const auto& path = config.backend.path;
      const auto& c = config.strategy;
      if (fs::is_directory(path)) {
        const auto files = list_tracks(path);
        std::vector<CommentaryTrack> refs;
        for (const auto& s : stores) {
          auto it = files.find(s.video_id());
          if (it == files.end()) {
            throw InvalidArgument("cli: oracle directory has no reference for '" + s.video_id() + "'");
          }
          refs.push_back(load_track_file(it->second, s.video_id(), s.video_duration(), c.language, c.rate_model));
        }
        backend = std::make_shared<OracleBackend>(std::move(refs));
      } else {
        backend = std::make_shared<OracleBackend>(OracleBackend::for_all(
            load_track_file(path, path.stem().string(), std::nullopt, c.language, c.rate_model)));
      }
      break;
    }
    case BackendSpec::Kind::kRemote: {
      auto remote = RemoteConfig::from_env();
      if (!remote) {
        throw InvalidArgument("cli: remote backend needs COMMENTARY_API_BASE and COMMENTARY_MODEL");
      }
      backend = std::make_shared<RemoteClient>(*remote);
      break;
    }
  }
  if (config.cache_mode != CacheMode::kPassthrough) {
    backend = std::make_shared<ReplayCache>(backend, config.cache_dir, config.cache_mode);
  }
  return std::make_shared<ConcurrencyLimit>(backend, 4);
}

inline std::vector<FrameStore> load_stores(const std::vector<fs::path>& manifests) {
  std::vector<FrameStore> stores;
  std::set<std::string> seen;
  for (const auto& m : manifests) {
    stores.push_back(load_manifest(m));
    if (!seen.insert(stores.back().video_id()).second) {
      throw InvalidArgument("cli: video id '" + stores.back().video_id() + "' appears twice");
    }
  }
  return stores;
}

/// Writes `<id>.srt`, `<id>.trace` and `run_summary.txt`. Exit 0 on success,
/// 1 on configuration or input errors (including replay cache misses), 2 when
/// a session was cut short.
inline int cmd_generate(const RunConfig& config, std::ostream& log) {
  std::vector<FrameStore> stores;
  PromptSet prompts;
  std::shared_ptr<Generator> backend;
  try {
    config.validate();
    stores = load_stores(config.manifests);
    prompts = load_prompts(config);
    fs::create_directories(config.out_dir);
    if (!config.force) {
      for (const auto& s : stores) {
        const auto trace = config.out_dir / (s.video_id() + ".trace");
        if (fs::exists(trace)) {
          throw InvalidArgument("cli: '" + trace.string() + "' exists; pass --force to overwrite");
        }
      }
    }
    backend = make_backend(config, stores);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    log << "error: cli: " << e.what() << '\n';
    return kConfigError;
  }

  std::vector<std::optional<GenerationRecord>> records(stores.size());
  std::vector<std::string> errors(stores.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < stores.size(); i = next++) {
      try {
        PromptSet session_prompts = prompts;
        if (config.strategy.kind == StrategyKind::kFeedbackIcl) {
          session_prompts.demonstrations = sample_demonstrations(
              prompts.demonstrations, config.strategy.icl_shots,
              config.seed ^ stable_hash(stores[i].video_id()));
        }
        std::unique_ptr<Clock> clock;
        if (config.wall_clock) {
          clock = std::make_unique<WallClock>();
        } else {
          clock = std::make_unique<SimulatedClock>();
        }
        records[i] = run_session(stores[i], config.strategy, *backend, *clock, session_prompts, config.params);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto jobs = std::max<std::size_t>(1, std::min(config.jobs, stores.size()));
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  int status = kSuccess;
  std::string summary = "#video_id\tstatus\tsteps\tutterances\n";
  for (std::size_t i = 0; i < stores.size(); ++i) {
    const auto& id = stores[i].video_id();
    if (!records[i]) {
      log << "error: " << errors[i] << '\n';
      summary += id + "\terror\t0\t0\n";
      status = kConfigError;
      continue;
    }
    const auto& record = *records[i];
    try {
      write_file(config.out_dir / (id + ".trace"), serialize_trace(record));
      write_file(config.out_dir / (id + ".srt"), to_srt(record.track));
    } catch (const Error& e) {
      log << "error: " << e.what() << '\n';
      return kConfigError;
    }
    summary += id + '\t' + (record.complete ? "complete" : "incomplete") + '\t' +
               std::to_string(record.steps.size()) + '\t' +
               std::to_string(record.track.utterances().size()) + '\n';
    if (!record.complete) {
      log << "error: " << id << ": " << record.failure << '\n';
      if (record.failure_kind == BackendError::Kind::kCacheMiss) {
        status = kConfigError;
      } else if (status == kSuccess) {
        status = kPartial;
      }
    }
  }
  write_file(config.out_dir / "run_summary.txt", summary);
  return status;
}

struct EvaluateOptions {
  std::string scorer = "token-f1";  // token-f1 | exact | embedding
  std::optional<fs::path> report_dir;
  Language language = Language::kEnglish;  // for reference files without a trace
  SpeechRateModel rates = SpeechRateModel::defaults();
  bool allow_extra_references = false;
};

inline std::unique_ptr<SimilarityScorer> make_scorer(const std::string& spec, Language language) {
  if (spec == "token-f1") return std::make_unique<TokenF1Scorer>(language);
  if (spec == "exact") return std::make_unique<ExactMatchScorer>();
  if (spec == "embedding") {
    auto remote = RemoteConfig::from_env();
    if (const char* model = std::getenv("COMMENTARY_EMBED_MODEL"); remote && model && *model) {
      remote->model = model;
    }
    if (!remote) throw InvalidArgument("cli: embedding scorer needs COMMENTARY_API_BASE and COMMENTARY_MODEL");
    return std::make_unique<EmbeddingScorer>(*remote);
  }
  throw InvalidArgument("cli: unknown scorer '" + spec + "'");
}

/// Evaluates every generated track against the reference with the same id.
/// Returns the per-video reports followed by the corpus row.
inline std::vector<EvalReport> evaluate_dirs(const fs::path& gen_dir, const fs::path& ref_dir,
                                             const EvaluateOptions& options) {
  const auto gen_files = list_tracks(gen_dir);
  const auto ref_files = list_tracks(ref_dir);
  std::vector<std::string> gen_only, ref_only;
  for (const auto& [id, _] : gen_files) {
    if (!ref_files.count(id)) gen_only.push_back(id);
  }
  for (const auto& [id, _] : ref_files) {
    if (!gen_files.count(id) && !options.allow_extra_references) ref_only.push_back(id);
  }
  if (!gen_only.empty() || !ref_only.empty()) {
    const auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
      return s.empty() ? std::string("none") : s;
    };
    throw InvalidArgument("cli: unmatched video ids; only generated: " + join(gen_only) +
                          "; only reference: " + join(ref_only));
  }
  if (gen_files.empty()) throw InvalidArgument("cli: no tracks in '" + gen_dir.string() + "'");

  std::vector<EvalReport> reports;
  for (const auto& [id, gen_path] : gen_files) {
    Language language = options.language;
    if (gen_path.extension() == ".trace") language = load_trace(gen_path).config.language;
    const auto& ref_path = ref_files.at(id);
    std::optional<Seconds> duration;
    if (gen_path.extension() == ".trace") duration = load_trace(gen_path).video_duration;
    else if (ref_path.extension() == ".trace") duration = load_trace(ref_path).video_duration;
    auto gen = load_track_file(gen_path, id, duration, language, options.rates);
    auto ref = load_track_file(ref_path, id, gen.video_duration(), language, options.rates);
    // Generated SRT without a trace gets the reference's span.
    if (!duration && gen.video_duration() != ref.video_duration()) {
      const Seconds d = std::max(gen.video_duration(), ref.video_duration());
      gen = CommentaryTrack(id, d, gen.utterances());
      ref = CommentaryTrack(id, d, ref.utterances());
    }
    const auto scorer = make_scorer(options.scorer, language);
    reports.push_back(evaluate(gen, ref, *scorer));
  }
  reports.push_back(corpus_report(reports));
  return reports;
}

inline int cmd_evaluate(const fs::path& gen_dir, const fs::path& ref_dir,
                        const EvaluateOptions& options, std::ostream& out, std::ostream& log) {
  std::vector<EvalReport> reports;
  try {
    reports = evaluate_dirs(gen_dir, ref_dir, options);
    if (options.report_dir) fs::create_directories(*options.report_dir);
    for (const auto& r : reports) {
      out << report_text(r) << '\n';
      if (options.report_dir) {
        write_file(*options.report_dir / (r.video_id + ".report.tsv"), report_tsv(r, options.scorer));
      }
    }
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    log << "error: cli: " << e.what() << '\n';
    return kConfigError;
  }
  return kSuccess;
}

struct SweepRow {
  double step = 0.0;
  double stateless = 0.0;
  double feedback = 0.0;
  double realtime = 0.0;
  double avg() const { return (stateless + feedback + realtime) / 3.0; }
};

inline std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = "step\tstateless\tfeedback\treal-time\tavg\n";
  for (const auto& r : rows) {
    out += format_number(r.step) + '\t' + detail::fmt_metric(r.stateless) + '\t' +
           detail::fmt_metric(r.feedback) + '\t' + detail::fmt_metric(r.realtime) + '\t' +
           detail::fmt_metric(r.avg()) + '\n';
  }
  return out;
}

/// Generates and evaluates each step size with the stateless, feedback and
/// realtime strategies, then tabulates corpus alignment. References come from
/// `refs`, or from the oracle backend's directory.
inline int cmd_sweep(const RunConfig& base, const std::vector<double>& steps,
                     std::optional<fs::path> refs, std::ostream& out, std::ostream& log) {
  if (steps.empty()) {
    log << "error: cli: --steps is empty\n";
    return kConfigError;
  }
  for (double s : steps) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      log << "error: cli: step sizes must be positive, got " << s << '\n';
      return kConfigError;
    }
  }
  if (!refs && base.backend.kind == BackendSpec::Kind::kOracle && fs::is_directory(base.backend.path)) {
    refs = base.backend.path;
  }
  if (!refs) {
    log << "error: cli: sweep needs --refs (or an oracle backend directory)\n";
    return kConfigError;
  }

  std::vector<SweepRow> rows;
  int status = kSuccess;
  for (double s : steps) {
    SweepRow row{s};
    for (auto kind : {StrategyKind::kStateless, StrategyKind::kFeedback, StrategyKind::kRealtime}) {
      RunConfig config = base;
      config.strategy.kind = kind;
      config.strategy.icl_shots = 0;
      config.strategy.step = Seconds(s);
      config.out_dir = base.out_dir / ("step_" + format_number(s)) / std::string(to_string(kind));
      const int rc = cmd_generate(config, log);
      if (rc == kConfigError) return rc;
      if (rc == kPartial) status = kPartial;
      EvaluateOptions options;
      options.language = config.strategy.language;
      options.rates = config.strategy.rate_model;
      options.allow_extra_references = true;
      double alignment = 0.0;
      try {
        alignment = evaluate_dirs(config.out_dir, *refs, options).back().alignment;
      } catch (const Error& e) {
        log << "error: " << e.what() << '\n';
        return kConfigError;
      }
      (kind == StrategyKind::kStateless ? row.stateless
       : kind == StrategyKind::kFeedback ? row.feedback
                                         : row.realtime) = alignment;
    }
    rows.push_back(row);
  }
  const auto table = sweep_table(rows);
  out << table;
  try {
    write_file(base.out_dir / "sweep.tsv", table);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return status;
}

}  // namespace commentary::cli

#endif  // COMMENTARY_CLI_HPP
