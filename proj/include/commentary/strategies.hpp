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

#ifndef COMMENTARY_STRATEGIES_HPP
#define COMMENTARY_STRATEGIES_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "commentary/backend.hpp"
#include "commentary/core.hpp"
#include "commentary/media.hpp"
#include "commentary/prompting.hpp"
#include "commentary/text.hpp"

namespace commentary {

enum class StrategyKind { kStateless, kFeedback, kFeedbackIcl, kRealtime };

inline std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kStateless: return "stateless";
    case StrategyKind::kFeedback: return "feedback";
    case StrategyKind::kFeedbackIcl: return "feedback-icl";
    case StrategyKind::kRealtime: return "realtime";
  }
  return "?";
}

inline StrategyKind parse_strategy(std::string_view name) {
  for (auto kind : {StrategyKind::kStateless, StrategyKind::kFeedback, StrategyKind::kFeedbackIcl,
                    StrategyKind::kRealtime}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("strategies: unknown strategy '" + std::string(name) + "'");
}

inline bool is_fixed_interval(StrategyKind kind) { return kind != StrategyKind::kRealtime; }

inline std::string_view to_string(UnitKind unit) {
  return unit == UnitKind::kWord ? "word" : "character";
}

/// Fixed speaking rate per language, in words or characters per second.
class SpeechRateModel {
 public:
  struct Rate {
    UnitKind unit;
    double per_second;
    friend bool operator==(const Rate&, const Rate&) = default;
  };

  /// 4 words/s for English, 8 characters/s for Japanese.
  static SpeechRateModel defaults() {
    SpeechRateModel model;
    model.set(Language::kEnglish, {UnitKind::kWord, 4.0});
    model.set(Language::kJapanese, {UnitKind::kCharacter, 8.0});
    return model;
  }

  /// "en:word:4,ja:character:8"
  static SpeechRateModel parse(std::string_view spec) {
    SpeechRateModel model;
    std::stringstream ss{std::string(spec)};
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (detail::trim(item).empty()) continue;
      const auto a = item.find(':');
      const auto b = a == std::string::npos ? a : item.find(':', a + 1);
      if (b == std::string::npos) {
        throw InvalidArgument("strategies: rate entry '" + item + "' is not lang:unit:rate");
      }
      const auto unit = item.substr(a + 1, b - a - 1);
      if (unit != "word" && unit != "character") {
        throw InvalidArgument("strategies: rate unit must be word or character, got '" + unit + "'");
      }
      const auto rate = detail::parse_double(std::string_view(item).substr(b + 1));
      if (!rate) throw InvalidArgument("strategies: bad rate in '" + item + "'");
      model.set(parse_language(detail::trim(item.substr(0, a))),
                {unit == "word" ? UnitKind::kWord : UnitKind::kCharacter, *rate});
    }
    return model;
  }

  void set(Language language, Rate rate) {
    if (!(rate.per_second > 0.0) || !std::isfinite(rate.per_second)) {
      throw InvalidArgument("strategies: speech rate must be positive");
    }
    rates_[language] = rate;
  }

  const Rate& at(Language language) const {
    auto it = rates_.find(language);
    if (it == rates_.end()) {
      throw InvalidArgument("strategies: no speech rate configured for '" +
                            std::string(to_string(language)) + "'");
    }
    return it->second;
  }

  const std::map<Language, Rate>& rates() const { return rates_; }

  std::string to_spec() const {
    std::string out;
    for (const auto& [language, rate] : rates_) {
      if (!out.empty()) out += ',';
      std::ostringstream r;
      r << rate.per_second;
      out += std::string(to_string(language)) + ":" + std::string(to_string(rate.unit)) + ":" + r.str();
    }
    return out;
  }

  friend bool operator==(const SpeechRateModel&, const SpeechRateModel&) = default;

 private:
  std::map<Language, Rate> rates_;
};

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kFeedback;
  Seconds step{2.0};
  std::size_t window_cap = 30;
  std::size_t icl_shots = 0;
  SpeechRateModel rate_model = SpeechRateModel::defaults();
  Language language = Language::kEnglish;
  std::optional<std::size_t> max_history;  // unlimited when unset

  static StrategyConfig defaults(StrategyKind kind, Language language = Language::kEnglish) {
    StrategyConfig config;
    config.kind = kind;
    config.language = language;
    config.icl_shots = kind == StrategyKind::kFeedbackIcl ? 8 : 0;
    return config;
  }

  void validate() const {
    if (step.value() <= 0.0) throw InvalidArgument("strategies: step must be positive");
    if (window_cap == 0) throw InvalidArgument("strategies: window cap must be positive");
    if (icl_shots > 0 && kind != StrategyKind::kFeedbackIcl) {
      throw InvalidArgument("strategies: ICL shots are only valid for feedback-icl");
    }
    rate_model.at(language);
  }

  friend bool operator==(const StrategyConfig&, const StrategyConfig&) = default;
};

struct DecisionPoint {
  std::size_t index = 0;
  Seconds time;
  FrameWindow window;
  std::size_t history_len = 0;
};

struct SessionStep {
  DecisionPoint point;
  std::string digest;
  std::string raw_response;
  DecisionOutcome outcome;
  ResponseNote note = ResponseNote::kNone;
};

/// Full trace of one session. The track holds exactly the Speak outcomes, each
/// starting at its decision time.
struct GenerationRecord {
  std::string video_id;
  StrategyConfig config;
  std::vector<SessionStep> steps;
  CommentaryTrack track;
  bool complete = true;
  std::string failure;
  std::optional<BackendError::Kind> failure_kind;
};

/// d = w / r, with w counted in the language's configured unit.
inline Seconds estimate_duration(std::string_view text, Language language,
                                 const SpeechRateModel& rates) {
  const auto& rate = rates.at(language);
  const auto units = text::count_units(text, rate.unit);
  if (units == 0) throw InvalidArgument("strategies: cannot time an utterance with no words");
  return Seconds(static_cast<double>(units) / rate.per_second);
}

/// Fixed kinds poll every `step`. Realtime waits out the spoken utterance, but
/// never less than `step`, and polls every `step` after a Wait.
inline Seconds next_decision_time(const StrategyConfig& config, Seconds t,
                                  const DecisionOutcome& outcome) {
  if (config.kind == StrategyKind::kRealtime) {
    if (const auto* speak = std::get_if<Speak>(&outcome)) {
      return t + std::max(config.step, speak->utterance.est_duration());
    }
  }
  return t + config.step;
}

inline FrameWindow select_window(const StrategyConfig& config, const FrameStore& store, Seconds t,
                                 Seconds last_query) {
  if (config.kind == StrategyKind::kRealtime) {
    return frames_between(store, std::min(last_query, t), t, config.window_cap);
  }
  return frames_between(store, Seconds(std::max(0.0, t.value() - config.step.value())), t,
                        config.window_cap);
}

struct PromptSet {
  PromptTemplate init;
  PromptTemplate decision;
  std::vector<Demonstration> demonstrations;  // used by feedback-icl only

  static PromptSet builtin(std::string_view id) {
    return {templates::find(id, TemplateKind::kInit), templates::find(id, TemplateKind::kDecision), {}};
  }
};

struct GenerationParams {
  std::string model_id;
  std::size_t max_output_units = 256;
  double temperature = 0.0;
};

/// Runs one video from t = 0 until the next decision would fall after the end.
/// A backend failure stops the session and leaves the record incomplete.
inline GenerationRecord run_session(const FrameStore& store, const StrategyConfig& config,
                                    Generator& backend, Clock& clock, const PromptSet& prompts,
                                    const GenerationParams& params = {}) {
  config.validate();
  prompts.init.validate();
  prompts.decision.validate();
  if (prompts.init.kind != TemplateKind::kInit || prompts.decision.kind != TemplateKind::kDecision) {
    throw InvalidArgument("strategies: prompt set needs an init and a decision template");
  }

  const Seconds duration = store.video_duration();
  GenerationRecord record{store.video_id(), config, {}, CommentaryTrack(store.video_id(), duration), true, {},
                          std::nullopt};
  std::vector<Demonstration> demos;
  if (config.kind == StrategyKind::kFeedbackIcl) {
    const auto n = std::min(config.icl_shots, prompts.demonstrations.size());
    demos.assign(prompts.demonstrations.begin(), prompts.demonstrations.begin() + static_cast<std::ptrdiff_t>(n));
  }

  Seconds scheduled{0.0};
  std::optional<Seconds> previous;
  for (std::size_t index = 0; scheduled <= duration; ++index) {
    clock.advance_to(scheduled);
    // A straggling backend call pushes the decision to "now", never earlier.
    const Seconds t = std::max(scheduled, clock.now());
    if (t > duration) break;

    DecisionPoint point{index, t, select_window(config, store, t, previous.value_or(Seconds(0))), 0};
    std::vector<std::string> history;
    if (config.kind != StrategyKind::kStateless) {
      const auto& said = record.track.utterances();
      const std::size_t keep = std::min(said.size(), config.max_history.value_or(said.size()));
      for (auto it = said.end() - static_cast<std::ptrdiff_t>(keep); it != said.end(); ++it) {
        history.push_back(it->text());
      }
    }
    point.history_len = history.size();

    RenderedPrompt prompt = index == 0 ? render_init(prompts.init, point.window)
                                       : render_decision(prompts.decision, history, demos, point.window);
    GeneratorRequest request{std::move(prompt), params.model_id, params.max_output_units,
                             params.temperature, store.video_id(), {index, t, previous}};
    GeneratorResponse response;
    try {
      response = backend.generate(request);
    } catch (const BackendError& e) {
      record.complete = false;
      record.failure = e.what();
      record.failure_kind = e.kind();
      break;
    }

    auto parsed = parse_response(response.raw_text, config.language);
    DecisionOutcome outcome = Wait{};
    if (!parsed.wait) {
      Seconds d = estimate_duration(parsed.text, config.language, config.rate_model);
      outcome = Speak{Utterance(std::move(parsed.text), config.language, t, d)};
      record.track.append(std::get<Speak>(outcome).utterance);
    }
    const Seconds next = is_fixed_interval(config.kind)
                             ? Seconds(static_cast<double>(index + 1) * config.step.value())
                             : next_decision_time(config, t, outcome);
    record.steps.push_back(SessionStep{std::move(point), request.prompt.digest,
                                       std::move(response.raw_text), std::move(outcome), parsed.note});
    previous = t;
    scheduled = next;
  }
  return record;
}

}  // namespace commentary

#endif  // COMMENTARY_STRATEGIES_HPP
