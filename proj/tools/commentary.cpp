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

// Command-line front end: generate, evaluate and sweep.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commentary/cli.hpp"

namespace {

using namespace commentary;
namespace fs = std::filesystem;

struct RunFlags {
  std::vector<std::string> manifests;
  std::string strategy = "feedback";
  double step = 2.0;
  int shots = -1;
  std::size_t window_cap = 30;
  std::string backend = "remote";
  std::string cache = "off";
  std::string cache_dir;
  std::string out;
  std::uint64_t seed = 0;
  std::string templates = "race-en";
  std::string demos;
  std::string language = "en";
  std::string rate_model;
  std::size_t jobs = 4;
  bool force = false;
  std::string clock = "sim";
  std::string model;
  double temperature = 0.0;
  std::size_t max_tokens = 256;

  void attach(CLI::App* app) {
    app->add_option("--manifest", manifests, "Frame manifest(s); a directory adds every *.manifest in it")
        ->required();
    app->add_option("--strategy", strategy, "stateless | feedback | feedback-icl | realtime")
        ->check(CLI::IsMember({"stateless", "feedback", "feedback-icl", "realtime"}));
    app->add_option("--step", step, "Decision interval in seconds");
    app->add_option("--shots", shots, "ICL demonstrations (feedback-icl; default 8)");
    app->add_option("--window-cap", window_cap, "Max frames per realtime window");
    app->add_option("--backend", backend, "remote | scripted:<file> | oracle:<file-or-dir>");
    app->add_option("--cache", cache, "record | replay | off")->check(CLI::IsMember({"record", "replay", "off"}));
    app->add_option("--cache-dir", cache_dir, "Replay cache directory");
    app->add_option("--out", out, "Output directory")->required();
    app->add_option("--seed", seed, "Seed for demonstration sampling");
    app->add_option("--templates", templates, "race-en | race-ja | fight-ja | <init-file>,<decision-file>");
    app->add_option("--demos", demos, "Demonstration file (uri<TAB>utterance)");
    app->add_option("--language", language, "en | ja");
    app->add_option("--rate-model", rate_model, "e.g. en:word:4,ja:character:8");
    app->add_option("--jobs", jobs, "Videos processed concurrently");
    app->add_flag("--force", force, "Overwrite existing traces");
    app->add_option("--clock", clock, "sim | wall")->check(CLI::IsMember({"sim", "wall"}));
    app->add_option("--model", model, "Model id override for the remote backend");
    app->add_option("--temperature", temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));
    app->add_option("--max-tokens", max_tokens, "Max output tokens per reply");
  }

  cli::RunConfig build() const {
    cli::RunConfig config;
    for (const auto& m : manifests) {
      if (fs::is_directory(m)) {
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(m)) {
          if (e.path().extension() == ".manifest") found.push_back(e.path());
        }
        std::sort(found.begin(), found.end());
        config.manifests.insert(config.manifests.end(), found.begin(), found.end());
      } else {
        config.manifests.emplace_back(m);
      }
    }
    const auto kind = parse_strategy(strategy);
    config.strategy = StrategyConfig::defaults(kind, parse_language(language));
    config.strategy.step = Seconds(step);
    config.strategy.window_cap = window_cap;
    if (shots >= 0) config.strategy.icl_shots = static_cast<std::size_t>(shots);
    if (!rate_model.empty()) config.strategy.rate_model = SpeechRateModel::parse(rate_model);
    config.templates = templates;
    if (!demos.empty()) config.demonstrations = fs::path(demos);
    config.backend = cli::BackendSpec::parse(backend);
    config.cache_mode = cli::parse_cache_mode(cache);
    config.cache_dir = cache_dir;
    config.out_dir = out;
    config.seed = seed;
    config.jobs = jobs;
    config.force = force;
    config.wall_clock = clock == "wall";
    config.params.model_id = model;
    config.params.temperature = temperature;
    config.params.max_output_units = max_tokens;
    return config;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pause-aware video commentary generation and evaluation"};
  app.require_subcommand(1);

  RunFlags gen_flags;
  auto* generate = app.add_subcommand("generate", "Run commentary sessions over frame manifests");
  gen_flags.attach(generate);

  std::string gen_dir, ref_dir, scorer = "token-f1", report_dir, eval_language = "en", eval_rates;
  auto* evaluate = app.add_subcommand("evaluate", "Score generated tracks against references");
  evaluate->add_option("gen_dir", gen_dir, "Directory of generated .trace/.srt files")->required();
  evaluate->add_option("ref_dir", ref_dir, "Directory of reference .srt/.tsv/.trace files")->required();
  evaluate->add_option("--scorer", scorer, "token-f1 | exact | embedding")
      ->check(CLI::IsMember({"token-f1", "exact", "embedding"}));
  evaluate->add_option("--report-dir", report_dir, "Write <video_id>.report.tsv files here");
  evaluate->add_option("--language", eval_language, "Language of references without a trace");
  evaluate->add_option("--rate-model", eval_rates, "Speech rates for transcript references");

  RunFlags sweep_flags;
  std::vector<double> steps{1, 2, 5, 10};
  std::string refs;
  auto* sweep = app.add_subcommand("sweep", "Tabulate timing alignment against step size");
  sweep_flags.attach(sweep);
  sweep->add_option("--steps", steps, "Step sizes in seconds")->delimiter(',');
  sweep->add_option("--refs", refs, "Reference directory (defaults to the oracle directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : cli::kConfigError;
  }

  try {
    if (generate->parsed()) return cli::cmd_generate(gen_flags.build(), std::cerr);
    if (evaluate->parsed()) {
      cli::EvaluateOptions options;
      options.scorer = scorer;
      if (!report_dir.empty()) options.report_dir = fs::path(report_dir);
      options.language = parse_language(eval_language);
      if (!eval_rates.empty()) options.rates = SpeechRateModel::parse(eval_rates);
      return cli::cmd_evaluate(gen_dir, ref_dir, options, std::cout, std::cerr);
    }
    if (sweep->parsed()) {
      return cli::cmd_sweep(sweep_flags.build(), steps,
                            refs.empty() ? std::nullopt : std::optional<fs::path>(refs), std::cout,
                            std::cerr);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  }
  return cli::kConfigError;
}
