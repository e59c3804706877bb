// Copyright 2026 The edgefuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <optional>

#include "CLI11.hpp"
#include "edgefuzz/pipeline.h"

namespace edgefuzz::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<size_t> threads;
  bool verbose = false;

  std::string src, macros, ext;
  std::string blocks, cases, corpus, programs, apis;
  std::string llm_config;
  std::string output;
  std::string work_dir;
  std::string stages;
  std::string format = "text";
};

pipeline::PipelineConfig BaseConfig(const Flags &f) {
  pipeline::PipelineConfig c =
      f.config.empty() ? pipeline::PipelineConfig{} : pipeline::PipelineConfig::Load(f.config);
  if (!f.work_dir.empty()) {
    const auto keep = c.paths;
    c.paths = pipeline::ArtifactPaths::Under(f.work_dir);
    c.paths.src = keep.src;
    c.paths.apis = keep.apis;
  }
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (!f.src.empty()) c.paths.src = f.src;
  if (!f.apis.empty()) c.paths.apis = f.apis;
  if (!f.blocks.empty()) c.paths.blocks = f.blocks;
  if (!f.cases.empty()) c.paths.cases = f.cases;
  if (!f.corpus.empty()) c.paths.corpus = f.corpus;
  if (!f.programs.empty()) c.paths.programs = f.programs;
  if (!f.macros.empty()) c.miner.macros = Split(f.macros, ',');
  if (!f.ext.empty()) c.miner.extensions = Split(f.ext, ',');
  if (!f.llm_config.empty()) c.llm = pipeline::LoadLlmConfig(f.llm_config);
  c.Finalize();
  return c;
}

// Single-stage runs keep their call ledger beside their output file or
// directory.
fs::path LedgerBeside(const fs::path &output) {
  auto p = output.lexically_normal();
  if (!p.has_filename()) p = p.parent_path();
  const auto parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
  return parent / "llm_ledger.json";
}

void PrintWarnings(const WarningLog &warnings, bool verbose, std::ostream &err) {
  const auto all = warnings.Snapshot();
  if (all.empty()) return;
  if (verbose) {
    for (const auto &w : all)
      err << "warning [" << w.stage << "] " << w.where << ": " << w.message << "\n";
  } else {
    err << all.size() << " warning(s); rerun with --verbose to list them\n";
  }
}

}  // namespace

int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  Flags f;
  CLI::App app{"edgefuzz: edge-case guided API fuzzing", "edgefuzz"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", f.config, "JSON config file");
  app.add_option("--seed", f.seed, "Seed for every random choice");
  app.add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  app.add_flag("-v,--verbose", f.verbose, "List every warning");

  auto *mine = app.add_subcommand("mine", "Extract check blocks from a native source tree");
  mine->add_option("--src", f.src, "Source tree root");
  mine->add_option("--macros", f.macros, "Comma-separated check macros");
  mine->add_option("--ext", f.ext, "Comma-separated file extensions");
  mine->add_option("-o,--output", f.output, "blocks.jsonl");

  auto *analyze = app.add_subcommand("analyze", "Ask the LLM for context edge cases");
  analyze->add_option("--blocks", f.blocks, "blocks.jsonl");
  analyze->add_option("--llm-config", f.llm_config, "LLM config JSON");
  analyze->add_option("-o,--output", f.output, "cases.jsonl");

  auto *standardize = app.add_subcommand("standardize", "Build the context-free corpus");
  standardize->add_option("--cases", f.cases, "cases.jsonl");
  standardize->add_option("-o,--output", f.output, "corpus.jsonl");

  auto *gen = app.add_subcommand("gen", "Synthesize initial programs");
  gen->add_option("--apis", f.apis, "API catalog JSON");
  gen->add_option("--llm-config", f.llm_config, "LLM config JSON");
  gen->add_option("-o,--output", f.output, "Program directory");

  auto *fuzz = app.add_subcommand("fuzz", "Mutate programs with matched edge cases");
  fuzz->add_option("--apis", f.apis, "API catalog JSON");
  fuzz->add_option("--corpus", f.corpus, "corpus.jsonl");
  fuzz->add_option("--programs", f.programs, "Program directory from gen");
  fuzz->add_option("--llm-config", f.llm_config, "LLM config JSON");
  fuzz->add_option("-o,--output", f.output, "Report directory");

  auto *report = app.add_subcommand("report", "Render the report for a work directory");
  report->add_option("--work-dir", f.work_dir, "Work directory of a run");
  report->add_option("--apis", f.apis, "API catalog JSON");
  report->add_option("--format", f.format, "json or text")->check(CLI::IsMember({"json", "text"}));
  report->add_option("-o,--output", f.output, "Write the report here instead of stdout");

  auto *run = app.add_subcommand("run", "Run pipeline stages in order");
  run->add_option("--work-dir", f.work_dir, "Directory for every artifact");
  run->add_option("--stages", f.stages, "Comma-separated subset of mine,analyze,standardize,gen,fuzz");
  run->add_option("--src", f.src, "Source tree root");
  run->add_option("--apis", f.apis, "API catalog JSON");
  run->add_option("--llm-config", f.llm_config, "LLM config JSON");
  run->add_option("--format", f.format, "json or text")->check(CLI::IsMember({"json", "text"}));

  std::vector<std::string> argv_store = {"edgefuzz"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char *> argv;
  for (auto &a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  WarningLog warnings;
  try {
    auto config = BaseConfig(f);
    if (mine->parsed()) {
      if (!f.output.empty()) config.paths.blocks = f.output;
      const int n = pipeline::RunMine(config, &warnings);
      out << "mine: " << n << " check blocks -> " << config.paths.blocks.string() << "\n";
    } else if (analyze->parsed()) {
      if (!f.output.empty()) {
        config.paths.cases = f.output;
        config.paths.ledger = LedgerBeside(f.output);
      }
      const int n = pipeline::RunAnalyze(config, &warnings, nullptr);
      out << "analyze: " << n << " context edge cases -> " << config.paths.cases.string() << "\n";
    } else if (standardize->parsed()) {
      if (!f.output.empty()) config.paths.corpus = f.output;
      const int n = pipeline::RunStandardize(config, &warnings);
      out << "standardize: " << n << " corpus edge cases -> " << config.paths.corpus.string()
          << "\n";
    } else if (gen->parsed()) {
      if (!f.output.empty()) {
        config.paths.programs = f.output;
        config.paths.ledger = LedgerBeside(f.output);
      }
      const int n = pipeline::RunGen(config, &warnings, nullptr);
      out << "gen: " << n << " valid programs -> " << config.paths.programs.string() << "\n";
    } else if (fuzz->parsed()) {
      if (!f.output.empty()) {
        config.paths.reports = f.output;
        config.paths.ledger = LedgerBeside(f.output);
      }
      const int n = pipeline::RunFuzz(config, &warnings, nullptr);
      out << "fuzz: " << n << " unique bugs -> " << (config.paths.reports / "bugs.jsonl").string()
          << "\n";
    } else if (report->parsed()) {
      auto r = pipeline::CollectReport(config.paths);
      if (fs::exists(config.paths.run_report)) {
        const auto prior = pipeline::ReportFromJson(
            nlohmann::json::parse(ReadFile(config.paths.run_report)));
        r.stages = prior.stages;
        r.seed = prior.seed;
        r.wall_time_s = prior.wall_time_s;
      }
      const auto text = pipeline::EmitReport(r, pipeline::ParseReportFormat(f.format));
      if (f.output.empty()) {
        out << text;
      } else {
        WriteFile(f.output, text);
      }
    } else if (run->parsed()) {
      std::vector<pipeline::Stage> stages = pipeline::AllStages();
      if (!f.stages.empty()) {
        stages.clear();
        for (const auto &s : Split(f.stages, ',')) stages.push_back(pipeline::ParseStage(Trim(s)));
      }
      const auto result = pipeline::RunPipeline(config, stages, &warnings);
      out << pipeline::EmitReport(result.report, pipeline::ParseReportFormat(f.format));
    }
  } catch (const ConfigError &e) {
    PrintWarnings(warnings, f.verbose, err);
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception &e) {
    // Environment errors, unreachable backends and anything unexpected.
    PrintWarnings(warnings, f.verbose, err);
    err << "error: " << e.what() << "\n";
    return kExitEnvironment;
  }
  PrintWarnings(warnings, f.verbose, err);
  return kExitOk;
}

}  // namespace edgefuzz::cli
