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

// Stage orchestration and run reports. Stages talk to each other only
// through their file artifacts, so each one can be rerun on its own.
#ifndef EDGEFUZZ_PIPELINE_H_
#define EDGEFUZZ_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/analyzer.h"
#include "edgefuzz/common.h"
#include "edgefuzz/harness.h"
#include "edgefuzz/llm.h"
#include "edgefuzz/miner.h"
#include "edgefuzz/mutator.h"
#include "edgefuzz/synthesizer.h"

namespace edgefuzz::pipeline {

enum class Stage { kMine, kAnalyze, kStandardize, kGen, kFuzz };
std::string_view ToString(Stage s);
Stage ParseStage(std::string_view name);  // throws ConfigError
std::vector<Stage> AllStages();

// Where each stage reads and writes. Defaults hang off one work directory.
struct ArtifactPaths {
  std::filesystem::path src;      // native source tree (mine input)
  std::filesystem::path apis;     // catalog JSON (gen, fuzz input)
  std::filesystem::path blocks;   // blocks.jsonl
  std::filesystem::path cases;    // cases.jsonl
  std::filesystem::path corpus;   // corpus.jsonl
  std::filesystem::path programs; // programs/ with synthesis_report.json
  std::filesystem::path reports;  // reports/ with bugs.jsonl, outcomes.jsonl
  std::filesystem::path ledger;   // per-stage LLM call counts
  std::filesystem::path run_report;

  static ArtifactPaths Under(const std::filesystem::path &work_dir);
};

struct PipelineConfig {
  uint64_t seed = 0;
  size_t threads = 0;  // 0 = hardware concurrency; applies to every stage
  ArtifactPaths paths = ArtifactPaths::Under("edgefuzz-out");
  miner::MinerConfig miner;
  int analyzer_retries = 1;
  llm::GatewayConfig llm;
  harness::TargetConfig target;
  mutate::SelectionPolicy policy;
  synth::SynthesisConfig synthesis;

  // Blocks: seed, threads, work_dir, src, apis, miner, analyzer, llm,
  // target, policy, synthesis. Relative paths resolve against base_dir.
  static PipelineConfig FromJson(const nlohmann::json &j, const std::filesystem::path &base_dir);
  // Throws ConfigError for a missing or malformed file.
  static PipelineConfig Load(const std::filesystem::path &path);

  // Propagates seed and threads into the stage configs.
  void Finalize();
};

// Reads an `llm` block from `path`; the whole file is the block when it has
// no `llm` key.
llm::GatewayConfig LoadLlmConfig(const std::filesystem::path &path);

struct DebugSuccessRow {
  int succeeded = 0;
  int failed = 0;
  std::optional<double> rate() const;
  friend bool operator==(const DebugSuccessRow &, const DebugSuccessRow &) = default;
};

struct RunReport {
  std::vector<std::string> stages;
  uint64_t seed = 0;
  int blocks = 0;
  int context_cases = 0;
  int corpus_cases = 0;
  int api_total = 0;
  int api_covered = 0;
  std::map<std::string, int> llm_calls_by_stage;  // analysis, generation, debug, mutation
  DebugSuccessRow debug_success;
  int fuzz_tasks = 0;
  std::map<std::string, int> bugs_by_class;  // four bug classes, unique bugs
  int hangs = 0;
  int graceful_rejections = 0;
  double wall_time_s = 0;

  int llm_calls_total() const;
  int bugs_total() const;
  friend bool operator==(const RunReport &, const RunReport &) = default;
};

nlohmann::ordered_json ReportToJson(const RunReport &report);
RunReport ReportFromJson(const nlohmann::json &j);

enum class ReportFormat { kJson, kText };
ReportFormat ParseReportFormat(std::string_view name);  // throws ConfigError
std::string EmitReport(const RunReport &report, ReportFormat format);

// Rebuilds the report from whatever artifacts exist under `paths`.
RunReport CollectReport(const ArtifactPaths &paths);

// Per-stage call ledgers, keyed by stage name. A stage that runs again
// replaces its entry.
std::map<std::string, llm::CallLedger> ReadLedgers(const std::filesystem::path &path);
void WriteLedger(const std::filesystem::path &path, Stage stage, const llm::CallLedger &ledger);

// Individual stages. Each checks its inputs first and throws ConfigError
// naming the missing file or flag.
int RunMine(const PipelineConfig &config, WarningLog *warnings);
int RunAnalyze(const PipelineConfig &config, WarningLog *warnings, llm::CallLedger *ledger);
int RunStandardize(const PipelineConfig &config, WarningLog *warnings);
int RunGen(const PipelineConfig &config, WarningLog *warnings, llm::CallLedger *ledger);
int RunFuzz(const PipelineConfig &config, WarningLog *warnings, llm::CallLedger *ledger);

struct PipelineResult {
  RunReport report;
  llm::CallLedger ledger;  // calls made by this invocation
};

// Runs `stages` in pipeline order, then writes and returns the report.
PipelineResult RunPipeline(const PipelineConfig &config, const std::vector<Stage> &stages,
                           WarningLog *warnings = nullptr);

}  // namespace edgefuzz::pipeline

#endif  // EDGEFUZZ_PIPELINE_H_
