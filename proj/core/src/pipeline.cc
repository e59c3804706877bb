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

#include "edgefuzz/pipeline.h"

#include <stdlib.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <set>

#include "edgefuzz/catalog.h"
#include "edgefuzz/corpus.h"

namespace edgefuzz::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 5> kStageNames = {{
    {Stage::kMine, "mine"},
    {Stage::kAnalyze, "analyze"},
    {Stage::kStandardize, "standardize"},
    {Stage::kGen, "gen"},
    {Stage::kFuzz, "fuzz"},
}};

constexpr std::array<harness::OutcomeClass, 4> kBugClasses = {
    harness::OutcomeClass::kAbortSignal, harness::OutcomeClass::kSegfault,
    harness::OutcomeClass::kRuntimeErrorPattern, harness::OutcomeClass::kInconsistentOutput};

fs::path Resolve(const fs::path &p, const fs::path &base) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

std::string PathValue(const nlohmann::json &j, const char *key) {
  if (!j[key].is_string()) throw ConfigError(std::string(key) + " must be a path string");
  return j[key].get<std::string>();
}

std::vector<std::string> StringList(const nlohmann::json &j, const std::string &where) {
  if (!j.is_array()) throw ConfigError(where + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto &s : j) {
    if (!s.is_string() || s.get<std::string>().empty())
      throw ConfigError(where + " must be an array of non-empty strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

int CountRecords(const fs::path &path) {
  if (!fs::exists(path)) return 0;
  int n = 0;
  for (const auto &line : ReadLines(path)) n += !Trim(line).empty();
  return n;
}

nlohmann::json ParseJsonFile(const fs::path &path) {
  try {
    return nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void Require(const fs::path &path, const std::string &what) {
  if (path.empty() || !fs::exists(path)) throw ConfigError(what);
}

// Scratch directory for synthesis runs, removed on scope exit.
class ScratchDir {
 public:
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "edgefuzz-gen-XXXXXX").string();
    if (!mkdtemp(tmpl.data()))
      throw EnvironmentError(std::string("mkdtemp: ") + std::strerror(errno));
    path_ = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir &) = delete;
  ScratchDir &operator=(const ScratchDir &) = delete;
  const fs::path &path() const { return path_; }

 private:
  fs::path path_;
};

std::string Pad(const std::string &s, size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view ToString(Stage s) {
  for (const auto &[stage, name] : kStageNames)
    if (stage == s) return name;
  return "?";
}

Stage ParseStage(std::string_view name) {
  for (const auto &[stage, n] : kStageNames)
    if (n == name) return stage;
  throw ConfigError("unknown stage '" + std::string(name) +
                    "' (expected mine, analyze, standardize, gen or fuzz)");
}

std::vector<Stage> AllStages() {
  std::vector<Stage> out;
  for (const auto &[stage, name] : kStageNames) out.push_back(stage);
  return out;
}

ArtifactPaths ArtifactPaths::Under(const fs::path &work_dir) {
  ArtifactPaths p;
  p.blocks = work_dir / "blocks.jsonl";
  p.cases = work_dir / "cases.jsonl";
  p.corpus = work_dir / "corpus.jsonl";
  p.programs = work_dir / "programs";
  p.reports = work_dir / "reports";
  p.ledger = work_dir / "llm_ledger.json";
  p.run_report = work_dir / "run_report.json";
  return p;
}

PipelineConfig PipelineConfig::FromJson(const nlohmann::json &j, const fs::path &base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kKnown = {"seed",   "threads",  "work_dir", "src",
                                               "apis",   "miner",    "analyzer", "llm",
                                               "target", "policy",   "synthesis"};
  for (const auto &[key, value] : j.items())
    if (!kKnown.count(key)) throw ConfigError("unknown config key '" + key + "'");

  PipelineConfig c;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    c.seed = j["seed"].get<uint64_t>();
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_unsigned())
      throw ConfigError("threads must be a non-negative integer");
    c.threads = j["threads"].get<size_t>();
  }
  if (j.contains("work_dir")) c.paths = ArtifactPaths::Under(Resolve(PathValue(j, "work_dir"), base_dir));
  if (j.contains("src")) c.paths.src = Resolve(PathValue(j, "src"), base_dir);
  if (j.contains("apis")) c.paths.apis = Resolve(PathValue(j, "apis"), base_dir);
  if (j.contains("miner")) {
    const auto &m = j["miner"];
    if (!m.is_object()) throw ConfigError("miner config must be an object");
    if (m.contains("macros")) c.miner.macros = StringList(m["macros"], "miner.macros");
    if (m.contains("extensions"))
      c.miner.extensions = StringList(m["extensions"], "miner.extensions");
    if (c.miner.macros.empty()) throw ConfigError("miner.macros must not be empty");
  }
  if (j.contains("analyzer")) {
    const auto &a = j["analyzer"];
    if (!a.is_object()) throw ConfigError("analyzer config must be an object");
    if (a.contains("retries")) {
      if (!a["retries"].is_number_unsigned())
        throw ConfigError("analyzer.retries must be a non-negative integer");
      c.analyzer_retries = a["retries"].get<int>();
    }
  }
  if (j.contains("llm")) c.llm = llm::GatewayConfig::FromJson(j["llm"], base_dir);
  if (j.contains("target")) {
    // Interpreter paths and env values are used verbatim.
    c.target = harness::TargetConfig::FromJson(j["target"]);
  }
  if (j.contains("policy")) c.policy = mutate::SelectionPolicy::FromJson(j["policy"]);
  if (j.contains("synthesis")) c.synthesis = synth::SynthesisConfig::FromJson(j["synthesis"]);
  c.Finalize();
  return c;
}

PipelineConfig PipelineConfig::Load(const fs::path &path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return FromJson(ParseJsonFile(path), base);
}

void PipelineConfig::Finalize() {
  policy.rng_seed = seed;
  miner.threads = threads;
  synthesis.threads = threads;
  target.workers = threads;
}

llm::GatewayConfig LoadLlmConfig(const fs::path &path) {
  if (!fs::exists(path)) throw ConfigError("llm config not found: " + path.string());
  const auto j = ParseJsonFile(path);
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  if (j.is_object() && j.contains("llm")) return llm::GatewayConfig::FromJson(j["llm"], base);
  return llm::GatewayConfig::FromJson(j, base);
}

std::optional<double> DebugSuccessRow::rate() const {
  if (succeeded + failed == 0) return std::nullopt;
  return static_cast<double>(succeeded) / (succeeded + failed);
}

int RunReport::llm_calls_total() const {
  int n = 0;
  for (const auto &[stage, count] : llm_calls_by_stage) n += count;
  return n;
}

int RunReport::bugs_total() const {
  int n = 0;
  for (const auto &[cls, count] : bugs_by_class) n += count;
  return n;
}

nlohmann::ordered_json ReportToJson(const RunReport &r) {
  nlohmann::ordered_json j;
  j["stages"] = r.stages;
  j["seed"] = r.seed;
  j["blocks"] = r.blocks;
  j["context_cases"] = r.context_cases;
  j["corpus_cases"] = r.corpus_cases;
  j["api_total"] = r.api_total;
  j["api_covered"] = r.api_covered;
  nlohmann::ordered_json calls = nlohmann::ordered_json::object();
  for (llm::Stage s : {llm::Stage::kAnalysis, llm::Stage::kGeneration, llm::Stage::kDebug,
                       llm::Stage::kMutation}) {
    const std::string name(llm::ToString(s));
    auto it = r.llm_calls_by_stage.find(name);
    calls[name] = it == r.llm_calls_by_stage.end() ? 0 : it->second;
  }
  j["llm_calls_by_stage"] = std::move(calls);
  nlohmann::ordered_json debug;
  debug["succeeded"] = r.debug_success.succeeded;
  debug["failed"] = r.debug_success.failed;
  if (auto rate = r.debug_success.rate()) debug["rate"] = *rate;
  j["debug_success"] = std::move(debug);
  j["fuzz_tasks"] = r.fuzz_tasks;
  nlohmann::ordered_json bugs = nlohmann::ordered_json::object();
  for (auto cls : kBugClasses) {
    const std::string name(harness::ToString(cls));
    auto it = r.bugs_by_class.find(name);
    bugs[name] = it == r.bugs_by_class.end() ? 0 : it->second;
  }
  j["bugs_by_class"] = std::move(bugs);
  j["hangs"] = r.hangs;
  j["graceful_rejections"] = r.graceful_rejections;
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

RunReport ReportFromJson(const nlohmann::json &j) {
  RunReport r;
  try {
    r.stages = j.at("stages").get<std::vector<std::string>>();
    r.seed = j.at("seed").get<uint64_t>();
    r.blocks = j.at("blocks").get<int>();
    r.context_cases = j.at("context_cases").get<int>();
    r.corpus_cases = j.at("corpus_cases").get<int>();
    r.api_total = j.at("api_total").get<int>();
    r.api_covered = j.at("api_covered").get<int>();
    r.llm_calls_by_stage = j.at("llm_calls_by_stage").get<std::map<std::string, int>>();
    r.debug_success.succeeded = j.at("debug_success").at("succeeded").get<int>();
    r.debug_success.failed = j.at("debug_success").at("failed").get<int>();
    r.fuzz_tasks = j.at("fuzz_tasks").get<int>();
    r.bugs_by_class = j.at("bugs_by_class").get<std::map<std::string, int>>();
    r.hangs = j.at("hangs").get<int>();
    r.graceful_rejections = j.at("graceful_rejections").get<int>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed run report: ") + e.what());
  }
  if (r.api_covered > r.api_total) throw ConfigError("run report: api_covered > api_total");
  return r;
}

ReportFormat ParseReportFormat(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "text") return ReportFormat::kText;
  throw ConfigError("report format must be json or text, got '" + std::string(name) + "'");
}

std::string EmitReport(const RunReport &r, ReportFormat format) {
  if (format == ReportFormat::kJson) return ReportToJson(r).dump(2) + "\n";
  const auto j = ReportToJson(r);
  std::string out;
  std::string stages;
  for (const auto &s : r.stages) stages += (stages.empty() ? "" : ",") + s;
  out += "edgefuzz run report\n";
  out += "stages: " + (stages.empty() ? std::string("-") : stages) +
         "  seed: " + std::to_string(r.seed) + "  wall time: " + Fixed(r.wall_time_s, 2) +
         " s\n\n";

  out += "Artifacts\n";
  out += "  " + Pad("check blocks", 22) + std::to_string(r.blocks) + "\n";
  out += "  " + Pad("context edge cases", 22) + std::to_string(r.context_cases) + "\n";
  out += "  " + Pad("corpus edge cases", 22) + std::to_string(r.corpus_cases) + "\n\n";

  out += "API coverage\n";
  out += "  " + Pad("APIs", 10) + Pad("Covered", 10) + "Cov\n";
  const std::string cov = r.api_total > 0
                              ? Fixed(100.0 * r.api_covered / r.api_total, 1) + "%"
                              : std::string("-");
  out += "  " + Pad(std::to_string(r.api_total), 10) + Pad(std::to_string(r.api_covered), 10) +
         cov + "\n\n";

  out += "LLM calls\n";
  for (const auto &[stage, n] : j["llm_calls_by_stage"].items())
    out += "  " + Pad(stage, 22) + std::to_string(n.get<int>()) + "\n";
  out += "  " + Pad("total", 22) + std::to_string(r.llm_calls_total()) + "\n\n";

  out += "Debug success\n";
  const auto rate = r.debug_success.rate();
  out += std::string("  Succeeded  Failed") + (rate ? "  Rate" : "") + "\n";
  std::string row = "  " + Pad(std::to_string(r.debug_success.succeeded), 11) +
                    Pad(std::to_string(r.debug_success.failed), 8);
  if (rate) row += Fixed(100.0 * *rate, 1) + "%";
  while (!row.empty() && row.back() == ' ') row.pop_back();
  out += row + "\n\n";

  out += "Bugs (unique)\n";
  for (const auto &[cls, n] : j["bugs_by_class"].items())
    out += "  " + Pad(cls, 22) + std::to_string(n.get<int>()) + "\n";
  out += "  " + Pad("total", 22) + std::to_string(r.bugs_total()) + "\n\n";

  out += "Fuzzing\n";
  out += "  " + Pad("tasks", 22) + std::to_string(r.fuzz_tasks) + "\n";
  out += "  " + Pad("graceful rejections", 22) + std::to_string(r.graceful_rejections) + "\n";
  out += "  " + Pad("hangs", 22) + std::to_string(r.hangs) + "\n";
  return out;
}

std::map<std::string, llm::CallLedger> ReadLedgers(const fs::path &path) {
  std::map<std::string, llm::CallLedger> out;
  if (!fs::exists(path)) return out;
  const auto j = ParseJsonFile(path);
  if (!j.is_object()) throw ConfigError(path.string() + ": expected an object");
  for (const auto &[stage, ledger] : j.items()) {
    ParseStage(stage);
    out[stage] = llm::CallLedger::FromJson(ledger);
  }
  return out;
}

void WriteLedger(const fs::path &path, Stage stage, const llm::CallLedger &ledger) {
  auto all = ReadLedgers(path);
  all[std::string(ToString(stage))] = ledger;
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (Stage s : AllStages()) {
    auto it = all.find(std::string(ToString(s)));
    if (it != all.end()) j[it->first] = it->second.ToJson();
  }
  WriteFile(path, j.dump(2) + "\n");
}

RunReport CollectReport(const ArtifactPaths &paths) {
  RunReport r;
  r.blocks = CountRecords(paths.blocks);
  r.context_cases = CountRecords(paths.cases);
  r.corpus_cases = CountRecords(paths.corpus);

  for (llm::Stage s : {llm::Stage::kAnalysis, llm::Stage::kGeneration, llm::Stage::kDebug,
                       llm::Stage::kMutation})
    r.llm_calls_by_stage[std::string(llm::ToString(s))] = 0;
  for (const auto &[stage, ledger] : ReadLedgers(paths.ledger))
    for (llm::Stage s : {llm::Stage::kAnalysis, llm::Stage::kGeneration, llm::Stage::kDebug,
                         llm::Stage::kMutation})
      r.llm_calls_by_stage[std::string(llm::ToString(s))] += ledger.Count(s);

  const auto synth_report = paths.programs / "synthesis_report.json";
  if (!paths.apis.empty() && fs::exists(paths.apis))
    r.api_total = static_cast<int>(catalog::LoadCatalog(paths.apis).size());
  if (fs::exists(synth_report)) {
    const auto j = ParseJsonFile(synth_report);
    if (!j.is_array()) throw ConfigError(synth_report.string() + ": expected an array");
    if (r.api_total == 0) r.api_total = static_cast<int>(j.size());
    for (const auto &rec : j) {
      const bool valid = rec.value("status", std::string()) == "valid";
      r.api_covered += valid;
      if (rec.value("debugged", false)) (valid ? r.debug_success.succeeded : r.debug_success.failed)++;
    }
  }

  for (auto cls : kBugClasses) r.bugs_by_class[std::string(harness::ToString(cls))] = 0;
  if (fs::exists(paths.reports / "bugs.jsonl"))
    for (const auto &b : mutate::ReadBugsJsonl(paths.reports / "bugs.jsonl"))
      ++r.bugs_by_class[std::string(harness::ToString(b.cls))];
  const auto outcomes = paths.reports / "outcomes.jsonl";
  if (fs::exists(outcomes)) {
    for (const auto &line : ReadLines(outcomes)) {
      if (Trim(line).empty()) continue;
      nlohmann::json o;
      try {
        o = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception &e) {
        throw ConfigError(outcomes.string() + ": " + e.what());
      }
      ++r.fuzz_tasks;
      const auto cls = harness::ParseOutcomeClass(o.value("outcome_class", std::string()));
      r.hangs += cls == harness::OutcomeClass::kHang;
      r.graceful_rejections += cls == harness::OutcomeClass::kGracefulRejection;
    }
  }
  return r;
}

int RunMine(const PipelineConfig &config, WarningLog *warnings) {
  const auto &p = config.paths;
  if (p.src.empty()) throw ConfigError("mine needs a source tree: pass --src DIR");
  if (!fs::is_directory(p.src))
    throw ConfigError("mine: source tree " + p.src.string() + " is not a directory");
  const auto blocks = miner::MineTree(p.src, config.miner, warnings);
  miner::WriteBlocksJsonl(p.blocks, blocks);
  return static_cast<int>(blocks.size());
}

int RunAnalyze(const PipelineConfig &config, WarningLog *warnings, llm::CallLedger *ledger) {
  const auto &p = config.paths;
  Require(p.blocks, "analyze needs " + p.blocks.string() + "; run mine first or pass --blocks");
  const auto blocks = miner::ReadBlocksJsonl(p.blocks);
  auto gateway = llm::MakeGateway(config.llm);
  analyzer::AnalyzerConfig ac;
  ac.retries = config.analyzer_retries;
  ac.threads = config.threads;
  const auto cases = analyzer::AnalyzeBlocks(blocks, *gateway, ac, warnings);
  analyzer::WriteCasesJsonl(p.cases, cases);
  WriteLedger(p.ledger, Stage::kAnalyze, gateway->ledger());
  if (ledger) ledger->Merge(gateway->ledger());
  return static_cast<int>(cases.size());
}

int RunStandardize(const PipelineConfig &config, WarningLog *warnings) {
  const auto &p = config.paths;
  Require(p.cases, "standardize needs " + p.cases.string() + "; run analyze first or pass --cases");
  const auto corpus =
      corpus::EdgeCaseCorpus::Build(corpus::StandardizeAll(analyzer::ReadCasesJsonl(p.cases), warnings));
  corpus::WriteCorpusJsonl(p.corpus, corpus);
  return static_cast<int>(corpus.size());
}

int RunGen(const PipelineConfig &config, WarningLog *warnings, llm::CallLedger *ledger) {
  const auto &p = config.paths;
  if (p.apis.empty()) throw ConfigError("gen needs an API catalog: pass --apis FILE");
  Require(p.apis, "gen: API catalog " + p.apis.string() + " not found (--apis)");
  const auto apis = catalog::LoadCatalog(p.apis);
  auto gateway = llm::MakeGateway(config.llm);
  ScratchDir scratch;
  const auto programs =
      synth::SynthesizeAll(apis, *gateway, config.target, config.synthesis, scratch.path(), warnings);
  synth::WritePrograms(p.programs, programs, config.target.program_extension);
  WriteLedger(p.ledger, Stage::kGen, gateway->ledger());
  if (ledger) ledger->Merge(gateway->ledger());
  return synth::Coverage(programs);
}

int RunFuzz(const PipelineConfig &config, WarningLog *warnings, llm::CallLedger *ledger) {
  const auto &p = config.paths;
  if (p.apis.empty()) throw ConfigError("fuzz needs an API catalog: pass --apis FILE");
  Require(p.apis, "fuzz: API catalog " + p.apis.string() + " not found (--apis)");
  Require(p.corpus, "fuzz needs " + p.corpus.string() + "; run standardize first or pass --corpus");
  Require(p.programs / "synthesis_report.json",
          "fuzz needs " + (p.programs / "synthesis_report.json").string() +
              "; run gen first or pass --programs");
  const auto apis = catalog::LoadCatalog(p.apis);
  const auto corpus = corpus::ReadCorpusJsonl(p.corpus);
  const auto programs = synth::ReadPrograms(p.programs);
  auto gateway = llm::MakeGateway(config.llm);
  mutate::FuzzConfig fc;
  fc.policy = config.policy;
  fc.language = config.synthesis.language;
  fc.threads = config.threads;
  const auto run =
      mutate::FuzzAll(apis, programs, corpus, *gateway, config.target, fc, p.reports, warnings);
  mutate::WriteFuzzReports(p.reports, run);
  WriteLedger(p.ledger, Stage::kFuzz, gateway->ledger());
  if (ledger) ledger->Merge(gateway->ledger());
  return static_cast<int>(run.bugs.size());
}

PipelineResult RunPipeline(const PipelineConfig &config, const std::vector<Stage> &stages,
                           WarningLog *warnings) {
  const auto start = std::chrono::steady_clock::now();
  std::set<Stage> wanted(stages.begin(), stages.end());
  PipelineResult result;
  for (Stage s : AllStages()) {
    if (!wanted.count(s)) continue;
    switch (s) {
      case Stage::kMine: RunMine(config, warnings); break;
      case Stage::kAnalyze: RunAnalyze(config, warnings, &result.ledger); break;
      case Stage::kStandardize: RunStandardize(config, warnings); break;
      case Stage::kGen: RunGen(config, warnings, &result.ledger); break;
      case Stage::kFuzz: RunFuzz(config, warnings, &result.ledger); break;
    }
    result.report.stages.emplace_back(ToString(s));
  }
  RunReport collected = CollectReport(config.paths);
  collected.stages = result.report.stages;
  collected.seed = config.seed;
  collected.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.report = std::move(collected);
  if (!config.paths.run_report.empty())
    WriteFile(config.paths.run_report, EmitReport(result.report, ReportFormat::kJson));
  return result;
}

}  // namespace edgefuzz::pipeline
