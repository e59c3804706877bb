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

// Initial test programs. Each API gets up to init_max fresh dialogues; in
// each, a program that fails to run is sent back with its error for up to
// debug_max regenerations.
#ifndef EDGEFUZZ_SYNTHESIZER_H_
#define EDGEFUZZ_SYNTHESIZER_H_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/catalog.h"
#include "edgefuzz/common.h"
#include "edgefuzz/harness.h"
#include "edgefuzz/llm.h"

namespace edgefuzz::synth {

struct SynthesisConfig {
  int init_max = 2;
  int debug_max = 3;
  double exec_timeout_s = 30;
  size_t error_budget = 2048;
  std::string language = "Python";
  size_t threads = 0;

  int MaxCalls() const { return init_max * (1 + debug_max); }
  static SynthesisConfig FromJson(const nlohmann::json &j);
};

enum class Status { kValid, kFailed };
std::string_view ToString(Status s);

struct TestProgram {
  std::string api_name;
  std::string source_text;  // keeps the {{DEVICE}} placeholder
  llm::Dialogue lineage{llm::Stage::kGeneration};
  int init_rounds = 0;
  int debug_rounds = 0;  // regenerations in the last init round
  int llm_calls = 0;
  bool debugged = false;  // the first program of the first round failed
  Status status = Status::kFailed;
  std::string cause;  // last error for failed programs
};

llm::Dialogue BuildGenerationPrompt(const catalog::ApiSignature &api,
                                    const SynthesisConfig &config = {});

// The user message asking for a fixed program.
std::string RegenerateRequest(const std::string &error_info);

// Exception line plus innermost frame of a Python-style traceback, else the
// raw tail of stderr; never more than `budget` bytes, tail kept.
std::string ExtractErrorInfo(const harness::ExecutionOutcome &outcome, size_t budget = 2048,
                             double timeout_s = 0);

// First fenced block of the response, else the whole response.
std::string ExtractProgram(const std::string &response);

// Generate-and-debug loop for one API. Programs run from `work_dir` with
// the primary device substituted.
TestProgram GenerateInitial(const catalog::ApiSignature &api, llm::Gateway &gateway,
                            const harness::TargetConfig &target,
                            const SynthesisConfig &config,
                            const std::filesystem::path &work_dir);

// All APIs in parallel; results in catalog order.
std::vector<TestProgram> SynthesizeAll(const std::vector<catalog::ApiSignature> &apis,
                                       llm::Gateway &gateway,
                                       const harness::TargetConfig &target,
                                       const SynthesisConfig &config,
                                       const std::filesystem::path &work_dir,
                                       WarningLog *warnings = nullptr);

struct DebugSuccess {
  int succeeded = 0;
  int failed = 0;
  std::optional<double> rate() const;
};
DebugSuccess MeasureDebugSuccess(const std::vector<TestProgram> &programs);
int Coverage(const std::vector<TestProgram> &programs);

std::string ProgramFileName(const std::string &api_name, const std::string &extension);

// programs/<api><ext> for every valid program, plus synthesis_report.json.
void WritePrograms(const std::filesystem::path &dir, const std::vector<TestProgram> &programs,
                   const std::string &extension);

struct StoredProgram {
  std::string api_name;
  std::string source_text;
  std::filesystem::path path;
};
// Valid programs listed in synthesis_report.json, in report order.
std::vector<StoredProgram> ReadPrograms(const std::filesystem::path &dir);

}  // namespace edgefuzz::synth

#endif  // EDGEFUZZ_SYNTHESIZER_H_
