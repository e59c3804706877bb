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

// Edge-case mutation. Matched cases are concretized for the API, thinned by
// parameter position, and each survivor becomes one rewrite request for the
// API's initial program. Mutants run on every device and are classified.
#ifndef EDGEFUZZ_MUTATOR_H_
#define EDGEFUZZ_MUTATOR_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/catalog.h"
#include "edgefuzz/corpus.h"
#include "edgefuzz/harness.h"
#include "edgefuzz/llm.h"
#include "edgefuzz/synthesizer.h"

namespace edgefuzz::mutate {

struct SelectionPolicy {
  double rate_pos_1_2 = 1.0;
  double rate_pos_3_4 = 0.25;
  double rate_pos_5_plus = 0.125;
  double compound_rate = 1.0;
  uint64_t rng_seed = 0;

  double RateFor(int position) const;
  static SelectionPolicy FromJson(const nlohmann::json &j);
};

// Per-API generator so selection does not depend on scheduling order.
std::mt19937_64 ApiRng(uint64_t seed, const std::string &api_name);

// Keeps the draw when a uniform [0,1) value from `rng` is below `rate`.
// Rates of 1 keep without drawing.
bool Keep(double rate, std::mt19937_64 &rng);

struct MutationTask {
  catalog::ApiSignature api;
  std::string base_program;
  corpus::ContextFreeEdgeCase edge_case;
  corpus::Instantiation instantiation;
};

// Concretizes every match; individual instantiations are kept at the rate of
// their parameter position, compound ones at compound_rate.
std::vector<MutationTask> SelectEdgeCases(
    const std::vector<const corpus::ContextFreeEdgeCase *> &matches,
    const catalog::ApiSignature &api, const std::string &base_program,
    const SelectionPolicy &policy, std::mt19937_64 &rng);

llm::Dialogue BuildMutationPrompt(const MutationTask &task, const std::string &language = "Python");

struct TaskOutcome {
  std::string api;
  std::string edge_case_id;
  std::string instantiation;
  std::vector<int> positions;
  harness::OutcomeClass cls = harness::OutcomeClass::kSuccess;
  std::string signal_or_pattern;
  std::string program_path;  // relative to the output directory
};

struct ApiFuzzResult {
  std::string api;
  int tasks = 0;
  int llm_calls = 0;
  int skipped = 0;  // gateway failures
  std::vector<TaskOutcome> outcomes;
  std::vector<harness::BugReport> bugs;
};

struct FuzzConfig {
  SelectionPolicy policy;
  std::string language = "Python";
  size_t threads = 0;
};

// Fuzzes one API with its matched edge cases. Mutants are written under
// out_dir/mutants/.
ApiFuzzResult FuzzApi(const catalog::ApiSignature &api, const std::string &base_program,
                      const corpus::EdgeCaseCorpus &corpus, llm::Gateway &gateway,
                      const harness::TargetConfig &target, const FuzzConfig &config,
                      const std::filesystem::path &out_dir, WarningLog *warnings = nullptr);

struct FuzzRun {
  std::vector<ApiFuzzResult> per_api;  // catalog order, fuzzed APIs only
  std::vector<harness::DedupedBug> bugs;
  std::map<std::string, int> BugsByClass() const;
  int Count(harness::OutcomeClass cls) const;
  int Tasks() const;
};

// Every catalog API that has a stored program, in parallel.
FuzzRun FuzzAll(const std::vector<catalog::ApiSignature> &apis,
                const std::vector<synth::StoredProgram> &programs,
                const corpus::EdgeCaseCorpus &corpus, llm::Gateway &gateway,
                const harness::TargetConfig &target, const FuzzConfig &config,
                const std::filesystem::path &out_dir, WarningLog *warnings = nullptr);

nlohmann::ordered_json BugToJson(const harness::DedupedBug &bug);
nlohmann::ordered_json OutcomeToJson(const TaskOutcome &outcome);

// bugs.jsonl (deduplicated) and outcomes.jsonl (every task).
void WriteFuzzReports(const std::filesystem::path &out_dir, const FuzzRun &run);

struct StoredBug {
  std::string api;
  std::string edge_case_id;
  std::string instantiation;
  std::vector<int> positions;
  harness::OutcomeClass cls = harness::OutcomeClass::kAbortSignal;
  std::string signal_or_pattern;
  std::string program_path;
  std::string fingerprint;
  int duplicates = 1;
};
std::vector<StoredBug> ReadBugsJsonl(const std::filesystem::path &path);

}  // namespace edgefuzz::mutate

#endif  // EDGEFUZZ_MUTATOR_H_
