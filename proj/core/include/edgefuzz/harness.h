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

// Runs generated programs in child processes and sorts the outcome into
// bug classes. Each child gets its own process group and scratch directory
// and is killed as a group on timeout.
#ifndef EDGEFUZZ_HARNESS_H_
#define EDGEFUZZ_HARNESS_H_

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/common.h"

namespace edgefuzz::harness {

inline constexpr std::string_view kDevicePlaceholder = "{{DEVICE}}";
inline constexpr std::string_view kResultPrefix = "RESULT:";

enum class ExitStatus { kCleanExit, kNonzeroExit, kSignaled, kTimedOut };
std::string_view ToString(ExitStatus s);

struct ExecutionOutcome {
  ExitStatus exit_status = ExitStatus::kCleanExit;
  int exit_code = 0;                       // meaningful for the two exit states
  std::optional<std::string> signal_name;  // "SIGSEGV"; set iff signaled
  std::string stdout_text;                 // tail, at most the capture cap
  std::string stderr_text;
  double wall_time_s = 0;
};

enum class OutcomeClass {
  kSuccess,
  kGracefulRejection,
  kAbortSignal,
  kSegfault,
  kRuntimeErrorPattern,
  kInconsistentOutput,
  kHang,
};
std::string_view ToString(OutcomeClass c);
OutcomeClass ParseOutcomeClass(std::string_view s);
bool IsBugClass(OutcomeClass c);

// Memory faults (SIGSEGV, SIGBUS) are segfaults; every other signal is the
// abort family.
enum class SignalFamily { kAbort, kMemory };
SignalFamily FamilyOf(std::string_view signal_name);
std::string SignalName(int signo);

struct TargetConfig {
  std::vector<std::string> interpreter_cmd = {"python3"};
  std::map<std::string, std::string> env;
  double timeout_s = 30;
  std::vector<std::string> device_tokens;  // empty or exactly two
  std::vector<std::string> runtime_error_patterns = {"INTERNAL ASSERT FAILED"};
  double consistency_tolerance = 1e-3;
  size_t capture_cap = 64 * 1024;
  std::string program_extension = ".py";
  size_t workers = 0;  // 0 = hardware concurrency

  // Token substituted for {{DEVICE}} when a single run is wanted.
  std::string PrimaryDevice() const;

  static TargetConfig FromJson(const nlohmann::json &j);
  nlohmann::ordered_json ToJson() const;
};

// Runs `interpreter_cmd... program` in a fresh process group with a clean
// scratch working directory. The child inherits the environment minus
// LLM_API_KEY, with `env` applied on top. Throws EnvironmentError when the
// interpreter cannot be started.
ExecutionOutcome Execute(const std::filesystem::path &program, const TargetConfig &config);

// Precompiled runtime-error patterns (ECMAScript regexes).
class PatternSet {
 public:
  PatternSet() = default;
  explicit PatternSet(const std::vector<std::string> &patterns);
  // First pattern found in `text`, as configured.
  std::optional<std::string> FirstHit(std::string_view text) const;

 private:
  std::vector<std::pair<std::string, std::regex>> patterns_;
};

struct Classification {
  OutcomeClass cls = OutcomeClass::kSuccess;
  std::string diagnostic;  // signal name, matched pattern or mismatch note
};

// Signals first, then timeouts, then runtime-error patterns in stderr, then
// the exit code.
Classification Classify(const ExecutionOutcome &outcome, const PatternSet &patterns);

// Values of the last "RESULT: [..]" line in `stdout_text`; nullopt when
// there is none or it does not parse.
std::optional<std::vector<double>> ParseResultLine(std::string_view stdout_text);

// |a - b| <= tol * max(1, |a|, |b|); NaNs equal each other, infinities
// equal when their signs agree.
bool WithinTolerance(double a, double b, double tol);

struct DeviceComparison {
  Classification classification;
  std::vector<ExecutionOutcome> runs;  // one per device, in token order
  bool skipped = false;                // both payloads unparseable
};

// Substitutes each device token into `program_text`, runs the copies from
// `work_dir`, and compares RESULT payloads. A failing run decides the class,
// crashes before runtime-error patterns before hangs before rejections.
// Without device tokens the program runs once.
DeviceComparison CompareDevices(std::string_view program_text,
                                const std::filesystem::path &work_dir,
                                std::string_view file_stem, const TargetConfig &config,
                                WarningLog *warnings = nullptr);

struct BugReport {
  std::string api;
  OutcomeClass cls = OutcomeClass::kAbortSignal;
  std::string fingerprint;
  std::string edge_case_id;
  std::string instantiation;
  std::vector<int> positions;
  std::string signal_or_pattern;
  std::string program_path;
  ExecutionOutcome outcome;
};

// First 16 hex digits of SHA-256 over "api|class|diagnostic".
std::string Fingerprint(std::string_view api, OutcomeClass cls, std::string_view diagnostic);

struct DedupedBug {
  BugReport report;
  int count = 0;
};

// One report per fingerprint, first occurrence kept, in first-seen order.
std::vector<DedupedBug> Dedupe(const std::vector<BugReport> &reports);

}  // namespace edgefuzz::harness

#endif  // EDGEFUZZ_HARNESS_H_
