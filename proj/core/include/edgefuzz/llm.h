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

// Completion gateway. Every LLM call in the pipeline goes through Gateway,
// which forwards to one interchangeable Backend and counts calls per stage
// and per API in a CallLedger.
//
// Backends:
//   * HttpBackend      - chat-completion JSON endpoint, retries + rate limit.
//   * ReplayBackend    - recorded responses keyed by CanonicalHash().
//   * RecordingBackend - wraps another backend and records {hash, response}.
//   * RuleBackend      - deterministic templates (see rule_backend.cc).
#ifndef EDGEFUZZ_LLM_H_
#define EDGEFUZZ_LLM_H_

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/common.h"

namespace edgefuzz::llm {

enum class Role { kSystem, kUser, kAssistant };
enum class Stage { kAnalysis, kGeneration, kDebug, kMutation };
inline constexpr std::array<Stage, 4> kAllStages = {
    Stage::kAnalysis, Stage::kGeneration, Stage::kDebug, Stage::kMutation};

std::string_view ToString(Role role);
std::string_view ToString(Stage stage);
Stage ParseStage(std::string_view name);  // throws ConfigError

struct Message {
  Role role;
  std::string content;
};

// Append-only conversation. After an optional leading system message, roles
// must alternate user/assistant starting with user.
class Dialogue {
 public:
  explicit Dialogue(Stage stage, std::string subject = {})
      : stage_(stage), subject_(std::move(subject)) {}

  // Throws std::logic_error when `role` would break the alternation.
  void Append(Role role, std::string content);

  const std::vector<Message> &messages() const { return messages_; }
  bool empty() const { return messages_.empty(); }

  // The stage tag decides which ledger counter a call lands in. A dialogue
  // that starts in generation continues in debug.
  Stage stage() const { return stage_; }
  void set_stage(Stage stage) { stage_ = stage; }

  // The API (or function) the dialogue is about; used for per-API counts.
  const std::string &subject() const { return subject_; }

 private:
  Stage stage_;
  std::string subject_;
  std::vector<Message> messages_;
};

// Stable over (role, whitespace-normalized content) pairs.
std::string CanonicalHash(const Dialogue &dialogue);

struct CompletionParams {
  double temperature = 0.0;
  int max_tokens = 2048;
  std::string model_id;
};

class CallLedger {
 public:
  CallLedger() = default;
  CallLedger(const CallLedger &other);
  CallLedger &operator=(const CallLedger &other);

  void Record(Stage stage, const std::string &subject);

  int Count(Stage stage) const;
  int Total() const;
  // Calls for one API summed over the given stages.
  int CountFor(const std::string &subject, std::initializer_list<Stage> stages) const;
  std::map<std::string, std::map<Stage, int>> PerApi() const;

  nlohmann::ordered_json ToJson() const;
  static CallLedger FromJson(const nlohmann::json &j);
  void Merge(const CallLedger &other);

 private:
  mutable std::mutex mu_;
  std::array<int, 4> counters_{};
  std::map<std::string, std::map<Stage, int>> per_api_;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

// Replay backend asked for a dialogue it has no recording for.
class FixtureMiss : public Error {
 public:
  using Error::Error;
};

// Rule backend found no rule for the prompt.
class RuleMiss : public Error {
 public:
  using Error::Error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string Complete(const Dialogue &dialogue,
                               const CompletionParams &params) = 0;
};

// Serves the n-th recorded response for the n-th request with a given hash;
// once a hash's recordings are used up its last one is served again.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(std::vector<std::pair<std::string, std::string>> fixtures);
  static std::unique_ptr<ReplayBackend> FromFile(const std::filesystem::path &path);

  std::string Complete(const Dialogue &dialogue,
                       const CompletionParams &params) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::vector<std::string>> responses_;
  std::map<std::string, size_t> cursor_;
};

// Appends `{"hash":..., "response":...}` lines for every completion of the
// wrapped backend.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::unique_ptr<Backend> inner, std::filesystem::path path);

  std::string Complete(const Dialogue &dialogue,
                       const CompletionParams &params) override;

 private:
  std::unique_ptr<Backend> inner_;
  std::filesystem::path path_;
  std::mutex mu_;
};

// Token bucket; Acquire() blocks until a token is available.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_s, double burst = 1.0);
  void Acquire();

 private:
  using Clock = std::chrono::steady_clock;
  std::mutex mu_;
  double rate_;
  double burst_;
  double tokens_;
  Clock::time_point last_;
};

struct HttpOptions {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;   // taken from the environment by MakeGateway
  int max_retries = 3;
  double backoff_initial_s = 0.5;
  double backoff_max_s = 8.0;
  double rate_limit_per_s = 1.0;
  double timeout_s = 120.0;
};

// POSTs {model, messages, temperature, max_tokens} to
// <base_url>/chat/completions and returns choices[0].message.content.
// Connection failures, 408, 409, 429 and 5xx are retried with exponential
// backoff; other statuses fail immediately.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpOptions options);

  std::string Complete(const Dialogue &dialogue,
                       const CompletionParams &params) override;

  static nlohmann::json BuildRequest(const Dialogue &dialogue,
                                     const CompletionParams &params);
  static std::string ParseResponse(const std::string &body);

 private:
  HttpOptions options_;
  TokenBucket bucket_;
  std::string host_;    // scheme://host[:port]
  std::string prefix_;  // path prefix, no trailing slash
};

// Deterministic rule engine. Rule file layout:
//   {"analysis":   [{"match": RE, "variables": [{"name","type"}],
//                    "edge_case": TEMPLATE}],
//    "generation": {"preamble": [LINE], "values": {TYPE: EXPR},
//                   "result": LINE, "language": "python"},
//    "mutation":   [{"match": RE, "assign": {NAME: EXPR}}]}
// `$1`..`$9` in names, types and templates expand to regex groups.
class RuleBackend : public Backend {
 public:
  explicit RuleBackend(nlohmann::json rules);
  static std::unique_ptr<RuleBackend> FromFile(const std::filesystem::path &path);

  std::string Complete(const Dialogue &dialogue,
                       const CompletionParams &params) override;

 private:
  std::string Analyze(const std::string &prompt) const;
  std::string Generate(const std::string &prompt) const;
  std::string Mutate(const std::string &prompt) const;

  nlohmann::json rules_;
};

enum class BackendKind { kHttp, kReplay, kRule };

struct GatewayConfig {
  BackendKind backend = BackendKind::kRule;
  std::string base_url;
  std::string model_id;
  std::map<Stage, double> temperature_by_stage;
  std::filesystem::path fixtures_path;
  std::filesystem::path rules_path;
  std::filesystem::path record_path;  // empty = no recording
  double rate_limit_per_s = 1.0;
  int max_retries = 3;
  int max_tokens = 2048;
  double backoff_initial_s = 0.5;
  double timeout_s = 120.0;

  // Relative paths are resolved against `base_dir`.
  static GatewayConfig FromJson(const nlohmann::json &j,
                                const std::filesystem::path &base_dir);
};

// Thread-safe; shared by all workers of a stage.
class Gateway {
 public:
  explicit Gateway(std::unique_ptr<Backend> backend,
                   std::map<Stage, CompletionParams> params = {});

  // Requires a non-empty dialogue whose last message is from the user.
  std::string Complete(const Dialogue &dialogue);
  std::string Complete(const Dialogue &dialogue, const CompletionParams &params);

  CompletionParams ParamsFor(Stage stage) const;
  CallLedger &ledger() { return ledger_; }
  const CallLedger &ledger() const { return ledger_; }

 private:
  std::unique_ptr<Backend> backend_;
  std::map<Stage, CompletionParams> params_;
  CallLedger ledger_;
};

// Reads LLM_API_KEY for the http backend.
std::unique_ptr<Gateway> MakeGateway(const GatewayConfig &config);

// Prompt-format markers shared by the prompt builders and RuleBackend.
namespace markers {
inline constexpr std::string_view kApiLine = "API: ";
inline constexpr std::string_view kParametersLine = "Parameters:";
inline constexpr std::string_view kEdgeCaseLine = "Edge case: ";
inline constexpr std::string_view kBaseProgramLine = "Base program:";
inline constexpr std::string_view kCodeBlockLine = "Code block:";
}  // namespace markers

// First fenced code block of `text` after `from`, or nullopt.
std::optional<std::string> FirstFencedBlock(std::string_view text, size_t from = 0);

}  // namespace edgefuzz::llm

#endif  // EDGEFUZZ_LLM_H_
