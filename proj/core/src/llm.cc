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

#include "edgefuzz/llm.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace edgefuzz::llm {

std::string_view ToString(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

std::string_view ToString(Stage stage) {
  switch (stage) {
    case Stage::kAnalysis: return "analysis";
    case Stage::kGeneration: return "generation";
    case Stage::kDebug: return "debug";
    case Stage::kMutation: return "mutation";
  }
  return "analysis";
}

Stage ParseStage(std::string_view name) {
  for (Stage s : kAllStages)
    if (ToString(s) == name) return s;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

void Dialogue::Append(Role role, std::string content) {
  if (role == Role::kSystem) {
    if (!messages_.empty())
      throw std::logic_error("system message must come first");
  } else {
    Role expected = Role::kUser;
    if (!messages_.empty() && messages_.back().role == Role::kUser)
      expected = Role::kAssistant;
    if (role != expected)
      throw std::logic_error("dialogue expects a " +
                             std::string(ToString(expected)) + " message next");
  }
  messages_.push_back({role, std::move(content)});
}

std::string CanonicalHash(const Dialogue &dialogue) {
  // Length-prefixed so that no content can fake a message boundary.
  std::string buf;
  for (const auto &m : dialogue.messages()) {
    const std::string role(ToString(m.role));
    const std::string content = CollapseWhitespace(m.content);
    buf += std::to_string(role.size()) + ":" + role;
    buf += std::to_string(content.size()) + ":" + content;
  }
  return Sha256Hex(buf);
}

// CallLedger

CallLedger::CallLedger(const CallLedger &other) {
  std::lock_guard<std::mutex> lock(other.mu_);
  counters_ = other.counters_;
  per_api_ = other.per_api_;
}

CallLedger &CallLedger::operator=(const CallLedger &other) {
  if (&other == this) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  counters_ = other.counters_;
  per_api_ = other.per_api_;
  return *this;
}

void CallLedger::Record(Stage stage, const std::string &subject) {
  std::lock_guard<std::mutex> lock(mu_);
  ++counters_[static_cast<size_t>(stage)];
  ++per_api_[subject][stage];
}

int CallLedger::Count(Stage stage) const {
  std::lock_guard<std::mutex> lock(mu_);
  return counters_[static_cast<size_t>(stage)];
}

int CallLedger::Total() const {
  std::lock_guard<std::mutex> lock(mu_);
  int total = 0;
  for (int c : counters_) total += c;
  return total;
}

int CallLedger::CountFor(const std::string &subject,
                         std::initializer_list<Stage> stages) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = per_api_.find(subject);
  if (it == per_api_.end()) return 0;
  int total = 0;
  for (Stage s : stages) {
    auto jt = it->second.find(s);
    if (jt != it->second.end()) total += jt->second;
  }
  return total;
}

std::map<std::string, std::map<Stage, int>> CallLedger::PerApi() const {
  std::lock_guard<std::mutex> lock(mu_);
  return per_api_;
}

nlohmann::ordered_json CallLedger::ToJson() const {
  std::lock_guard<std::mutex> lock(mu_);
  nlohmann::ordered_json j;
  int total = 0;
  nlohmann::ordered_json by_stage = nlohmann::ordered_json::object();
  for (Stage s : kAllStages) {
    by_stage[std::string(ToString(s))] = counters_[static_cast<size_t>(s)];
    total += counters_[static_cast<size_t>(s)];
  }
  j["total"] = total;
  j["by_stage"] = std::move(by_stage);
  nlohmann::ordered_json per_api = nlohmann::ordered_json::object();
  for (const auto &[api, counts] : per_api_) {
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto &[stage, n] : counts) c[std::string(ToString(stage))] = n;
    per_api[api] = std::move(c);
  }
  j["per_api"] = std::move(per_api);
  return j;
}

CallLedger CallLedger::FromJson(const nlohmann::json &j) {
  CallLedger ledger;
  try {
    for (const auto &[api, counts] : j.at("per_api").items()) {
      for (const auto &[stage, n] : counts.items()) {
        const Stage s = ParseStage(stage);
        const int count = n.get<int>();
        if (count < 0) throw ConfigError("negative ledger count");
        ledger.per_api_[api][s] += count;
        ledger.counters_[static_cast<size_t>(s)] += count;
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed call ledger: ") + e.what());
  }
  return ledger;
}

void CallLedger::Merge(const CallLedger &other) {
  if (&other == this) return;
  std::scoped_lock lock(mu_, other.mu_);
  for (size_t i = 0; i < counters_.size(); ++i) counters_[i] += other.counters_[i];
  for (const auto &[api, counts] : other.per_api_)
    for (const auto &[stage, n] : counts) per_api_[api][stage] += n;
}

// ReplayBackend

ReplayBackend::ReplayBackend(
    std::vector<std::pair<std::string, std::string>> fixtures) {
  for (auto &[hash, response] : fixtures)
    responses_[hash].push_back(std::move(response));
}

std::unique_ptr<ReplayBackend> ReplayBackend::FromFile(
    const std::filesystem::path &path) {
  std::vector<std::pair<std::string, std::string>> fixtures;
  int lineno = 0;
  for (const auto &line : ReadLines(path)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      fixtures.emplace_back(j.at("hash").get<std::string>(),
                            j.at("response").get<std::string>());
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": bad fixture line: " + e.what());
    }
  }
  return std::make_unique<ReplayBackend>(std::move(fixtures));
}

std::string ReplayBackend::Complete(const Dialogue &dialogue,
                                    const CompletionParams &) {
  const std::string hash = CanonicalHash(dialogue);
  std::lock_guard<std::mutex> lock(mu_);
  auto it = responses_.find(hash);
  if (it == responses_.end()) {
    std::string preview = dialogue.messages().back().content.substr(0, 120);
    throw FixtureMiss("no replay fixture for " + std::string(ToString(dialogue.stage())) +
                      " dialogue " + hash + " (" + CollapseWhitespace(preview) + ")");
  }
  size_t &cursor = cursor_[hash];
  const auto &list = it->second;
  const std::string &out = list[std::min(cursor, list.size() - 1)];
  ++cursor;
  return out;
}

// RecordingBackend

RecordingBackend::RecordingBackend(std::unique_ptr<Backend> inner,
                                   std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {
  if (path_.has_parent_path())
    std::filesystem::create_directories(path_.parent_path());
}

std::string RecordingBackend::Complete(const Dialogue &dialogue,
                                       const CompletionParams &params) {
  std::string response = inner_->Complete(dialogue, params);
  nlohmann::ordered_json j;
  j["hash"] = CanonicalHash(dialogue);
  j["response"] = response;
  std::lock_guard<std::mutex> lock(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to " + path_.string());
  out << j.dump() << '\n';
  return response;
}

// TokenBucket

TokenBucket::TokenBucket(double rate_per_s, double burst)
    : rate_(rate_per_s), burst_(std::max(1.0, burst)), tokens_(burst_),
      last_(Clock::now()) {}

void TokenBucket::Acquire() {
  if (rate_ <= 0) return;  // unlimited
  std::unique_lock<std::mutex> lock(mu_);
  while (true) {
    const auto now = Clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    // Sleeping under the lock keeps callers in arrival order.
    const double wait = (1.0 - tokens_) / rate_;
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
  }
}

// Config and gateway

namespace {

std::filesystem::path ResolvePath(const nlohmann::json &j, const char *key,
                                  const std::filesystem::path &base) {
  if (!j.contains(key) || j.at(key).is_null()) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

}  // namespace

GatewayConfig GatewayConfig::FromJson(const nlohmann::json &j,
                                      const std::filesystem::path &base_dir) {
  GatewayConfig c;
  try {
    const std::string backend = j.value("backend", std::string("rule"));
    if (backend == "http") {
      c.backend = BackendKind::kHttp;
    } else if (backend == "replay") {
      c.backend = BackendKind::kReplay;
    } else if (backend == "rule") {
      c.backend = BackendKind::kRule;
    } else {
      throw ConfigError("llm.backend must be http, replay or rule, got '" +
                        backend + "'");
    }
    c.base_url = j.value("base_url", std::string());
    c.model_id = j.value("model_id", std::string());
    if (j.contains("temperature_by_stage")) {
      for (const auto &[stage, t] : j.at("temperature_by_stage").items()) {
        const double temp = t.get<double>();
        if (temp < 0 || temp > 2)
          throw ConfigError("llm.temperature_by_stage." + stage +
                            " must be in [0, 2]");
        c.temperature_by_stage[ParseStage(stage)] = temp;
      }
    }
    c.fixtures_path = ResolvePath(j, "fixtures_path", base_dir);
    c.rules_path = ResolvePath(j, "rules_path", base_dir);
    c.record_path = ResolvePath(j, "record_path", base_dir);
    c.rate_limit_per_s = j.value("rate_limit_per_s", 1.0);
    c.max_retries = j.value("max_retries", 3);
    c.max_tokens = j.value("max_tokens", 2048);
    c.backoff_initial_s = j.value("backoff_initial_s", 0.5);
    c.timeout_s = j.value("timeout_s", 120.0);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("llm config: ") + e.what());
  }
  if (c.max_retries < 0) throw ConfigError("llm.max_retries must be >= 0");
  if (c.max_tokens <= 0) throw ConfigError("llm.max_tokens must be positive");
  if (c.backend == BackendKind::kHttp && c.base_url.empty())
    throw ConfigError("llm.base_url is required for the http backend");
  if (c.backend == BackendKind::kReplay && c.fixtures_path.empty())
    throw ConfigError("llm.fixtures_path is required for the replay backend");
  if (c.backend == BackendKind::kRule && c.rules_path.empty())
    throw ConfigError("llm.rules_path is required for the rule backend");
  return c;
}

Gateway::Gateway(std::unique_ptr<Backend> backend,
                 std::map<Stage, CompletionParams> params)
    : backend_(std::move(backend)), params_(std::move(params)) {}

CompletionParams Gateway::ParamsFor(Stage stage) const {
  auto it = params_.find(stage);
  return it == params_.end() ? CompletionParams{} : it->second;
}

std::string Gateway::Complete(const Dialogue &dialogue) {
  return Complete(dialogue, ParamsFor(dialogue.stage()));
}

std::string Gateway::Complete(const Dialogue &dialogue,
                              const CompletionParams &params) {
  if (dialogue.empty() || dialogue.messages().back().role != Role::kUser)
    throw std::logic_error("completion needs a dialogue ending in a user message");
  std::string out = backend_->Complete(dialogue, params);
  // Only completed calls are counted.
  ledger_.Record(dialogue.stage(), dialogue.subject());
  return out;
}

std::unique_ptr<Gateway> MakeGateway(const GatewayConfig &config) {
  std::unique_ptr<Backend> backend;
  switch (config.backend) {
    case BackendKind::kHttp: {
      HttpOptions opts;
      opts.base_url = config.base_url;
      if (const char *key = std::getenv("LLM_API_KEY")) opts.api_key = key;
      opts.max_retries = config.max_retries;
      opts.backoff_initial_s = config.backoff_initial_s;
      opts.rate_limit_per_s = config.rate_limit_per_s;
      opts.timeout_s = config.timeout_s;
      backend = std::make_unique<HttpBackend>(std::move(opts));
      break;
    }
    case BackendKind::kReplay:
      backend = ReplayBackend::FromFile(config.fixtures_path);
      break;
    case BackendKind::kRule:
      backend = RuleBackend::FromFile(config.rules_path);
      break;
  }
  if (!config.record_path.empty())
    backend = std::make_unique<RecordingBackend>(std::move(backend), config.record_path);
  std::map<Stage, CompletionParams> params;
  for (Stage s : kAllStages) {
    CompletionParams p;
    auto it = config.temperature_by_stage.find(s);
    p.temperature = it == config.temperature_by_stage.end() ? 0.0 : it->second;
    p.max_tokens = config.max_tokens;
    p.model_id = config.model_id;
    params[s] = p;
  }
  return std::make_unique<Gateway>(std::move(backend), std::move(params));
}

std::optional<std::string> FirstFencedBlock(std::string_view text, size_t from) {
  size_t open = text.find("```", from);
  if (open == std::string_view::npos) return std::nullopt;
  size_t body = text.find('\n', open);
  if (body == std::string_view::npos) return std::nullopt;
  ++body;
  size_t close = body;
  // The closing fence must start a line.
  while (true) {
    close = text.find("```", close);
    if (close == std::string_view::npos) return std::nullopt;
    if (close == body || text[close - 1] == '\n') break;
    close += 3;
  }
  return std::string(text.substr(body, close - body));
}

}  // namespace edgefuzz::llm
