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

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <set>
#include <thread>

#include "gtest/gtest.h"
#include "httplib.h"
#include "test_paths.h"

namespace edgefuzz::llm {
namespace {

Dialogue OneTurn(Stage stage, const std::string &text,
                 const std::string &subject = "api") {
  Dialogue d(stage, subject);
  d.Append(Role::kUser, text);
  return d;
}

// Returns canned strings in order; counts calls.
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies)
      : replies_(std::move(replies)) {}
  std::string Complete(const Dialogue &, const CompletionParams &) override {
    return replies_.at(calls_++ % replies_.size());
  }
  int calls() const { return calls_; }

 private:
  std::vector<std::string> replies_;
  int calls_ = 0;
};

TEST(Dialogue, EnforcesAlternation) {
  Dialogue d(Stage::kGeneration);
  d.Append(Role::kSystem, "be terse");
  EXPECT_THROW(d.Append(Role::kAssistant, "x"), std::logic_error);
  d.Append(Role::kUser, "q1");
  EXPECT_THROW(d.Append(Role::kUser, "q2"), std::logic_error);
  EXPECT_THROW(d.Append(Role::kSystem, "late"), std::logic_error);
  d.Append(Role::kAssistant, "a1");
  d.Append(Role::kUser, "q2");
  ASSERT_EQ(d.messages().size(), 4u);
  EXPECT_EQ(d.messages()[3].content, "q2");
}

TEST(CanonicalHash, StableAndWhitespaceInsensitive) {
  Dialogue a = OneTurn(Stage::kAnalysis, "Explain   this\ncheck");
  Dialogue b = OneTurn(Stage::kAnalysis, "Explain this check  \n\n");
  Dialogue c = OneTurn(Stage::kAnalysis, "Explain that check");
  EXPECT_EQ(CanonicalHash(a), CanonicalHash(a));
  EXPECT_EQ(CanonicalHash(a), CanonicalHash(b));
  EXPECT_NE(CanonicalHash(a), CanonicalHash(c));
  EXPECT_EQ(CanonicalHash(a).size(), 64u);
}

TEST(CanonicalHash, RoleAndBoundariesMatter) {
  Dialogue a(Stage::kDebug);
  a.Append(Role::kUser, "ab");
  a.Append(Role::kAssistant, "c");
  a.Append(Role::kUser, "d");
  Dialogue b(Stage::kDebug);
  b.Append(Role::kUser, "a");
  b.Append(Role::kAssistant, "bc");
  b.Append(Role::kUser, "d");
  Dialogue c(Stage::kDebug);
  c.Append(Role::kSystem, "ab");
  c.Append(Role::kUser, "c");
  EXPECT_NE(CanonicalHash(a), CanonicalHash(b));
  EXPECT_NE(CanonicalHash(a), CanonicalHash(c));
}

TEST(CanonicalHash, NoCollisionsOverManySingleTokenEdits) {
  // Every dialogue differs from the base in exactly one user token.
  std::set<std::string> hashes;
  const std::vector<std::string> tokens = {"input", "other", "dim", "out",
                                           "self", "weight", "bias", "alpha"};
  int n = 0;
  for (const auto &t1 : tokens) {
    for (const auto &t2 : tokens) {
      Dialogue d(Stage::kMutation);
      d.Append(Role::kUser, "mutate " + t1 + " with " + t2);
      d.Append(Role::kAssistant, "ok");
      d.Append(Role::kUser, "again " + t2);
      hashes.insert(CanonicalHash(d));
      ++n;
    }
  }
  EXPECT_EQ(hashes.size(), static_cast<size_t>(n));
}

TEST(ReplayBackend, ServesFixtureVerbatimInOccurrenceOrder) {
  Dialogue d = OneTurn(Stage::kGeneration, "write a program");
  const std::string h = CanonicalHash(d);
  ReplayBackend replay({{h, "first\n  reply"}, {h, "second"}});
  EXPECT_EQ(replay.Complete(d, {}), "first\n  reply");
  EXPECT_EQ(replay.Complete(d, {}), "second");
  EXPECT_EQ(replay.Complete(d, {}), "second");  // last one reused
}

TEST(ReplayBackend, MissIsAnError) {
  ReplayBackend replay(
      std::vector<std::pair<std::string, std::string>>{{"deadbeef", "x"}});
  EXPECT_THROW(replay.Complete(OneTurn(Stage::kAnalysis, "q"), {}), FixtureMiss);
}

TEST(ReplayBackend, FromFileRejectsMalformedLines) {
  auto dir = edgefuzz::testing::ScratchDir("replay_bad");
  WriteFile(dir / "f.jsonl", "{\"hash\":\"a\",\"response\":\"b\"}\nnot json\n");
  EXPECT_THROW(ReplayBackend::FromFile(dir / "f.jsonl"), ConfigError);
}

TEST(Gateway, RequiresTrailingUserMessage) {
  Gateway gw(std::make_unique<ScriptedBackend>(std::vector<std::string>{"r"}));
  Dialogue empty(Stage::kAnalysis);
  EXPECT_THROW(gw.Complete(empty), std::logic_error);
  Dialogue d = OneTurn(Stage::kAnalysis, "q");
  d.Append(Role::kAssistant, "a");
  EXPECT_THROW(gw.Complete(d), std::logic_error);
  EXPECT_EQ(gw.ledger().Total(), 0);
}

TEST(Gateway, LedgerCountsGenerationAndDebugSeparately) {
  Gateway gw(std::make_unique<ScriptedBackend>(std::vector<std::string>{"p"}));
  // One API needing two debug rounds.
  Dialogue d(Stage::kGeneration, "mt.add");
  d.Append(Role::kUser, "generate");
  d.Append(Role::kAssistant, gw.Complete(d));
  d.set_stage(Stage::kDebug);
  d.Append(Role::kUser, "error 1. Regenerate");
  d.Append(Role::kAssistant, gw.Complete(d));
  d.Append(Role::kUser, "error 2. Regenerate");
  gw.Complete(d);
  EXPECT_EQ(gw.ledger().Count(Stage::kGeneration), 1);
  EXPECT_EQ(gw.ledger().Count(Stage::kDebug), 2);
  EXPECT_EQ(gw.ledger().CountFor("mt.add", {Stage::kGeneration, Stage::kDebug}), 3);
}

TEST(Gateway, FailedCallsAreNotCounted) {
  Gateway gw(std::make_unique<ReplayBackend>(
      std::vector<std::pair<std::string, std::string>>{}));
  EXPECT_THROW(gw.Complete(OneTurn(Stage::kAnalysis, "q")), FixtureMiss);
  EXPECT_EQ(gw.ledger().Total(), 0);
}

TEST(CallLedger, ConservationUnderConcurrency) {
  Gateway gw(std::make_unique<ReplayBackend>(
      std::vector<std::pair<std::string, std::string>>{}));
  CallLedger &ledger = gw.ledger();
  ParallelFor(400, 4, [&](size_t i) {
    ledger.Record(kAllStages[i % 4], "api" + std::to_string(i % 7));
  });
  EXPECT_EQ(ledger.Total(), 400);
  int per_api_sum = 0;
  for (const auto &[api, counts] : ledger.PerApi())
    for (const auto &[stage, n] : counts) per_api_sum += n;
  EXPECT_EQ(per_api_sum, 400);
  for (Stage s : kAllStages) EXPECT_EQ(ledger.Count(s), 100);
}

TEST(CallLedger, JsonRoundTripAndMerge) {
  CallLedger a;
  a.Record(Stage::kGeneration, "x");
  a.Record(Stage::kDebug, "x");
  a.Record(Stage::kMutation, "y");
  CallLedger b = CallLedger::FromJson(a.ToJson());
  EXPECT_EQ(b.ToJson(), a.ToJson());
  b.Merge(a);
  EXPECT_EQ(b.Total(), 6);
  EXPECT_EQ(b.CountFor("x", {Stage::kDebug}), 2);
  EXPECT_EQ(a.ToJson()["by_stage"]["analysis"], 0);
}

TEST(RecordingBackend, RecordsReplayablePairs) {
  auto dir = edgefuzz::testing::ScratchDir("recording");
  const auto path = dir / "rec.jsonl";
  std::filesystem::remove(path);
  RecordingBackend rec(std::make_unique<ScriptedBackend>(
                           std::vector<std::string>{"one", "two"}),
                       path);
  Dialogue d1 = OneTurn(Stage::kAnalysis, "first");
  Dialogue d2 = OneTurn(Stage::kAnalysis, "second");
  EXPECT_EQ(rec.Complete(d1, {}), "one");
  EXPECT_EQ(rec.Complete(d2, {}), "two");
  auto replay = ReplayBackend::FromFile(path);
  EXPECT_EQ(replay->Complete(d2, {}), "two");
  EXPECT_EQ(replay->Complete(d1, {}), "one");
}

TEST(TokenBucket, SpacesRequests) {
  TokenBucket bucket(20.0);  // one token every 50 ms, burst 1
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) bucket.Acquire();
  const double elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  EXPECT_GE(elapsed, 0.19);
}

// Local chat-completion endpoint.
class FakeEndpoint {
 public:
  FakeEndpoint() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request &req, httplib::Response &res) {
                   std::lock_guard<std::mutex> lock(mu_);
                   requests_.push_back(nlohmann::json::parse(req.body));
                   auth_ = req.get_header_value("Authorization");
                   const int status = statuses_.empty() ? 200 : statuses_.front();
                   if (!statuses_.empty()) statuses_.erase(statuses_.begin());
                   res.status = status;
                   if (status == 200) {
                     nlohmann::json body = {
                         {"choices",
                          {{{"message",
                             {{"role", "assistant"}, {"content", "hello"}}}}}}};
                     res.set_content(body.dump(), "application/json");
                   } else {
                     res.set_content("{}", "application/json");
                   }
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
  }
  void Script(std::vector<int> statuses) {
    std::lock_guard<std::mutex> lock(mu_);
    statuses_ = std::move(statuses);
  }
  std::vector<nlohmann::json> requests() {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
  }
  std::string auth() {
    std::lock_guard<std::mutex> lock(mu_);
    return auth_;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<int> statuses_;
  std::vector<nlohmann::json> requests_;
  std::string auth_;
};

HttpOptions FastOptions(const std::string &url) {
  HttpOptions o;
  o.base_url = url;
  o.api_key = "sk-test-secret";
  o.max_retries = 2;
  o.backoff_initial_s = 0.01;
  o.rate_limit_per_s = 0;  // unlimited in tests
  o.timeout_s = 5;
  return o;
}

TEST(HttpBackend, SendsChatCompletionShape) {
  FakeEndpoint ep;
  HttpBackend http(FastOptions(ep.base_url()));
  Dialogue d(Stage::kAnalysis);
  d.Append(Role::kSystem, "sys");
  d.Append(Role::kUser, "q");
  CompletionParams p{0.5, 128, "some-model"};
  EXPECT_EQ(http.Complete(d, p), "hello");
  auto reqs = ep.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0]["model"], "some-model");
  EXPECT_EQ(reqs[0]["temperature"], 0.5);
  EXPECT_EQ(reqs[0]["max_tokens"], 128);
  EXPECT_EQ(reqs[0]["messages"][0]["role"], "system");
  EXPECT_EQ(reqs[0]["messages"][1]["content"], "q");
  EXPECT_EQ(ep.auth(), "Bearer sk-test-secret");
}

TEST(HttpBackend, RetriesTransientFailures) {
  FakeEndpoint ep;
  ep.Script({503, 429});
  HttpBackend http(FastOptions(ep.base_url()));
  EXPECT_EQ(http.Complete(OneTurn(Stage::kAnalysis, "q"), {}), "hello");
  EXPECT_EQ(ep.requests().size(), 3u);
}

TEST(HttpBackend, ExhaustedRetriesAreUnavailableAndKeyIsNotLeaked) {
  FakeEndpoint ep;
  ep.Script({500, 500, 500, 500});
  HttpBackend http(FastOptions(ep.base_url()));
  try {
    http.Complete(OneTurn(Stage::kAnalysis, "q"), {});
    FAIL() << "expected BackendUnavailable";
  } catch (const BackendUnavailable &e) {
    EXPECT_EQ(std::string(e.what()).find("sk-test-secret"), std::string::npos);
  }
  EXPECT_EQ(ep.requests().size(), 3u);  // 1 + max_retries
}

TEST(HttpBackend, ClientErrorsAreNotRetried) {
  FakeEndpoint ep;
  ep.Script({400});
  HttpBackend http(FastOptions(ep.base_url()));
  EXPECT_THROW(http.Complete(OneTurn(Stage::kAnalysis, "q"), {}), BackendUnavailable);
  EXPECT_EQ(ep.requests().size(), 1u);
}

TEST(HttpBackend, ConnectionRefused) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  auto opts = FastOptions("http://127.0.0.1:" + std::to_string(port) + "/v1");
  opts.max_retries = 1;
  HttpBackend http(opts);
  EXPECT_THROW(http.Complete(OneTurn(Stage::kAnalysis, "q"), {}), BackendUnavailable);
}

nlohmann::json SampleRules() {
  return nlohmann::json::parse(R"json({
    "analysis": [
      {"match": "(\\w+)\\.is_complex\\(\\)",
       "variables": [{"name": "$1", "type": "Tensor"}],
       "edge_case": "'$1' is a complex tensor"},
      {"match": "(\\w+) >= 0",
       "variables": [{"name": "$1", "type": "Int"}],
       "edge_case": "'$1' is negative"}
    ],
    "generation": {
      "preamble": ["import mt"],
      "values": {"Tensor": "mt.tensor([1.0, 2.0], device=\"{{DEVICE}}\")",
                 "Int": "1"},
      "result": "print(\"RESULT:\", mt.to_list(result))"
    },
    "mutation": [
      {"match": "'(\\w+)' is a complex tensor",
       "assign": {"$1": "mt.tensor([1+2j, 3-1j], device=\"{{DEVICE}}\")"}},
      {"match": "'(\\w+)' is negative", "assign": {"$1": "-1"}}
    ]
  })json");
}

TEST(RuleBackend, GenerationFollowsPromptParameters) {
  RuleBackend rules(SampleRules());
  Dialogue d = OneTurn(Stage::kGeneration,
                       "Write a program.\nAPI: mt.add\nParameters:\n"
                       "  1. input: Tensor\n  2. alpha: Int (optional)\n\nRules...");
  const std::string out = rules.Complete(d, {});
  EXPECT_EQ(out,
            "```python\nimport mt\ninput = mt.tensor([1.0, 2.0], "
            "device=\"{{DEVICE}}\")\nalpha = 1\nresult = mt.add(input, alpha)\n"
            "print(\"RESULT:\", mt.to_list(result))\n```\n");
}

TEST(RuleBackend, MissingTypeRuleIsRuleMiss) {
  RuleBackend rules(SampleRules());
  Dialogue d = OneTurn(Stage::kGeneration, "API: mt.f\nParameters:\n  1. s: Str\n");
  EXPECT_THROW(rules.Complete(d, {}), RuleMiss);
}

TEST(RuleBackend, MutationBuildsComplexInput) {
  RuleBackend rules(SampleRules());
  Dialogue d = OneTurn(
      Stage::kMutation,
      "Mutate.\nEdge case: 'input' is a complex tensor\nBase program:\n"
      "```python\nimport mt\ninput = mt.tensor([1.0], device=\"{{DEVICE}}\")\n"
      "result = mt.abs(input)\n```\n");
  const std::string out = rules.Complete(d, {});
  EXPECT_NE(out.find("input = mt.tensor([1+2j, 3-1j], device=\"{{DEVICE}}\")"),
            std::string::npos);
  EXPECT_NE(out.find("result = mt.abs(input)"), std::string::npos);
  EXPECT_EQ(out.find("[1.0]"), std::string::npos);
}

TEST(RuleBackend, MutationWithoutApplicableRuleIsRuleMiss) {
  RuleBackend rules(SampleRules());
  Dialogue d = OneTurn(Stage::kMutation,
                       "Edge case: 'weight' is sparse\nBase program:\n```python\n"
                       "weight = 1\n```\n");
  EXPECT_THROW(rules.Complete(d, {}), RuleMiss);
  // Rule matches but the program has no assignment to rewrite.
  Dialogue e = OneTurn(Stage::kMutation,
                       "Edge case: 'other' is negative\nBase program:\n```python\n"
                       "weight = 1\n```\n");
  EXPECT_THROW(rules.Complete(e, {}), RuleMiss);
}

TEST(RuleBackend, AnalysisAnswersPerCheck) {
  RuleBackend rules(SampleRules());
  Dialogue d = OneTurn(Stage::kAnalysis,
                       "Questions...\nCode block:\n```cpp\n"
                       "Tensor f(const Tensor& self, int64_t dim) {\n"
                       "  TORCH_CHECK(!self.is_complex(), \"no\");\n"
                       "  TORCH_CHECK(self.dim() > 1);\n"
                       "  TORCH_CHECK(dim >= 0, \"dim\");\n}\n```\n");
  auto out = FirstFencedBlock(rules.Complete(d, {}));
  ASSERT_TRUE(out.has_value());
  auto j = nlohmann::json::parse(*out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["check"], 1);
  EXPECT_EQ(j[0]["variables"][0]["name"], "self");
  EXPECT_EQ(j[0]["edge_case"], "'self' is a complex tensor");
  EXPECT_EQ(j[1]["check"], 3);
  EXPECT_EQ(j[1]["variables"][0]["type"], "Int");
}

TEST(RuleBackend, BadRegexFailsAtLoad) {
  EXPECT_THROW(RuleBackend(nlohmann::json::parse(
                   R"({"mutation": [{"match": "(", "assign": {}}]})")),
               ConfigError);
}

TEST(GatewayConfig, ParsesAndValidates) {
  const std::filesystem::path base = "/cfg";
  auto c = GatewayConfig::FromJson(
      nlohmann::json::parse(R"({"backend": "replay", "fixtures_path": "fx.jsonl",
                               "temperature_by_stage": {"mutation": 0.5}})"),
      base);
  EXPECT_EQ(c.backend, BackendKind::kReplay);
  EXPECT_EQ(c.fixtures_path, base / "fx.jsonl");
  EXPECT_EQ(c.temperature_by_stage.at(Stage::kMutation), 0.5);
  EXPECT_THROW(GatewayConfig::FromJson(
                   nlohmann::json::parse(R"({"backend": "carrier-pigeon"})"), base),
               ConfigError);
  EXPECT_THROW(GatewayConfig::FromJson(
                   nlohmann::json::parse(R"({"backend": "http"})"), base),
               ConfigError);
  EXPECT_THROW(GatewayConfig::FromJson(
                   nlohmann::json::parse(R"({"backend": "rule", "rules_path": "r",
                       "temperature_by_stage": {"analysis": 3}})"),
                   base),
               ConfigError);
}

TEST(MakeGateway, PerStageTemperaturesReachTheBackend) {
  auto dir = edgefuzz::testing::ScratchDir("make_gateway");
  WriteFile(dir / "rules.json", SampleRules().dump());
  GatewayConfig c;
  c.backend = BackendKind::kRule;
  c.rules_path = dir / "rules.json";
  c.model_id = "m";
  c.temperature_by_stage[Stage::kMutation] = 0.5;
  auto gw = MakeGateway(c);
  EXPECT_EQ(gw->ParamsFor(Stage::kAnalysis).temperature, 0.0);
  EXPECT_EQ(gw->ParamsFor(Stage::kGeneration).temperature, 0.0);
  EXPECT_EQ(gw->ParamsFor(Stage::kDebug).temperature, 0.0);
  EXPECT_EQ(gw->ParamsFor(Stage::kMutation).temperature, 0.5);
  EXPECT_EQ(gw->ParamsFor(Stage::kMutation).model_id, "m");
}

TEST(FirstFencedBlock, FindsBody) {
  EXPECT_EQ(*FirstFencedBlock("x\n```py\na = 1\n```\ny"), "a = 1\n");
  EXPECT_FALSE(FirstFencedBlock("no fences").has_value());
  EXPECT_FALSE(FirstFencedBlock("```\nunterminated").has_value());
}

}  // namespace
}  // namespace edgefuzz::llm
