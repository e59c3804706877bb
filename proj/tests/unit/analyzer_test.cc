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

#include "edgefuzz/analyzer.h"

#include <cstdlib>
#include <map>

#include "gtest/gtest.h"
#include "test_paths.h"

namespace edgefuzz::analyzer {
namespace {

using ::edgefuzz::testing::FixturesDir;
using ::edgefuzz::testing::ScratchDir;

const std::vector<miner::CheckBlock> &AtenBlocks() {
  static const auto *blocks = new std::vector<miner::CheckBlock>(
      miner::MineTree(FixturesDir() / "aten_native", miner::MinerConfig{}));
  return *blocks;
}

const miner::CheckBlock &BlockNamed(const std::string &name) {
  for (const auto &b : AtenBlocks())
    if (b.interface.name == name) return b;
  throw std::runtime_error("no block " + name);
}

std::unique_ptr<llm::Gateway> ReplayGateway(
    std::vector<std::pair<std::string, std::string>> fixtures) {
  return std::make_unique<llm::Gateway>(
      std::make_unique<llm::ReplayBackend>(std::move(fixtures)));
}

TEST(AnalysisPrompt, MatchesGolden) {
  const auto dialogue = BuildAnalysisPrompt(BlockNamed("abs_"));
  ASSERT_EQ(dialogue.messages().size(), 1u);
  EXPECT_EQ(dialogue.stage(), llm::Stage::kAnalysis);
  EXPECT_EQ(dialogue.subject(), "abs_");
  const auto golden = FixturesDir() / "golden" / "analysis_prompt_abs.txt";
  if (std::getenv("EDGEFUZZ_UPDATE_GOLDEN")) WriteFile(golden, dialogue.messages()[0].content);
  EXPECT_EQ(dialogue.messages()[0].content, ReadFile(golden));
}

TEST(AnalysisPrompt, AsksTheFourQuestionsInOrder) {
  const std::string p = BuildAnalysisPrompt(BlockNamed("abs_")).messages()[0].content;
  const size_t q1 = p.find("What variables does the TORCH_CHECK examine?");
  const size_t q2 = p.find("What are the data types of these variables?");
  const size_t q3 = p.find("What edge cases does the TORCH_CHECK check?");
  const size_t q4 = p.find("summarize the output in JSON format");
  ASSERT_NE(q1, std::string::npos);
  ASSERT_NE(q2, std::string::npos);
  ASSERT_NE(q3, std::string::npos);
  ASSERT_NE(q4, std::string::npos);
  EXPECT_LT(q1, q2);
  EXPECT_LT(q2, q3);
  EXPECT_LT(q3, q4);
  EXPECT_NE(p.find("Tensor, Int, Bool, Str, Float, Scalar, List"), std::string::npos);
  EXPECT_NE(p.find(BlockNamed("abs_").block_text), std::string::npos);
}

TEST(AnalysisPrompt, RequestsOneEntryPerCheck) {
  const auto &block = BlockNamed("polygamma");
  ASSERT_EQ(block.checks.size(), 2u);
  const std::string p = BuildAnalysisPrompt(block).messages()[0].content;
  EXPECT_NE(p.find("JSON array of exactly 2 entries"), std::string::npos);
  EXPECT_EQ(p, BuildAnalysisPrompt(block).messages()[0].content);
}

TEST(AnalysisPrompt, UsesConfiguredVocabulary) {
  TypeVocabulary vocab({"Tensor", "Int", "Device"});
  const std::string p = BuildAnalysisPrompt(BlockNamed("abs_"), vocab).messages()[0].content;
  EXPECT_NE(p.find("Choose from: Tensor, Int, Device."), std::string::npos);
}

TEST(ParseAnalysis, AbsReply) {
  const auto &block = BlockNamed("abs_");
  auto cases = ParseAnalysisJson(
      "Sure.\n```json\n[{\"check\": 1, \"variables\": [{\"name\": \"self\", "
      "\"type\": \"Tensor\"}], \"edge_case\": \"Tensor self is a complex tensor\"}]\n```",
      block, TypeVocabulary::Default());
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].variables, (std::vector<Variable>{{"self", BaseType("Tensor")}}));
  EXPECT_EQ(cases[0].description, "Tensor self is a complex tensor");
  EXPECT_EQ(cases[0].function, "abs_");
  EXPECT_EQ(cases[0].check_line, block.checks[0].line);
  EXPECT_EQ(cases[0].macro, "TORCH_CHECK");
  EXPECT_EQ(cases[0].params, std::vector<std::string>{"self"});
  EXPECT_EQ(cases[0].category, Category::kSpecialTypeAttribute);
}

TEST(ParseAnalysis, EmptyArray) {
  WarningLog w;
  EXPECT_TRUE(ParseAnalysisJson("[]", BlockNamed("abs_"), TypeVocabulary::Default(), &w).empty());
  EXPECT_EQ(w.size(), 0u);
}

TEST(ParseAnalysis, InvalidTypeDroppedWithWarning) {
  WarningLog w;
  auto cases = ParseAnalysisJson(
      R"([{"check": 1, "variables": [{"name": "n", "type": "Int"}], "edge_case": "n is negative"},
          {"check": 2, "variables": [{"name": "self", "type": "Tensorish"}], "edge_case": "self is complex"}])",
      BlockNamed("polygamma"), TypeVocabulary::Default(), &w);
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].variables[0].name, "n");
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w.Snapshot()[0].message.find("Tensorish"), std::string::npos);
}

TEST(ParseAnalysis, NoArrayIsParseErrorWithRawText) {
  try {
    ParseAnalysisJson("I cannot answer {that}.", BlockNamed("abs_"), TypeVocabulary::Default());
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.raw_text, "I cannot answer {that}.");
  }
}

TEST(ParseAnalysis, SkipsBracketsInProse) {
  auto cases = ParseAnalysisJson(
      "Checks [1] and [see below]: [{\"variables\": [{\"name\": \"self\", \"type\": "
      "\"Tensor\"}], \"edge_case\": \"self is complex [sic]\"}] done",
      BlockNamed("abs_"), TypeVocabulary::Default());
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].description, "self is complex [sic]");
}

TEST(ParseAnalysis, RejectsStructuralProblems) {
  WarningLog w;
  const auto &block = BlockNamed("narrow");  // 3 checks: self, length, start/length
  auto cases = ParseAnalysisJson(R"([
      {"check": 4, "variables": [{"name": "self", "type": "Tensor"}], "edge_case": "x"},
      {"check": 1, "variables": [], "edge_case": "self is 0-d"},
      {"check": 1, "variables": [{"name": "self", "type": "Tensor"}], "edge_case": "  "},
      {"check": 2, "variables": [{"name": "length", "type": "Int"}], "edge_case": "length is negative"},
      {"check": 3, "variables": [{"name": "length", "type": "Float"}], "edge_case": "length is big"},
      "junk"])",
                                 block, TypeVocabulary::Default(), &w);
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(cases[0].check_line, block.checks[1].line);
  EXPECT_EQ(w.size(), 5u);
}

TEST(Categorize, KeywordRules) {
  const std::vector<Variable> self = {{"self", BaseType("Tensor")}};
  const std::vector<Variable> dim = {{"dim", BaseType("Int")}};
  const std::vector<Variable> two = {{"a", BaseType("Tensor")}, {"b", BaseType("Tensor")}};
  EXPECT_EQ(Categorize("a has a larger last dimension than b", two),
            Category::kMultiParamConstraint);
  EXPECT_EQ(Categorize("Tensor self is a complex tensor", self),
            Category::kSpecialTypeAttribute);
  EXPECT_EQ(Categorize("self is a sparse tensor", self), Category::kSpecialTypeAttribute);
  // The parameter name `dim` is not an attribute keyword.
  EXPECT_EQ(Categorize("dim is negative", dim), Category::kAbnormalValue);
  EXPECT_EQ(Categorize("dim < 0", dim), Category::kAbnormalValue);
  EXPECT_EQ(Categorize("self is None", self), Category::kSpecialType);
  EXPECT_EQ(Categorize("self is a string", self), Category::kSpecialType);
  EXPECT_EQ(Categorize("self is weird", self), Category::kOther);
}

TEST(AnalyzeBlock, ReasksOnceOnUnparseableReply) {
  const auto &block = BlockNamed("abs_");
  llm::Dialogue first = BuildAnalysisPrompt(block);
  llm::Dialogue second = first;
  second.Append(llm::Role::kAssistant, "no idea");
  second.Append(llm::Role::kUser,
                "Your reply did not contain a JSON array. Reply with only the JSON "
                "array in the requested format.");
  auto gw = ReplayGateway(
      {{llm::CanonicalHash(first), "no idea"},
       {llm::CanonicalHash(second),
        R"([{"check": 1, "variables": [{"name": "self", "type": "Tensor"}], "edge_case": "self is complex"}])"}});
  auto cases = AnalyzeBlock(block, *gw);
  ASSERT_EQ(cases.size(), 1u);
  EXPECT_EQ(gw->ledger().Count(llm::Stage::kAnalysis), 2);
  EXPECT_EQ(gw->ledger().CountFor("abs_", {llm::Stage::kAnalysis}), 2);
}

TEST(AnalyzeBlock, GivesUpAfterRetriesWithWarning) {
  const auto &block = BlockNamed("abs_");
  llm::Dialogue first = BuildAnalysisPrompt(block);
  llm::Dialogue second = first;
  second.Append(llm::Role::kAssistant, "no idea");
  second.Append(llm::Role::kUser,
                "Your reply did not contain a JSON array. Reply with only the JSON "
                "array in the requested format.");
  auto gw = ReplayGateway({{llm::CanonicalHash(first), "no idea"},
                           {llm::CanonicalHash(second), "still no idea"}});
  WarningLog w;
  EXPECT_TRUE(AnalyzeBlock(block, *gw, {}, &w).empty());
  EXPECT_EQ(gw->ledger().Count(llm::Stage::kAnalysis), 2);
  EXPECT_EQ(w.size(), 1u);
}

TEST(AnalyzeBlock, FixtureMissPropagates) {
  auto gw = ReplayGateway({});
  EXPECT_THROW(AnalyzeBlock(BlockNamed("abs_"), *gw), llm::FixtureMiss);
}

// Hand-written replies in the style of model output for every block of the
// labeled tree, each with the cases a correct parser must extract.
TEST(AnalyzeBlocks, LabeledRepliesYieldHandLabels) {
  const auto replies = nlohmann::json::parse(
      ReadFile(FixturesDir() / "analysis" / "aten_replies.json"));
  std::vector<std::pair<std::string, std::string>> fixtures;
  std::map<std::string, nlohmann::json> expected;
  for (const auto &r : replies) {
    const std::string fn = r["function"];
    fixtures.emplace_back(llm::CanonicalHash(BuildAnalysisPrompt(BlockNamed(fn))),
                          r["reply"].get<std::string>());
    expected[fn] = r["expected"];
  }
  ASSERT_GE(expected.size(), 20u);
  auto gw = ReplayGateway(std::move(fixtures));
  WarningLog w;
  AnalyzerConfig config;
  config.threads = 4;
  const auto cases = AnalyzeBlocks(AtenBlocks(), *gw, config, &w);

  std::map<std::string, std::vector<const ContextEdgeCase *>> by_fn;
  for (const auto &c : cases) by_fn[c.function].push_back(&c);
  int blocks_matching = 0;
  for (const auto &block : AtenBlocks()) {
    const auto &want = expected.at(block.interface.name);
    const auto &got = by_fn[block.interface.name];
    bool ok = want.size() == got.size();
    for (size_t i = 0; ok && i < got.size(); ++i) {
      const auto &w_case = want[i];
      const int check = w_case[0];
      ok = got[i]->check_line == block.checks[check - 1].line &&
           got[i]->description == w_case[2].get<std::string>() &&
           got[i]->variables.size() == w_case[1].size();
      for (size_t v = 0; ok && v < got[i]->variables.size(); ++v)
        ok = got[i]->variables[v].name == w_case[1][v][0] &&
             got[i]->variables[v].type.name() == w_case[1][v][1];
    }
    EXPECT_TRUE(ok) << block.interface.name;
    blocks_matching += ok;
  }
  EXPECT_EQ(blocks_matching, static_cast<int>(AtenBlocks().size()));
  // One warning per deliberately flawed entry: max_pool2d, cumsum, logit_.
  EXPECT_EQ(w.size(), 3u);
  EXPECT_EQ(gw->ledger().Count(llm::Stage::kAnalysis),
            static_cast<int>(AtenBlocks().size()));
  // Output order follows block order, then check order.
  for (size_t i = 1; i < cases.size(); ++i) {
    if (cases[i].function != cases[i - 1].function) continue;
    EXPECT_LT(cases[i - 1].check_line, cases[i].check_line);
  }
}

TEST(CasesJsonl, RoundTripIsByteIdentical) {
  const auto &block = BlockNamed("narrow");
  auto cases = ParseAnalysisJson(
      R"([{"check": 3, "variables": [{"name": "start", "type": "Int"}, {"name": "length", "type": "Int"}], "edge_case": "start > size - length"},
          {"check": 2, "variables": [{"name": "length", "type": "Int"}], "edge_case": "length is negative"}])",
      block, TypeVocabulary::Default());
  auto dir = ScratchDir("cases");
  WriteCasesJsonl(dir / "a.jsonl", cases);
  WriteCasesJsonl(dir / "b.jsonl", ReadCasesJsonl(dir / "a.jsonl"));
  EXPECT_EQ(ReadFile(dir / "a.jsonl"), ReadFile(dir / "b.jsonl"));
  const auto first = nlohmann::json::parse(ReadLines(dir / "a.jsonl")[0]);
  EXPECT_EQ(first["function"], "narrow");
  EXPECT_EQ(first["category"], "AbnormalValue");
  EXPECT_EQ(first["variables"][0]["type"], "Int");
}

}  // namespace
}  // namespace edgefuzz::analyzer
