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

// Edge-case analyzer: asks the model which parameters each check examines,
// their base types and the input that violates the check, then validates the
// JSON answer against the block's interface.
#ifndef EDGEFUZZ_ANALYZER_H_
#define EDGEFUZZ_ANALYZER_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/common.h"
#include "edgefuzz/llm.h"
#include "edgefuzz/miner.h"

namespace edgefuzz::analyzer {

enum class Category {
  kSpecialType,
  kAbnormalValue,
  kSpecialTypeAttribute,
  kMultiParamConstraint,
  kOther,
};

std::string_view ToString(Category c);
Category ParseCategory(std::string_view name);  // throws ConfigError

struct Variable {
  std::string name;
  BaseType type;

  friend bool operator==(const Variable &, const Variable &) = default;
};

struct ContextEdgeCase {
  std::string function;
  std::string file;
  int check_line = 0;
  std::string macro;
  std::vector<Variable> variables;
  std::string description;
  Category category = Category::kOther;
  // Every parameter name of the source interface. Kept so later stages can
  // verify that no source name survives standardization.
  std::vector<std::string> params;
};

// The reply held no JSON array.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, std::string raw)
      : Error(what), raw_text(std::move(raw)) {}
  std::string raw_text;
};

struct AnalyzerConfig {
  const TypeVocabulary *vocabulary = &TypeVocabulary::Default();
  int retries = 1;  // re-asks after an unparseable reply
  size_t threads = 0;
};

// One user message: code block, the four questions, type list, JSON format
// with exactly as many entries as checks, one worked example.
llm::Dialogue BuildAnalysisPrompt(const miner::CheckBlock &block,
                                  const TypeVocabulary &vocab = TypeVocabulary::Default());

// First well-formed JSON array inside `text` (prose and fences allowed
// around it) that is empty or holds only objects; failing that the first
// well-formed array; nullopt when there is none.
std::optional<nlohmann::json> FindJsonArray(std::string_view text);

// Validates each entry against `block`; invalid entries are dropped with a
// warning. Throws ParseError when no array is present.
std::vector<ContextEdgeCase> ParseAnalysisJson(std::string_view text,
                                               const miner::CheckBlock &block,
                                               const TypeVocabulary &vocab,
                                               WarningLog *warnings = nullptr);

// Keyword rules over the description with variable names masked out.
Category Categorize(std::string_view description,
                    const std::vector<Variable> &variables);

// Prompt, complete, parse; re-asks up to config.retries times on a reply
// without a JSON array. Gateway errors propagate.
std::vector<ContextEdgeCase> AnalyzeBlock(const miner::CheckBlock &block,
                                          llm::Gateway &gateway,
                                          const AnalyzerConfig &config = {},
                                          WarningLog *warnings = nullptr);

// Blocks in parallel, results in block order. A block the rule backend has
// no rule for is skipped with a warning; other errors propagate.
std::vector<ContextEdgeCase> AnalyzeBlocks(const std::vector<miner::CheckBlock> &blocks,
                                           llm::Gateway &gateway,
                                           const AnalyzerConfig &config = {},
                                           WarningLog *warnings = nullptr);

nlohmann::ordered_json CaseToJson(const ContextEdgeCase &c);
ContextEdgeCase CaseFromJson(const nlohmann::json &j,
                             const TypeVocabulary &vocab = TypeVocabulary::Default());
void WriteCasesJsonl(const std::filesystem::path &path,
                     const std::vector<ContextEdgeCase> &cases);
std::vector<ContextEdgeCase> ReadCasesJsonl(
    const std::filesystem::path &path,
    const TypeVocabulary &vocab = TypeVocabulary::Default());

}  // namespace edgefuzz::analyzer

#endif  // EDGEFUZZ_ANALYZER_H_
