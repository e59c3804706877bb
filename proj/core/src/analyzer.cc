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

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace edgefuzz::analyzer {

namespace {

constexpr std::string_view kStage = "analyze";

constexpr std::string_view kExample =
    "Example input:\n"
    "```cpp\n"
    "Tensor& abs_out(const Tensor& self, Tensor& result) {\n"
    "  TORCH_CHECK(!self.is_complex(), \"abs does not support complex\");\n"
    "  TORCH_CHECK(result.dim() <= 4, \"result has too many dimensions\");\n"
    "}\n"
    "```\n"
    "Example output:\n"
    "```json\n"
    "[{\"check\": 1, \"variables\": [{\"name\": \"self\", \"type\": \"Tensor\"}], "
    "\"edge_case\": \"Tensor self is a complex tensor\"},\n"
    " {\"check\": 2, \"variables\": [{\"name\": \"result\", \"type\": \"Tensor\"}], "
    "\"edge_case\": \"Tensor result has more than 4 dimensions\"}]\n"
    "```\n";

void Warn(WarningLog *warnings, const miner::CheckBlock &block,
          const std::string &message) {
  if (warnings)
    warnings->Add(std::string(kStage),
                  block.file + ":" + std::to_string(block.interface.start_line) +
                      " " + block.interface.name,
                  message);
}

}  // namespace

std::string_view ToString(Category c) {
  switch (c) {
    case Category::kSpecialType: return "SpecialType";
    case Category::kAbnormalValue: return "AbnormalValue";
    case Category::kSpecialTypeAttribute: return "SpecialTypeAttribute";
    case Category::kMultiParamConstraint: return "MultiParamConstraint";
    case Category::kOther: return "Other";
  }
  return "Other";
}

Category ParseCategory(std::string_view name) {
  for (Category c : {Category::kSpecialType, Category::kAbnormalValue,
                     Category::kSpecialTypeAttribute,
                     Category::kMultiParamConstraint, Category::kOther})
    if (ToString(c) == name) return c;
  throw ConfigError("unknown edge case category '" + std::string(name) + "'");
}

llm::Dialogue BuildAnalysisPrompt(const miner::CheckBlock &block,
                                  const TypeVocabulary &vocab) {
  std::string types;
  for (const auto &t : vocab.names()) types += (types.empty() ? "" : ", ") + t;
  std::string params;
  for (const auto &p : block.interface.parameters)
    params += (params.empty() ? "" : ", ") + p.name;
  const size_t n = block.checks.size();

  std::ostringstream out;
  out << "The code block below shows the interface of a native deep learning "
         "library function followed by the check statements (TORCH_CHECK and "
         "similar macros) that validate its inputs.\n\n";
  out << llm::markers::kCodeBlockLine << "\n```cpp\n" << block.block_text;
  if (!block.block_text.empty() && block.block_text.back() != '\n') out << "\n";
  out << "```\n\n";
  out << "Answer these questions for every check statement, in order:\n"
         "1. What variables does the TORCH_CHECK examine?\n"
         "2. What are the data types of these variables? Choose from: "
      << types << ".\n"
         "3. What edge cases does the TORCH_CHECK check?\n"
         "4. Please summarize the output in JSON format.\n\n";
  out << "Rules:\n"
         "- Only report variables that are parameters of the interface ("
      << params << ").\n"
         "- Judge a check by its condition, not by its error message; "
         "messages can be vague.\n"
         "- A check may state the expected condition or the forbidden one. "
         "Either way, describe the input that violates the check, e.g. for "
         "`x > 0` describe x being less than or equal to 0.\n"
         "- Mention every variable by name in the edge case.\n\n";
  out << "The code block has " << n << " check statement" << (n == 1 ? "" : "s")
      << ". Reply with a JSON array of exactly " << n << " entr"
      << (n == 1 ? "y" : "ies")
      << ", one per check statement in order, in this format:\n"
         "[{\"check\": <check number starting at 1>, \"variables\": "
         "[{\"name\": <parameter name>, \"type\": <type>}], "
         "\"edge_case\": <edge case>}]\n\n";
  out << kExample;

  llm::Dialogue d(llm::Stage::kAnalysis, block.interface.name);
  d.Append(llm::Role::kUser, out.str());
  return d;
}

std::optional<nlohmann::json> FindJsonArray(std::string_view text) {
  std::optional<nlohmann::json> fallback;
  for (size_t start = text.find('['); start != std::string_view::npos;
       start = text.find('[', start + 1)) {
    // Find the matching close bracket, honoring JSON strings.
    int depth = 0;
    bool in_string = false;
    size_t end = std::string_view::npos;
    for (size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (c == '\\') ++i;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '[' || c == '{') ++depth;
      else if (c == ']' || c == '}') {
        if (--depth == 0) {
          end = i + 1;
          break;
        }
      }
    }
    if (end == std::string_view::npos) continue;
    auto j = nlohmann::json::parse(text.substr(start, end - start), nullptr,
                                   /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_array()) continue;
    // Prose like "check [1]" is valid JSON too; prefer an array of objects.
    const bool objects = std::all_of(j.begin(), j.end(),
                                     [](const auto &e) { return e.is_object(); });
    if (objects) return j;
    if (!fallback) fallback = std::move(j);
    start = end - 1;  // nested arrays belong to this one
  }
  return fallback;
}

Category Categorize(std::string_view description,
                    const std::vector<Variable> &variables) {
  std::set<std::string> names;
  for (const auto &v : variables) names.insert(v.name);
  if (names.size() >= 2) return Category::kMultiParamConstraint;

  // Mask the variable names so a parameter called `dim` or `size` does not
  // look like an attribute keyword.
  std::string text = ToLower(description);
  for (const auto &name : names) {
    const std::string lname = ToLower(name);
    size_t pos = 0;
    while ((pos = text.find(lname, pos)) != std::string::npos) {
      const bool left = pos == 0 || !IsIdentChar(text[pos - 1]);
      const bool right = pos + lname.size() >= text.size() ||
                         !IsIdentChar(text[pos + lname.size()]);
      if (left && right) text.replace(pos, lname.size(), std::string(lname.size(), ' '));
      pos += lname.size();
    }
  }
  auto any = [&](std::initializer_list<std::string_view> words) {
    return std::any_of(words.begin(), words.end(),
                       [&](std::string_view w) { return ContainsWord(text, w); });
  };
  if (any({"dtype", "complex", "shape", "dim", "dims", "dimension", "dimensions",
           "size", "sizes", "layout", "sparse", "dense", "contiguous", "conjugate",
           "device", "stride", "strides", "quantized", "numel", "elements",
           "floating", "integral", "rank"}))
    return Category::kSpecialTypeAttribute;
  if (any({"negative", "zero", "empty", "nan", "inf", "infinite", "infinity",
           "overflow", "range", "greater", "less", "larger", "smaller",
           "exceeds", "equal", "odd", "even", "positive"}) ||
      text.find('<') != std::string::npos || text.find('>') != std::string::npos)
    return Category::kAbnormalValue;
  if (any({"none", "null", "undefined", "string", "type", "list", "tuple",
           "boolean", "not a"}))
    return Category::kSpecialType;
  return Category::kOther;
}

std::vector<ContextEdgeCase> ParseAnalysisJson(std::string_view text,
                                               const miner::CheckBlock &block,
                                               const TypeVocabulary &vocab,
                                               WarningLog *warnings) {
  auto array = FindJsonArray(text);
  if (!array)
    throw ParseError("analysis reply for " + block.interface.name +
                         " contains no JSON array",
                     std::string(text));

  std::vector<std::string> params;
  for (const auto &p : block.interface.parameters) params.push_back(p.name);

  const size_t n = block.checks.size();
  std::map<size_t, ContextEdgeCase> by_check;
  std::map<std::string, BaseType> types_seen;
  size_t position = 0;
  for (const auto &entry : *array) {
    ++position;
    const std::string where = "entry " + std::to_string(position);
    if (!entry.is_object()) {
      Warn(warnings, block, where + ": not an object");
      continue;
    }
    size_t check = position;
    if (entry.contains("check")) {
      if (!entry["check"].is_number_integer()) {
        Warn(warnings, block, where + ": check is not an integer");
        continue;
      }
      const auto value = entry["check"].get<long long>();
      if (value < 1 || static_cast<size_t>(value) > n) {
        Warn(warnings, block, where + ": check " + std::to_string(value) +
                                  " out of range 1.." + std::to_string(n));
        continue;
      }
      check = static_cast<size_t>(value);
    } else if (check > n) {
      Warn(warnings, block, where + ": more entries than checks");
      continue;
    }
    if (by_check.count(check)) {
      Warn(warnings, block, where + ": duplicate answer for check " +
                                std::to_string(check));
      continue;
    }
    const auto description = entry.value("edge_case", nlohmann::json());
    if (!description.is_string() || Trim(description.get<std::string>()).empty()) {
      Warn(warnings, block, where + ": missing edge_case");
      continue;
    }
    const auto vars = entry.value("variables", nlohmann::json());
    if (!vars.is_array() || vars.empty()) {
      Warn(warnings, block, where + ": missing variables");
      continue;
    }
    ContextEdgeCase c;
    std::string problem;
    std::map<std::string, BaseType> local;
    for (const auto &v : vars) {
      if (!v.is_object() || !v.contains("name") || !v["name"].is_string() ||
          !v.contains("type") || !v["type"].is_string()) {
        problem = "malformed variable";
        break;
      }
      const std::string name = v["name"].get<std::string>();
      const std::string type_name = v["type"].get<std::string>();
      if (std::find(params.begin(), params.end(), name) == params.end()) {
        problem = "'" + name + "' is not an interface parameter";
        break;
      }
      auto type = vocab.Resolve(type_name);
      if (!type) {
        problem = "unknown type '" + type_name + "' for " + name;
        break;
      }
      auto seen = types_seen.find(name);
      if (seen != types_seen.end() && seen->second != *type) {
        problem = "'" + name + "' typed both " + seen->second.name() + " and " +
                  type->name();
        break;
      }
      auto dup = local.find(name);
      if (dup != local.end()) {
        if (dup->second != *type) {
          problem = "'" + name + "' typed twice";
          break;
        }
        continue;
      }
      local.emplace(name, *type);
      c.variables.push_back({name, *type});
    }
    if (!problem.empty()) {
      Warn(warnings, block, where + ": " + problem);
      continue;
    }
    for (const auto &[name, type] : local) types_seen.emplace(name, type);
    const miner::CheckSite &site = block.checks[check - 1];
    c.function = block.interface.name;
    c.file = block.file;
    c.check_line = site.line;
    c.macro = site.macro_name;
    c.description = CollapseWhitespace(description.get<std::string>());
    c.category = Categorize(c.description, c.variables);
    c.params = params;
    by_check.emplace(check, std::move(c));
  }
  std::vector<ContextEdgeCase> out;
  for (auto &[check, c] : by_check) out.push_back(std::move(c));
  return out;
}

std::vector<ContextEdgeCase> AnalyzeBlock(const miner::CheckBlock &block,
                                          llm::Gateway &gateway,
                                          const AnalyzerConfig &config,
                                          WarningLog *warnings) {
  if (block.checks.empty()) return {};
  llm::Dialogue dialogue = BuildAnalysisPrompt(block, *config.vocabulary);
  for (int attempt = 0;; ++attempt) {
    const std::string reply = gateway.Complete(dialogue);
    try {
      return ParseAnalysisJson(reply, block, *config.vocabulary, warnings);
    } catch (const ParseError &e) {
      if (attempt >= config.retries) {
        Warn(warnings, block, std::string(e.what()) + "; block skipped");
        return {};
      }
      dialogue.Append(llm::Role::kAssistant, reply);
      dialogue.Append(llm::Role::kUser,
                      "Your reply did not contain a JSON array. Reply with only "
                      "the JSON array in the requested format.");
    }
  }
}

std::vector<ContextEdgeCase> AnalyzeBlocks(const std::vector<miner::CheckBlock> &blocks,
                                           llm::Gateway &gateway,
                                           const AnalyzerConfig &config,
                                           WarningLog *warnings) {
  std::vector<std::vector<ContextEdgeCase>> results(blocks.size());
  ParallelFor(blocks.size(), config.threads, [&](size_t i) {
    try {
      results[i] = AnalyzeBlock(blocks[i], gateway, config, warnings);
    } catch (const llm::RuleMiss &e) {
      Warn(warnings, blocks[i], std::string(e.what()) + "; block skipped");
    }
  });
  std::vector<ContextEdgeCase> out;
  for (auto &r : results)
    for (auto &c : r) out.push_back(std::move(c));
  return out;
}

nlohmann::ordered_json CaseToJson(const ContextEdgeCase &c) {
  nlohmann::ordered_json j;
  j["function"] = c.function;
  j["check_line"] = c.check_line;
  nlohmann::ordered_json vars = nlohmann::ordered_json::array();
  for (const auto &v : c.variables)
    vars.push_back({{"name", v.name}, {"type", v.type.name()}});
  j["variables"] = std::move(vars);
  j["description"] = c.description;
  j["category"] = std::string(ToString(c.category));
  j["file"] = c.file;
  j["macro"] = c.macro;
  j["params"] = c.params;
  return j;
}

ContextEdgeCase CaseFromJson(const nlohmann::json &j, const TypeVocabulary &vocab) {
  ContextEdgeCase c;
  try {
    c.function = j.at("function").get<std::string>();
    c.check_line = j.at("check_line").get<int>();
    for (const auto &v : j.at("variables")) {
      const std::string type = v.at("type").get<std::string>();
      auto resolved = vocab.Resolve(type);
      if (!resolved) throw ConfigError("unknown type '" + type + "'");
      c.variables.push_back({v.at("name").get<std::string>(), *resolved});
    }
    c.description = j.at("description").get<std::string>();
    c.category = ParseCategory(j.at("category").get<std::string>());
    c.file = j.value("file", std::string());
    c.macro = j.value("macro", std::string());
    c.params = j.value("params", std::vector<std::string>());
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed edge case record: ") + e.what());
  }
  return c;
}

void WriteCasesJsonl(const std::filesystem::path &path,
                     const std::vector<ContextEdgeCase> &cases) {
  std::string out;
  for (const auto &c : cases) out += CaseToJson(c).dump() + "\n";
  WriteFile(path, out);
}

std::vector<ContextEdgeCase> ReadCasesJsonl(const std::filesystem::path &path,
                                            const TypeVocabulary &vocab) {
  std::vector<ContextEdgeCase> out;
  int lineno = 0;
  for (const auto &line : ReadLines(path)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    try {
      out.push_back(CaseFromJson(nlohmann::json::parse(line), vocab));
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError &e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace edgefuzz::analyzer
