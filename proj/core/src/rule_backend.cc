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

// Rule backend. It only looks at the few marker lines the prompt builders
// emit (see llm::markers), so prompt wording can change freely around them.

#include <regex>
#include <sstream>

#include "edgefuzz/llm.h"

namespace edgefuzz::llm {

namespace {

std::string Expand(const std::string &tmpl, const std::smatch &m) {
  std::string out;
  for (size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '$' && i + 1 < tmpl.size() && tmpl[i + 1] >= '1' &&
        tmpl[i + 1] <= '9') {
      const size_t group = static_cast<size_t>(tmpl[i + 1] - '0');
      if (group < m.size()) out += m[group].str();
      ++i;
      continue;
    }
    out.push_back(tmpl[i]);
  }
  return out;
}

std::vector<std::string> Lines(std::string_view text) {
  std::vector<std::string> out = Split(text, '\n');
  for (auto &l : out)
    if (!l.empty() && l.back() == '\r') l.pop_back();
  return out;
}

const std::string &FirstUserMessage(const Dialogue &dialogue) {
  for (const auto &m : dialogue.messages())
    if (m.role == Role::kUser) return m.content;
  return dialogue.messages().back().content;
}

std::string Fence(const std::string &language, const std::string &code) {
  std::string out = "```" + language + "\n" + code;
  if (!code.empty() && code.back() != '\n') out += '\n';
  return out + "```\n";
}

std::regex Compile(const std::string &pattern) {
  try {
    return std::regex(pattern, std::regex::ECMAScript);
  } catch (const std::regex_error &e) {
    throw ConfigError("bad rule regex '" + pattern + "': " + e.what());
  }
}

}  // namespace

RuleBackend::RuleBackend(nlohmann::json rules) : rules_(std::move(rules)) {
  if (!rules_.is_object()) throw ConfigError("rule file must be a JSON object");
  // Validate regexes up front so a bad rule file fails at load time.
  for (const char *section : {"analysis", "mutation"}) {
    if (!rules_.contains(section)) continue;
    if (!rules_[section].is_array())
      throw ConfigError(std::string("rules.") + section + " must be an array");
    for (const auto &rule : rules_[section])
      Compile(rule.at("match").get<std::string>());
  }
}

std::unique_ptr<RuleBackend> RuleBackend::FromFile(
    const std::filesystem::path &path) {
  try {
    return std::make_unique<RuleBackend>(nlohmann::json::parse(ReadFile(path)));
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string RuleBackend::Complete(const Dialogue &dialogue,
                                  const CompletionParams &) {
  switch (dialogue.stage()) {
    case Stage::kAnalysis:
      return Analyze(dialogue.messages().back().content);
    case Stage::kGeneration:
    case Stage::kDebug:
      // A regeneration request gets the same program again; the rules carry
      // no notion of fixing an error.
      return Generate(FirstUserMessage(dialogue));
    case Stage::kMutation:
      return Mutate(dialogue.messages().back().content);
  }
  throw RuleMiss("unknown stage");
}

std::string RuleBackend::Analyze(const std::string &prompt) const {
  const size_t marker = prompt.find(markers::kCodeBlockLine);
  auto block = FirstFencedBlock(prompt, marker == std::string::npos ? 0 : marker);
  if (!block) throw RuleMiss("analysis prompt has no code block");
  std::vector<std::string> lines = Lines(*block);
  while (!lines.empty() && Trim(lines.back()).empty()) lines.pop_back();
  // Header first, closing brace last, one check per line between.
  if (lines.size() < 3) throw RuleMiss("analysis code block has no checks");

  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  const auto &rules = rules_.contains("analysis") ? rules_["analysis"]
                                                  : nlohmann::json::array();
  for (size_t i = 1; i + 1 < lines.size(); ++i) {
    const std::string check = Trim(lines[i]);
    for (const auto &rule : rules) {
      std::smatch m;
      const std::regex re = Compile(rule.at("match").get<std::string>());
      if (!std::regex_search(check, m, re)) continue;
      nlohmann::ordered_json vars = nlohmann::ordered_json::array();
      for (const auto &v : rule.at("variables"))
        vars.push_back({{"name", Expand(v.at("name").get<std::string>(), m)},
                        {"type", Expand(v.at("type").get<std::string>(), m)}});
      nlohmann::ordered_json entry;
      entry["check"] = static_cast<int>(i);
      entry["variables"] = std::move(vars);
      entry["edge_case"] = Expand(rule.at("edge_case").get<std::string>(), m);
      entries.push_back(std::move(entry));
      break;
    }
  }
  if (entries.empty()) throw RuleMiss("no analysis rule matches any check");
  return Fence("json", entries.dump(2));
}

std::string RuleBackend::Generate(const std::string &prompt) const {
  if (!rules_.contains("generation"))
    throw RuleMiss("rule file has no generation section");
  const auto &gen = rules_["generation"];

  std::string api;
  std::vector<std::pair<std::string, std::string>> params;
  static const std::regex kParam(R"(^\s*\d+\.\s+([A-Za-z_]\w*):\s+([A-Za-z_]\w*))");
  bool in_params = false;
  for (const auto &line : Lines(prompt)) {
    if (line.rfind(markers::kApiLine, 0) == 0) {
      api = Trim(line.substr(markers::kApiLine.size()));
      continue;
    }
    if (line.rfind(markers::kParametersLine, 0) == 0) {
      in_params = true;
      continue;
    }
    if (in_params) {
      std::smatch m;
      if (std::regex_search(line, m, kParam)) {
        params.emplace_back(m[1].str(), m[2].str());
      } else if (!Trim(line).empty()) {
        in_params = false;
      }
    }
  }
  if (api.empty()) throw RuleMiss("generation prompt names no API");

  std::ostringstream code;
  if (gen.contains("preamble"))
    for (const auto &line : gen["preamble"]) code << line.get<std::string>() << "\n";
  const auto &values = gen.contains("values") ? gen["values"] : nlohmann::json::object();
  std::string args;
  for (const auto &[name, type] : params) {
    if (!values.contains(type))
      throw RuleMiss("no value rule for type " + type + " (" + api + "." + name + ")");
    code << name << " = " << values[type].get<std::string>() << "\n";
    if (!args.empty()) args += ", ";
    args += name;
  }
  code << "result = " << api << "(" << args << ")\n";
  if (gen.contains("result")) code << gen["result"].get<std::string>() << "\n";
  return Fence(gen.value("language", std::string("python")), code.str());
}

std::string RuleBackend::Mutate(const std::string &prompt) const {
  std::string edge_case;
  for (const auto &line : Lines(prompt))
    if (line.rfind(markers::kEdgeCaseLine, 0) == 0)
      edge_case = Trim(line.substr(markers::kEdgeCaseLine.size()));
  if (edge_case.empty()) throw RuleMiss("mutation prompt has no edge case line");
  const size_t marker = prompt.find(markers::kBaseProgramLine);
  if (marker == std::string::npos) throw RuleMiss("mutation prompt has no base program");
  auto base = FirstFencedBlock(prompt, marker);
  if (!base) throw RuleMiss("mutation prompt has no base program");

  const auto &rules = rules_.contains("mutation") ? rules_["mutation"]
                                                  : nlohmann::json::array();
  std::vector<std::string> lines = Lines(*base);
  for (const auto &rule : rules) {
    std::smatch m;
    const std::regex re = Compile(rule.at("match").get<std::string>());
    if (!std::regex_search(edge_case, m, re)) continue;
    bool applied = false;
    std::vector<std::string> out = lines;
    for (const auto &[key, value] : rule.at("assign").items()) {
      const std::string name = Expand(key, m);
      const std::string prefix = name + " = ";
      for (auto &line : out) {
        if (line.rfind(prefix, 0) == 0) {
          line = prefix + Expand(value.get<std::string>(), m);
          applied = true;
          break;
        }
      }
    }
    if (!applied) continue;
    std::string code;
    for (size_t i = 0; i < out.size(); ++i) {
      code += out[i];
      if (i + 1 < out.size()) code += '\n';
    }
    const std::string language =
        rules_.contains("generation")
            ? rules_["generation"].value("language", std::string("python"))
            : std::string("python");
    return Fence(language, code);
  }
  throw RuleMiss("no mutation rule applies to edge case: " + edge_case);
}

}  // namespace edgefuzz::llm
