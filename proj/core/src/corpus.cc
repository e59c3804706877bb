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

#include "edgefuzz/corpus.h"

#include <algorithm>
#include <cctype>
#include <set>

namespace edgefuzz::corpus {

namespace {

constexpr std::string_view kStage = "standardize";

bool IsQuote(char c) { return c == '\'' || c == '"' || c == '`'; }

// Whole-identifier occurrences of `word` in `text`.
std::vector<size_t> FindWord(std::string_view text, std::string_view word) {
  std::vector<size_t> out;
  if (word.empty()) return out;
  for (size_t pos = text.find(word); pos != std::string_view::npos;
       pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !IsIdentChar(text[pos - 1]);
    const size_t end = pos + word.size();
    const bool right = end >= text.size() || !IsIdentChar(text[end]);
    if (left && right) out.push_back(pos);
  }
  return out;
}

std::string ReplaceWord(std::string_view text, std::string_view word,
                        std::string_view replacement) {
  std::string out;
  size_t last = 0;
  for (size_t pos : FindWord(text, word)) {
    out.append(text.substr(last, pos - last));
    out.append(replacement);
    last = pos + word.size();
  }
  out.append(text.substr(last));
  return out;
}

Provenance ProvenanceOf(const analyzer::ContextEdgeCase &c) {
  return {c.file, c.check_line, c.function, c.macro};
}

const Provenance *FirstProvenance(const ContextFreeEdgeCase &c) {
  return c.provenance.empty() ? nullptr : &c.provenance.front();
}

bool ProvenanceLess(const ContextFreeEdgeCase &a, const ContextFreeEdgeCase &b) {
  const Provenance *pa = FirstProvenance(a);
  const Provenance *pb = FirstProvenance(b);
  if (!pa || !pb) return pa == nullptr && pb != nullptr;
  return *pa < *pb;
}

}  // namespace

std::string_view ToString(Kind kind) {
  return kind == Kind::kIndividual ? "individual" : "compound";
}

std::string SlotName(const BaseType &type, int index) {
  return type.name() + "_" + std::to_string(index);
}

ContextFreeEdgeCase Standardize(const analyzer::ContextEdgeCase &c) {
  const std::string &text = c.description;
  struct Mention {
    size_t begin, end;
    size_t var;
  };
  std::vector<Mention> mentions;
  for (size_t v = 0; v < c.variables.size(); ++v) {
    const std::string &name = c.variables[v].name;
    for (size_t pos : FindWord(text, name)) mentions.push_back({pos, pos + name.size(), v});
  }
  if (mentions.empty())
    throw StandardizeError("edge case '" + text + "' mentions none of its variables");
  std::sort(mentions.begin(), mentions.end(),
            [](const Mention &a, const Mention &b) { return a.begin < b.begin; });

  std::set<std::string> var_names;
  for (const auto &v : c.variables) var_names.insert(v.name);
  for (const auto &p : c.params)
    if (!var_names.count(p) && ContainsWord(text, p))
      throw StandardizeError("edge case '" + text + "' mentions parameter '" + p +
                             "' which is not among its variables");

  // Slot numbers per type, by first mention.
  std::map<size_t, std::string> slot_of_var;
  std::map<BaseType, int> next_index;
  EtypePattern pattern;
  for (const auto &m : mentions) {
    if (slot_of_var.count(m.var)) continue;
    const BaseType &type = c.variables[m.var].type;
    slot_of_var[m.var] = SlotName(type, ++next_index[type]);
    pattern.Add(type);
  }

  std::string out;
  size_t last = 0;
  for (const auto &m : mentions) {
    size_t begin = m.begin, end = m.end;
    if (begin > 0 && end < text.size() && IsQuote(text[begin - 1]) &&
        text[end] == text[begin - 1]) {
      --begin;
      ++end;
    }
    // Absorb a type word directly in front: "Tensor self" -> 'Tensor_1'.
    size_t word_end = begin;
    while (word_end > last && text[word_end - 1] == ' ') --word_end;
    if (word_end < begin) {
      size_t word_begin = word_end;
      while (word_begin > last && IsIdentChar(text[word_begin - 1])) --word_begin;
      const std::string word = text.substr(word_begin, word_end - word_begin);
      if (!word.empty() && ToLower(word) == ToLower(c.variables[m.var].type.name()) &&
          (word_begin == 0 || !IsIdentChar(text[word_begin - 1])))
        begin = word_begin;
    }
    out.append(text, last, begin - last);
    out += "'" + slot_of_var[m.var] + "'";
    last = end;
  }
  out.append(text, last, std::string::npos);

  ContextFreeEdgeCase cf;
  cf.pattern = std::move(pattern);
  cf.kind = cf.pattern.size() == 1 ? Kind::kIndividual : Kind::kCompound;
  cf.template_text = std::move(out);
  cf.category = c.category;
  cf.id = CaseId(cf.pattern, cf.template_text);
  cf.provenance.push_back(ProvenanceOf(c));
  return cf;
}

std::vector<ContextFreeEdgeCase> StandardizeAll(
    const std::vector<analyzer::ContextEdgeCase> &cases, WarningLog *warnings) {
  std::vector<ContextFreeEdgeCase> out;
  for (const auto &c : cases) {
    try {
      out.push_back(Standardize(c));
    } catch (const StandardizeError &e) {
      if (warnings)
        warnings->Add(std::string(kStage),
                      c.file + ":" + std::to_string(c.check_line) + " " + c.function,
                      std::string(e.what()) + "; dropped");
    }
  }
  return out;
}

analyzer::ContextEdgeCase AsContextCase(const ContextFreeEdgeCase &c) {
  analyzer::ContextEdgeCase out;
  for (const auto &[type, n] : c.pattern.counts())
    for (int i = 1; i <= n; ++i) {
      out.variables.push_back({SlotName(type, i), type});
      out.params.push_back(SlotName(type, i));
    }
  out.description = c.template_text;
  out.category = c.category;
  if (!c.provenance.empty()) {
    out.file = c.provenance[0].file;
    out.check_line = c.provenance[0].line;
    out.function = c.provenance[0].function;
    out.macro = c.provenance[0].macro;
  }
  return out;
}

std::string NormalizeTemplate(std::string_view text) {
  std::string out = ToLower(CollapseWhitespace(text));
  while (!out.empty() && std::string_view(".!?;:,").find(out.back()) != std::string_view::npos)
    out.pop_back();
  return Trim(out);
}

std::string CaseId(const EtypePattern &pattern, std::string_view template_text) {
  return Sha256Hex(pattern.Key() + "\n" + NormalizeTemplate(template_text)).substr(0, 16);
}

std::string CheckSlots(const ContextFreeEdgeCase &c) {
  if (c.pattern.empty()) return "empty pattern";
  if ((c.pattern.size() == 1) != (c.kind == Kind::kIndividual))
    return "kind does not match pattern size";
  std::set<std::string> required;
  for (const auto &[type, n] : c.pattern.counts())
    for (int i = 1; i <= n; ++i) required.insert(SlotName(type, i));
  // Any Capitalized_N token is a slot.
  const std::string &t = c.template_text;
  std::set<std::string> seen;
  for (size_t i = 0; i < t.size();) {
    if (!IsIdentStart(t[i]) || (i > 0 && IsIdentChar(t[i - 1]))) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < t.size() && IsIdentChar(t[j])) ++j;
    const std::string token = t.substr(i, j - i);
    i = j;
    const size_t us = token.rfind('_');
    if (us == std::string::npos || us == 0 || us + 1 == token.size()) continue;
    if (!std::isupper(static_cast<unsigned char>(token[0]))) continue;
    if (!std::all_of(token.begin() + us + 1, token.end(),
                     [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }))
      continue;
    if (!required.count(token)) return "unexpected slot " + token;
    seen.insert(token);
  }
  for (const auto &slot : required)
    if (!seen.count(slot)) return "slot " + slot + " never mentioned";
  return "";
}

EdgeCaseCorpus EdgeCaseCorpus::Build(std::vector<ContextFreeEdgeCase> cases) {
  for (auto &c : cases) {
    std::sort(c.provenance.begin(), c.provenance.end());
    c.provenance.erase(std::unique(c.provenance.begin(), c.provenance.end()),
                       c.provenance.end());
  }
  std::stable_sort(cases.begin(), cases.end(), ProvenanceLess);
  EdgeCaseCorpus corpus;
  std::map<std::pair<std::string, std::string>, size_t> index;
  for (auto &c : cases) {
    const std::string key = c.pattern.Key();
    const auto dedupe_key = std::make_pair(key, NormalizeTemplate(c.template_text));
    auto &cluster = corpus.clusters_[key];
    auto it = index.find(dedupe_key);
    if (it != index.end()) {
      auto &kept = cluster[it->second].provenance;
      kept.insert(kept.end(), c.provenance.begin(), c.provenance.end());
      std::sort(kept.begin(), kept.end());
      kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
      continue;
    }
    c.kind = c.pattern.size() == 1 ? Kind::kIndividual : Kind::kCompound;
    c.id = CaseId(c.pattern, c.template_text);
    index.emplace(dedupe_key, cluster.size());
    cluster.push_back(std::move(c));
  }
  for (auto &[key, cluster] : corpus.clusters_)
    std::stable_sort(cluster.begin(), cluster.end(), ProvenanceLess);
  return corpus;
}

size_t EdgeCaseCorpus::size() const {
  size_t n = 0;
  for (const auto &[key, cluster] : clusters_) n += cluster.size();
  return n;
}

std::vector<const ContextFreeEdgeCase *> Match(const EtypePattern &api,
                                               const EdgeCaseCorpus &corpus) {
  std::vector<const ContextFreeEdgeCase *> out;
  for (const auto &[key, cluster] : corpus.clusters()) {
    if (cluster.empty() || cluster.front().pattern.empty()) continue;
    if (!cluster.front().pattern.IsSubsetOf(api)) continue;
    for (const auto &c : cluster) out.push_back(&c);
  }
  return out;
}

std::vector<Instantiation> Concretize(const ContextFreeEdgeCase &c,
                                      const catalog::ApiSignature &api) {
  std::vector<Instantiation> out;
  if (c.pattern.empty()) return out;
  if (c.pattern.size() == 1) {
    const BaseType &type = c.pattern.counts().begin()->first;
    const std::string slot = SlotName(type, 1);
    for (const auto &p : api.params) {
      if (p.type != type) continue;
      Instantiation inst;
      inst.text = ReplaceWord(c.template_text, slot, p.name);
      inst.positions = {p.position};
      inst.binding[slot] = p.name;
      out.push_back(std::move(inst));
    }
    return out;
  }
  Instantiation inst;
  inst.text = c.template_text;
  for (const auto &[type, n] : c.pattern.counts()) {
    std::vector<const catalog::ApiParam *> candidates;
    for (const auto &p : api.params)
      if (p.type == type) candidates.push_back(&p);
    if (static_cast<int>(candidates.size()) < n) return {};
    for (int i = 1; i <= n; ++i) {
      const std::string slot = SlotName(type, i);
      inst.binding[slot] = candidates[i - 1]->name;
      inst.positions.push_back(candidates[i - 1]->position);
    }
  }
  // Substitute all slots at once so a parameter named like a slot cannot
  // be substituted twice.
  std::string text;
  const std::string &t = c.template_text;
  for (size_t i = 0; i < t.size();) {
    if (IsIdentChar(t[i]) && (i == 0 || !IsIdentChar(t[i - 1]))) {
      size_t j = i;
      while (j < t.size() && IsIdentChar(t[j])) ++j;
      const std::string token = t.substr(i, j - i);
      auto it = inst.binding.find(token);
      text += it == inst.binding.end() ? token : it->second;
      i = j;
      continue;
    }
    text.push_back(t[i++]);
  }
  inst.text = std::move(text);
  std::sort(inst.positions.begin(), inst.positions.end());
  out.push_back(std::move(inst));
  return out;
}

std::string RenderTemplate(const ContextFreeEdgeCase &c) {
  std::string out = c.template_text;
  for (const auto &[type, n] : c.pattern.counts())
    if (n == 1) out = ReplaceWord(out, SlotName(type, 1), type.name());
  return out;
}

nlohmann::ordered_json CaseToJson(const ContextFreeEdgeCase &c) {
  nlohmann::ordered_json j;
  j["id"] = c.id;
  j["pattern"] = c.pattern.Key();
  j["kind"] = std::string(ToString(c.kind));
  j["template"] = c.template_text;
  j["category"] = std::string(analyzer::ToString(c.category));
  nlohmann::ordered_json prov = nlohmann::ordered_json::array();
  for (const auto &p : c.provenance)
    prov.push_back({{"file", p.file}, {"line", p.line}, {"function", p.function},
                    {"macro", p.macro}});
  j["provenance"] = std::move(prov);
  return j;
}

ContextFreeEdgeCase CaseFromJson(const nlohmann::json &j, const TypeVocabulary &vocab) {
  ContextFreeEdgeCase c;
  try {
    c.id = j.at("id").get<std::string>();
    c.pattern = EtypePattern::FromKey(j.at("pattern").get<std::string>(), vocab);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "individual") {
      c.kind = Kind::kIndividual;
    } else if (kind == "compound") {
      c.kind = Kind::kCompound;
    } else {
      throw ConfigError("unknown kind '" + kind + "'");
    }
    c.template_text = j.at("template").get<std::string>();
    c.category = analyzer::ParseCategory(j.at("category").get<std::string>());
    for (const auto &p : j.at("provenance"))
      c.provenance.push_back({p.at("file").get<std::string>(), p.at("line").get<int>(),
                              p.at("function").get<std::string>(),
                              p.value("macro", std::string())});
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed corpus record: ") + e.what());
  }
  if (const std::string problem = CheckSlots(c); !problem.empty())
    throw ConfigError("corpus record " + c.id + ": " + problem);
  if (c.id != CaseId(c.pattern, c.template_text))
    throw ConfigError("corpus record " + c.id + ": id does not match its content");
  return c;
}

void WriteCorpusJsonl(const std::filesystem::path &path, const EdgeCaseCorpus &corpus) {
  std::string out;
  for (const auto &[key, cluster] : corpus.clusters())
    for (const auto &c : cluster) out += CaseToJson(c).dump() + "\n";
  WriteFile(path, out);
}

EdgeCaseCorpus ReadCorpusJsonl(const std::filesystem::path &path,
                               const TypeVocabulary &vocab) {
  std::vector<ContextFreeEdgeCase> cases;
  int lineno = 0;
  for (const auto &line : ReadLines(path)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    try {
      cases.push_back(CaseFromJson(nlohmann::json::parse(line), vocab));
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ConfigError &e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return EdgeCaseCorpus::Build(std::move(cases));
}

}  // namespace edgefuzz::corpus
