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

#include "edgefuzz/catalog.h"

#include <set>

namespace edgefuzz {

void EtypePattern::Add(const BaseType &type, int n) {
  if (n <= 0) return;
  counts_[type] += n;
}

int EtypePattern::Count(const BaseType &type) const {
  auto it = counts_.find(type);
  return it == counts_.end() ? 0 : it->second;
}

int EtypePattern::size() const {
  int total = 0;
  for (const auto &[t, n] : counts_) total += n;
  return total;
}

std::string EtypePattern::Key() const {
  std::string key;
  for (const auto &[t, n] : counts_) {
    if (!key.empty()) key += '|';
    key += t.name() + ":" + std::to_string(n);
  }
  return key;
}

EtypePattern EtypePattern::FromKey(std::string_view key, const TypeVocabulary &vocab) {
  EtypePattern p;
  if (key.empty()) return p;
  std::string previous;
  for (const auto &part : Split(key, '|')) {
    const size_t colon = part.find(':');
    if (colon == std::string::npos)
      throw ConfigError("bad etype pattern '" + std::string(key) + "'");
    const std::string type = part.substr(0, colon);
    if (!vocab.Contains(type))
      throw ConfigError("unknown type '" + type + "' in pattern '" + std::string(key) + "'");
    if (!previous.empty() && type <= previous)
      throw ConfigError("etype pattern '" + std::string(key) + "' is not canonical");
    previous = type;
    int n = 0;
    try {
      size_t used = 0;
      n = std::stoi(part.substr(colon + 1), &used);
      if (used != part.size() - colon - 1) n = 0;
    } catch (const std::exception &) {
      n = 0;
    }
    if (n <= 0) throw ConfigError("bad count in pattern '" + std::string(key) + "'");
    p.Add(BaseType(type), n);
  }
  return p;
}

bool EtypePattern::IsSubsetOf(const EtypePattern &other) const {
  for (const auto &[t, n] : counts_)
    if (other.Count(t) < n) return false;
  return true;
}

namespace catalog {

std::string ApiSignature::ShortName() const {
  const size_t dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

namespace {

bool IsQualifiedName(std::string_view name) {
  if (name.empty()) return false;
  for (const auto &part : Split(name, '.'))
    if (!IsIdentifier(part)) return false;
  return true;
}

}  // namespace

std::vector<ApiSignature> ParseCatalog(const nlohmann::json &j,
                                       const TypeVocabulary &vocab,
                                       std::string_view source) {
  if (!j.is_array()) throw ConfigError(std::string(source) + ": catalog must be a JSON array");
  std::vector<ApiSignature> apis;
  std::set<std::string> names;
  size_t index = 0;
  for (const auto &rec : j) {
    const std::string where = std::string(source) + " record " + std::to_string(index++);
    auto fail = [&](const std::string &msg) -> ConfigError {
      std::string label = where;
      if (rec.is_object() && rec.contains("name") && rec["name"].is_string())
        label += " (" + rec["name"].get<std::string>() + ")";
      return ConfigError(label + ": " + msg);
    };
    if (!rec.is_object()) throw fail("not an object");
    if (!rec.contains("name") || !rec["name"].is_string()) throw fail("missing name");
    ApiSignature api;
    api.name = rec["name"].get<std::string>();
    if (!IsQualifiedName(api.name)) throw fail("name is not a dotted identifier");
    if (!names.insert(api.name).second) throw fail("duplicate API name");
    if (rec.contains("doc_hint")) {
      if (!rec["doc_hint"].is_string()) throw fail("doc_hint must be a string");
      api.doc_hint = rec["doc_hint"].get<std::string>();
    }
    const auto params = rec.value("params", nlohmann::json::array());
    if (!params.is_array()) throw fail("params must be an array");
    std::set<std::string> pnames;
    for (const auto &p : params) {
      if (!p.is_object() || !p.contains("name") || !p["name"].is_string() ||
          !p.contains("type") || !p["type"].is_string())
        throw fail("each parameter needs string name and type");
      ApiParam param;
      param.name = p["name"].get<std::string>();
      if (!IsIdentifier(param.name)) throw fail("bad parameter name '" + param.name + "'");
      if (!pnames.insert(param.name).second)
        throw fail("duplicate parameter '" + param.name + "'");
      const std::string type = p["type"].get<std::string>();
      if (!vocab.Contains(type))
        throw fail("parameter '" + param.name + "' has unknown type '" + type + "'");
      param.type = BaseType(type);
      if (p.contains("optional")) {
        if (!p["optional"].is_boolean()) throw fail("optional must be a boolean");
        param.optional = p["optional"].get<bool>();
      }
      param.position = static_cast<int>(api.params.size()) + 1;
      api.params.push_back(std::move(param));
    }
    apis.push_back(std::move(api));
  }
  return apis;
}

std::vector<ApiSignature> LoadCatalog(const std::filesystem::path &path,
                                      const TypeVocabulary &vocab) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ParseCatalog(j, vocab, path.string());
}

EtypePattern EtypeOf(const ApiSignature &api) {
  EtypePattern p;
  for (const auto &param : api.params) p.Add(param.type);
  return p;
}

nlohmann::ordered_json SignatureToJson(const ApiSignature &api) {
  nlohmann::ordered_json j;
  j["name"] = api.name;
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto &p : api.params)
    params.push_back({{"name", p.name}, {"type", p.type.name()}, {"optional", p.optional}});
  j["params"] = std::move(params);
  if (!api.doc_hint.empty()) j["doc_hint"] = api.doc_hint;
  return j;
}

}  // namespace catalog
}  // namespace edgefuzz
