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

// Target API signatures and etype patterns (multisets of base types).
#ifndef EDGEFUZZ_CATALOG_H_
#define EDGEFUZZ_CATALOG_H_

#include <compare>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/common.h"

namespace edgefuzz {

// Multiset over BaseType.
class EtypePattern {
 public:
  EtypePattern() = default;

  void Add(const BaseType &type, int n = 1);
  int Count(const BaseType &type) const;
  int size() const;
  bool empty() const { return counts_.empty(); }
  const std::map<BaseType, int> &counts() const { return counts_; }

  // Types in lexicographic order with counts, e.g. "Int:1|Tensor:2".
  // Empty pattern -> "".
  std::string Key() const;
  static EtypePattern FromKey(std::string_view key,
                              const TypeVocabulary &vocab = TypeVocabulary::Default());

  // Multiset inclusion: every count here <= the count in `other`.
  bool IsSubsetOf(const EtypePattern &other) const;

  friend bool operator==(const EtypePattern &, const EtypePattern &) = default;

 private:
  std::map<BaseType, int> counts_;
};

namespace catalog {

struct ApiParam {
  std::string name;
  BaseType type;
  int position = 0;  // 1-based
  bool optional = false;
};

struct ApiSignature {
  std::string name;  // qualified, e.g. mt.add
  std::vector<ApiParam> params;
  std::string doc_hint;

  // Last dotted component ("add" for "mt.add").
  std::string ShortName() const;
};

// Validates identifiers, unique API and parameter names, vocabulary types.
// Errors name the offending record. `source` is used in messages only.
std::vector<ApiSignature> ParseCatalog(const nlohmann::json &j,
                                       const TypeVocabulary &vocab,
                                       std::string_view source = "catalog");
std::vector<ApiSignature> LoadCatalog(const std::filesystem::path &path,
                                      const TypeVocabulary &vocab = TypeVocabulary::Default());

// Required and optional parameters alike.
EtypePattern EtypeOf(const ApiSignature &api);

nlohmann::ordered_json SignatureToJson(const ApiSignature &api);

}  // namespace catalog
}  // namespace edgefuzz

#endif  // EDGEFUZZ_CATALOG_H_
