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

// Edge-case corpus. Context-based cases are standardized into context-free
// templates (variable names replaced by typed slots such as 'Tensor_1'),
// deduplicated and clustered by etype pattern. Target APIs pull every case
// whose pattern is a sub-multiset of their own.
#ifndef EDGEFUZZ_CORPUS_H_
#define EDGEFUZZ_CORPUS_H_

#include <compare>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/analyzer.h"
#include "edgefuzz/catalog.h"
#include "edgefuzz/common.h"

namespace edgefuzz::corpus {

enum class Kind { kIndividual, kCompound };
std::string_view ToString(Kind kind);

struct Provenance {
  std::string file;
  int line = 0;
  std::string function;
  std::string macro;

  friend auto operator<=>(const Provenance &, const Provenance &) = default;
  friend bool operator==(const Provenance &, const Provenance &) = default;
};

struct ContextFreeEdgeCase {
  std::string id;
  EtypePattern pattern;
  Kind kind = Kind::kIndividual;
  std::string template_text;
  analyzer::Category category = analyzer::Category::kOther;
  std::vector<Provenance> provenance;  // sorted, non-empty for mined cases
};

class StandardizeError : public Error {
 public:
  using Error::Error;
};

// "Tensor_1" style slot name.
std::string SlotName(const BaseType &type, int index);

// Replaces each variable mention by its slot, numbered per type in order of
// first mention. A type word right before the name ("Tensor self") and quotes
// around it are absorbed, so the slot always renders as 'Tensor_1'.
// Variables never mentioned are left out of the pattern. Throws when no
// variable is mentioned or when another interface parameter is.
ContextFreeEdgeCase Standardize(const analyzer::ContextEdgeCase &c);

// Cases that fail standardization are dropped with a warning.
std::vector<ContextFreeEdgeCase> StandardizeAll(
    const std::vector<analyzer::ContextEdgeCase> &cases, WarningLog *warnings = nullptr);

// Turns a context-free case back into a context-based one whose variables
// are its slots. Standardize() of the result reproduces the template.
analyzer::ContextEdgeCase AsContextCase(const ContextFreeEdgeCase &c);

// Lowercase, whitespace collapsed, terminal punctuation stripped.
std::string NormalizeTemplate(std::string_view text);

// First 16 hex digits of SHA-256 over the pattern key and normalized
// template.
std::string CaseId(const EtypePattern &pattern, std::string_view template_text);

// Checks slot invariants: exactly slots T_1..T_n for each type T of the
// pattern, each mentioned at least once. Returns an error message or "".
std::string CheckSlots(const ContextFreeEdgeCase &c);

class EdgeCaseCorpus {
 public:
  // Deduplicates on (pattern key, normalized template), merging provenance.
  // Clusters are ordered by key; each cluster by first provenance.
  static EdgeCaseCorpus Build(std::vector<ContextFreeEdgeCase> cases);

  const std::map<std::string, std::vector<ContextFreeEdgeCase>> &clusters() const {
    return clusters_;
  }
  size_t size() const;
  bool empty() const { return clusters_.empty(); }

 private:
  std::map<std::string, std::vector<ContextFreeEdgeCase>> clusters_;
};

// Every case whose pattern is a non-empty sub-multiset of `api`, in
// (pattern key, provenance) order.
std::vector<const ContextFreeEdgeCase *> Match(const EtypePattern &api,
                                               const EdgeCaseCorpus &corpus);

struct Instantiation {
  std::string text;
  std::vector<int> positions;  // 1-based parameter positions, ascending
  std::map<std::string, std::string> binding;  // slot -> parameter name
};

// Individual case: one instantiation per parameter of the slot's type.
// Compound case: slots T_1..T_k bound to the first k parameters of type T.
// Empty when the API lacks the parameters.
std::vector<Instantiation> Concretize(const ContextFreeEdgeCase &c,
                                      const catalog::ApiSignature &api);

// Template with the index dropped for types that occur once
// ("'Tensor' is a complex tensor").
std::string RenderTemplate(const ContextFreeEdgeCase &c);

nlohmann::ordered_json CaseToJson(const ContextFreeEdgeCase &c);
ContextFreeEdgeCase CaseFromJson(const nlohmann::json &j,
                                 const TypeVocabulary &vocab = TypeVocabulary::Default());
void WriteCorpusJsonl(const std::filesystem::path &path, const EdgeCaseCorpus &corpus);
// Validates ids and slots; records go back to their clusters.
EdgeCaseCorpus ReadCorpusJsonl(const std::filesystem::path &path,
                               const TypeVocabulary &vocab = TypeVocabulary::Default());

}  // namespace edgefuzz::corpus

#endif  // EDGEFUZZ_CORPUS_H_
