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

// Check miner: finds input-check macro invocations (TORCH_CHECK and friends)
// in native source trees and assembles check-related code blocks, i.e. a
// function interface followed by the checks in its body that reference the
// interface's parameters.
//
// There is no C++ grammar here. Sources are first stripped of comments,
// string literals and preprocessor directives (keeping byte offsets), then a
// brace/paren matcher recovers function bodies and their headers.
#ifndef EDGEFUZZ_MINER_H_
#define EDGEFUZZ_MINER_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgefuzz/common.h"

namespace edgefuzz::miner {

struct CheckSite {
  std::string file_path;  // relative to the scanned root
  int line = 0;           // 1-based line of the macro name
  std::string macro_name;
  std::string raw_text;  // full invocation, macro name through closing paren
  std::string enclosing_function;  // empty when not inside a function body

  friend bool operator==(const CheckSite &, const CheckSite &) = default;
};

struct Parameter {
  std::string name;
  std::string declared_type;

  friend bool operator==(const Parameter &, const Parameter &) = default;
};

struct FunctionInterface {
  std::string name;
  std::vector<Parameter> parameters;
  std::string return_type;
  int start_line = 0;
  int end_line = 0;
  // Header as written, whitespace collapsed, without the body brace.
  std::string header_text;
  // Set when the header could not be split reliably; such functions are
  // reported with a warning and kept out of the blocks.
  bool ambiguous = false;
  std::string ambiguity;

  bool HasParameter(std::string_view name) const;
};

struct CheckBlock {
  std::string file;
  FunctionInterface interface;
  std::vector<CheckSite> checks;
  std::string block_text;
};

// One function body found in a file. `text` runs from the first character
// of the header through the closing brace.
struct FunctionSource {
  FunctionInterface interface;
  std::string text;
};

struct FileScan {
  std::vector<FunctionSource> functions;
  std::vector<CheckSite> sites;  // in line order
};

struct MinerConfig {
  std::vector<std::string> macros = {"TORCH_CHECK", "AT_CHECK"};
  std::vector<std::string> extensions = {".cc", ".cpp", ".cxx", ".h",
                                         ".hpp", ".cu", ".cuh"};
  size_t threads = 0;
};

// Replaces comment bodies, string/char literal contents and preprocessor
// directives with spaces. Newlines and byte offsets are preserved.
std::string StripCommentsAndStrings(std::string_view source);

// Parses a function header (everything before the body's opening brace).
FunctionInterface ParseInterface(std::string_view header);

// Scans one file's contents. Malformed sites go to `warnings` and are
// skipped.
FileScan ScanFile(std::string_view file_path, std::string_view contents,
                  const std::vector<std::string> &macros,
                  WarningLog *warnings = nullptr);

// Every macro invocation under `root` in files with one of `extensions`,
// ordered by (path, line). Throws IoError when root is unreadable.
std::vector<CheckSite> ScanSources(const std::filesystem::path &root,
                                   const std::vector<std::string> &macros,
                                   const std::vector<std::string> &extensions,
                                   WarningLog *warnings = nullptr,
                                   size_t threads = 0);

// Keeps the interface header and the macro invocations of `function_text`
// (nested lambdas included); drops every other statement.
CheckBlock ExtractBlock(std::string_view function_text,
                        const FunctionInterface &interface,
                        const std::vector<std::string> &macros,
                        std::string_view file = {});

// True when `check_text` mentions `param` as a variable: a whole word that
// is not a member of something else and not inside a string literal.
bool ReferencesParameter(std::string_view check_text, std::string_view param);

// Drops the checks that reference no interface parameter.
CheckBlock FilterParamChecked(const CheckBlock &block);

// Renders header + checks, one check per line.
std::string RenderBlockText(const FunctionInterface &interface,
                            const std::vector<CheckSite> &checks);

// Full mining pass: scan, extract, filter. Blocks with no remaining checks
// and ambiguous interfaces are dropped. Ordered by (file, start line).
std::vector<CheckBlock> MineTree(const std::filesystem::path &root,
                                 const MinerConfig &config,
                                 WarningLog *warnings = nullptr);

nlohmann::ordered_json BlockToJson(const CheckBlock &block);
CheckBlock BlockFromJson(const nlohmann::json &j);
void WriteBlocksJsonl(const std::filesystem::path &path,
                      const std::vector<CheckBlock> &blocks);
std::vector<CheckBlock> ReadBlocksJsonl(const std::filesystem::path &path);

}  // namespace edgefuzz::miner

#endif  // EDGEFUZZ_MINER_H_
