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

#ifndef EDGEFUZZ_TOOLS_CLI_H_
#define EDGEFUZZ_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace edgefuzz::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitEnvironment = 2;

// `args` excludes the program name. Returns the process exit code.
int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace edgefuzz::cli

#endif  // EDGEFUZZ_TOOLS_CLI_H_
