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

// The minitarget test library: a small Python package with planted faults
// (see python/minitarget/__init__.py), its catalog, native checks and rules.
#ifndef EDGEFUZZ_TESTS_SUPPORT_MINITARGET_H_
#define EDGEFUZZ_TESTS_SUPPORT_MINITARGET_H_

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

#include "edgefuzz/harness.h"
#include "edgefuzz/pipeline.h"
#include "test_paths.h"

namespace edgefuzz::testing {

inline std::filesystem::path MiniTargetDir() { return FixturesDir() / "minitarget"; }

inline harness::TargetConfig MiniTargetConfig(double timeout_s = 10) {
  harness::TargetConfig c;
  c.interpreter_cmd = {"python3"};
  c.env["PYTHONPATH"] = (MiniTargetDir() / "python").string();
  c.env["PYTHONDONTWRITEBYTECODE"] = "1";
  c.timeout_s = timeout_s;
  c.device_tokens = {"cpu", "gpu"};
  c.runtime_error_patterns = {"INTERNAL ASSERT FAILED"};
  return c;
}

inline nlohmann::json MiniTargetConfigJson(double timeout_s = 10) {
  return nlohmann::json::parse(MiniTargetConfig(timeout_s).ToJson().dump());
}

// Every stage pointed at the minitarget with the rule backend; artifacts go
// under `work_dir`.
inline pipeline::PipelineConfig MiniPipelineConfig(const std::filesystem::path &work_dir,
                                                   double timeout_s = 3) {
  pipeline::PipelineConfig c;
  c.seed = 20261017;
  c.paths = pipeline::ArtifactPaths::Under(work_dir);
  c.paths.src = MiniTargetDir() / "native";
  c.paths.apis = MiniTargetDir() / "catalog.json";
  c.llm.backend = llm::BackendKind::kRule;
  c.llm.rules_path = MiniTargetDir() / "rules.json";
  c.target = MiniTargetConfig(timeout_s);
  c.synthesis.exec_timeout_s = timeout_s;
  c.Finalize();
  return c;
}

// Ground truth straight from the package: api -> outcome class.
inline std::map<std::string, std::string> SeededBugs() {
  const std::string cmd = "PYTHONPATH='" + (MiniTargetDir() / "python").string() +
                          "' PYTHONDONTWRITEBYTECODE=1 python3 -c 'import json, minitarget; "
                          "print(json.dumps(minitarget.SEEDED_BUGS))'";
  FILE *p = popen(cmd.c_str(), "r");
  if (!p) throw std::runtime_error("popen failed");
  std::string text;
  char buf[512];
  while (size_t n = fread(buf, 1, sizeof buf, p)) text.append(buf, n);
  if (pclose(p) != 0) throw std::runtime_error("cannot read SEEDED_BUGS");
  return nlohmann::json::parse(text).get<std::map<std::string, std::string>>();
}

}  // namespace edgefuzz::testing

#endif  // EDGEFUZZ_TESTS_SUPPORT_MINITARGET_H_
