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

// Backend that answers from a per-subject script and remembers every
// dialogue it was shown. Safe for parallel callers.
#ifndef EDGEFUZZ_TESTS_SUPPORT_SUBJECT_SCRIPT_H_
#define EDGEFUZZ_TESTS_SUPPORT_SUBJECT_SCRIPT_H_

#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "edgefuzz/llm.h"

namespace edgefuzz::testing {

class SubjectScript : public llm::Backend {
 public:
  explicit SubjectScript(std::map<std::string, std::vector<std::string>> script) {
    for (auto &[subject, replies] : script)
      script_[subject] = std::deque<std::string>(replies.begin(), replies.end());
  }

  std::string Complete(const llm::Dialogue &d, const llm::CompletionParams &) override {
    std::lock_guard<std::mutex> lock(mu_);
    seen_[d.subject()].push_back(d);
    auto &queue = script_[d.subject()];
    if (queue.empty()) throw llm::RuleMiss("script exhausted for " + d.subject());
    std::string reply = queue.front();
    queue.pop_front();
    return reply;
  }

  std::vector<llm::Dialogue> Seen(const std::string &subject) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = seen_.find(subject);
    return it == seen_.end() ? std::vector<llm::Dialogue>{} : it->second;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::deque<std::string>> script_;
  std::map<std::string, std::vector<llm::Dialogue>> seen_;
};

}  // namespace edgefuzz::testing

#endif  // EDGEFUZZ_TESTS_SUPPORT_SUBJECT_SCRIPT_H_
