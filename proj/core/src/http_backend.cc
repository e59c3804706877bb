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

#include <algorithm>
#include <cmath>
#include <thread>

#include "httplib.h"

#include "edgefuzz/llm.h"

namespace edgefuzz::llm {

namespace {

bool Retryable(int status) {
  return status == 408 || status == 409 || status == 429 || status >= 500;
}

}  // namespace

HttpBackend::HttpBackend(HttpOptions options)
    : options_(std::move(options)), bucket_(options_.rate_limit_per_s) {
  const std::string &url = options_.base_url;
  const size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    throw ConfigError("llm.base_url needs a scheme: '" + url + "'");
  const size_t path = url.find('/', scheme + 3);
  host_ = url.substr(0, path);
  prefix_ = path == std::string::npos ? "" : url.substr(path);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

nlohmann::json HttpBackend::BuildRequest(const Dialogue &dialogue,
                                         const CompletionParams &params) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto &m : dialogue.messages())
    messages.push_back({{"role", std::string(ToString(m.role))},
                        {"content", m.content}});
  nlohmann::json req;
  req["model"] = params.model_id;
  req["messages"] = std::move(messages);
  req["temperature"] = params.temperature;
  req["max_tokens"] = params.max_tokens;
  return req;
}

std::string HttpBackend::ParseResponse(const std::string &body) {
  try {
    auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception &e) {
    throw BackendUnavailable(std::string("malformed completion response: ") +
                             e.what());
  }
}

std::string HttpBackend::Complete(const Dialogue &dialogue,
                                  const CompletionParams &params) {
  const std::string body = BuildRequest(dialogue, params).dump();
  httplib::Headers headers;
  if (!options_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + options_.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double delay = std::min(
          options_.backoff_max_s,
          options_.backoff_initial_s * std::pow(2.0, attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    bucket_.Acquire();
    httplib::Client client(host_);
    const auto timeout = std::chrono::duration<double>(options_.timeout_s);
    client.set_connection_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto res = client.Post(prefix_ + "/chat/completions", headers, body,
                           "application/json");
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return ParseResponse(res->body);
    last_error = "HTTP " + std::to_string(res->status);
    if (!Retryable(res->status)) break;
  }
  // The key is never part of the message.
  throw BackendUnavailable("completion endpoint " + host_ + prefix_ +
                           " failed: " + last_error);
}

}  // namespace edgefuzz::llm
