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

// Shared vocabulary for every stage: error types, the base-type vocabulary
// used for etype patterns, the append-only warning log and a handful of
// text helpers.
#ifndef EDGEFUZZ_COMMON_H_
#define EDGEFUZZ_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edgefuzz {

// Error hierarchy. The CLI maps ConfigError to exit code 1 and
// EnvironmentError to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EnvironmentError : public Error {
 public:
  using Error::Error;
};

class IoError : public EnvironmentError {
 public:
  using EnvironmentError::EnvironmentError;
};

// ---------------------------------------------------------------------------
// Base types.

// Name of one base type ("Tensor", "Int", ...). Validity is decided by a
// TypeVocabulary, so the set can be extended through configuration.
class BaseType {
 public:
  BaseType() = default;
  explicit BaseType(std::string name) : name_(std::move(name)) {}

  const std::string &name() const { return name_; }

  friend bool operator==(const BaseType &, const BaseType &) = default;
  friend auto operator<=>(const BaseType &, const BaseType &) = default;

 private:
  std::string name_;
};

class TypeVocabulary {
 public:
  // Tensor, Int, Bool, Str, Float, Scalar, List.
  static const TypeVocabulary &Default();

  TypeVocabulary() = default;
  explicit TypeVocabulary(std::vector<std::string> names);

  bool Contains(std::string_view name) const;
  // Exact match first, then case-insensitive; nullopt when unknown.
  std::optional<BaseType> Resolve(std::string_view name) const;
  const std::vector<std::string> &names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Warnings. Stages never abort on a single malformed item; they record a
// warning and move on.

struct Warning {
  std::string stage;
  std::string where;
  std::string message;
};

class WarningLog {
 public:
  void Add(std::string stage, std::string where, std::string message);
  std::vector<Warning> Snapshot() const;
  size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<Warning> warnings_;
};

// ---------------------------------------------------------------------------
// Text helpers.

std::string Trim(std::string_view s);
std::string CollapseWhitespace(std::string_view s);
std::string ToLower(std::string_view s);
std::vector<std::string> Split(std::string_view s, char sep);
bool IsIdentStart(char c);
bool IsIdentChar(char c);
bool IsIdentifier(std::string_view s);

// True if `word` occurs in `text` delimited by non-identifier characters.
bool ContainsWord(std::string_view text, std::string_view word);

// Keeps at most `budget` trailing bytes without splitting a UTF-8 sequence.
std::string TailBytes(std::string_view s, size_t budget);

// Lowercase hex SHA-256 digest.
std::string Sha256Hex(std::string_view data);

std::string ReadFile(const std::filesystem::path &path);
void WriteFile(const std::filesystem::path &path, std::string_view contents);
std::vector<std::string> ReadLines(const std::filesystem::path &path);

// Makes a name safe for use as a file name component.
std::string SanitizeFileName(std::string_view name);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Exceptions from fn are rethrown after all workers join.
void ParallelFor(size_t n, size_t threads,
                 const std::function<void(size_t)> &fn);

}  // namespace edgefuzz

#endif  // EDGEFUZZ_COMMON_H_
