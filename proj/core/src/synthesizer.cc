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

#include "edgefuzz/synthesizer.h"

#include <cstdio>
#include <regex>
#include <sstream>

namespace edgefuzz::synth {

namespace {

std::string Replace(std::string_view text, std::string_view from, std::string_view to) {
  if (from.empty()) return std::string(text);
  std::string out;
  size_t last = 0;
  for (size_t pos = text.find(from); pos != std::string_view::npos;
       pos = text.find(from, last)) {
    out.append(text.substr(last, pos - last));
    out.append(to);
    last = pos + from.size();
  }
  out.append(text.substr(last));
  return out;
}

std::string FormatSeconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", s);
  return buf;
}

std::string Fenced(const std::string &language, const std::string &code) {
  std::string out = "```" + ToLower(language) + "\n" + code;
  if (!code.empty() && code.back() != '\n') out += '\n';
  return out + "```";
}

int PositiveInt(const nlohmann::json &j, const char *key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer() || j[key].get<int>() < 1)
    throw ConfigError(std::string("synthesis.") + key + " must be a positive integer");
  return j[key].get<int>();
}

}  // namespace

SynthesisConfig SynthesisConfig::FromJson(const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("synthesis config must be an object");
  SynthesisConfig c;
  c.init_max = PositiveInt(j, "init_max", c.init_max);
  c.debug_max = PositiveInt(j, "debug_max", c.debug_max);
  c.error_budget = static_cast<size_t>(
      PositiveInt(j, "error_budget_bytes", static_cast<int>(c.error_budget)));
  if (j.contains("exec_timeout_s")) {
    if (!j["exec_timeout_s"].is_number() || !(j["exec_timeout_s"].get<double>() > 0))
      throw ConfigError("synthesis.exec_timeout_s must be a positive number");
    c.exec_timeout_s = j["exec_timeout_s"].get<double>();
  }
  if (j.contains("language")) {
    if (!j["language"].is_string() || j["language"].get<std::string>().empty())
      throw ConfigError("synthesis.language must be a non-empty string");
    c.language = j["language"].get<std::string>();
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<int>() < 0)
      throw ConfigError("synthesis.threads must be a non-negative integer");
    c.threads = j["threads"].get<size_t>();
  }
  return c;
}

std::string_view ToString(Status s) { return s == Status::kValid ? "valid" : "failed"; }

llm::Dialogue BuildGenerationPrompt(const catalog::ApiSignature &api,
                                    const SynthesisConfig &config) {
  std::ostringstream p;
  p << "You are testing a " << config.language << " library API. Write a minimal, "
    << "self-contained " << config.language << " program that constructs valid inputs "
    << "for every parameter, calls the API exactly once and prints the result.\n\n";
  p << llm::markers::kApiLine << api.name << "\n";
  p << llm::markers::kParametersLine << "\n";
  if (api.params.empty()) p << "  (none)\n";
  for (const auto &param : api.params) {
    p << "  " << param.position << ". " << param.name << ": " << param.type.name();
    if (param.optional) p << " (optional)";
    p << "\n";
  }
  if (!api.doc_hint.empty()) p << "Description: " << api.doc_hint << "\n";
  p << "\nRequirements:\n"
    << "- Pass every parameter explicitly, including optional ones.\n"
    << "- Where a device must be named, write the placeholder " << harness::kDevicePlaceholder
    << " literally.\n"
    << "- Print the result on one line as " << harness::kResultPrefix
    << " [v1, v2, ...] with decimal numbers.\n"
    << "- Reply with the program in a single fenced code block.\n";
  llm::Dialogue d(llm::Stage::kGeneration, api.name);
  d.Append(llm::Role::kUser, p.str());
  return d;
}

std::string RegenerateRequest(const std::string &error_info) {
  return "Running the program failed:\n" + error_info +
         "\n\nRegenerate the complete program so that it runs without this error. Reply "
         "with the program in a single fenced code block.";
}

std::string ExtractErrorInfo(const harness::ExecutionOutcome &o, size_t budget,
                             double timeout_s) {
  using harness::ExitStatus;
  if (o.exit_status == ExitStatus::kTimedOut)
    return TailBytes("timeout after " + FormatSeconds(timeout_s) + "s", budget);

  std::string prefix;
  if (o.exit_status == ExitStatus::kSignaled)
    prefix = "killed by " + o.signal_name.value_or("signal") + "; ";
  const std::string err = o.stderr_text;
  if (Trim(err).empty()) {
    const std::string what = o.exit_status == ExitStatus::kSignaled
                                 ? "killed by " + o.signal_name.value_or("signal")
                                 : "exit code " + std::to_string(o.exit_code);
    return TailBytes(what + ", no diagnostic", budget);
  }

  static const std::regex kFrame(R"re(^\s*File "[^"]*", line (\d+), in (.+)$)re");
  static const std::regex kException(R"(^[A-Za-z_][\w.]*(:.*)?$)");
  const std::vector<std::string> lines = Split(err, '\n');
  size_t tb = std::string::npos;
  for (size_t i = 0; i < lines.size(); ++i)
    if (lines[i].rfind("Traceback (most recent call last):", 0) == 0) tb = i;
  if (tb != std::string::npos) {
    std::string frame, exception;
    for (size_t i = tb + 1; i < lines.size(); ++i) {
      std::smatch m;
      if (std::regex_match(lines[i], m, kFrame)) {
        frame = "<frame " + Trim(m[2].str()) + ", line " + m[1].str() + ">";
      } else if (!lines[i].empty() && lines[i][0] != ' ' &&
                 std::regex_match(lines[i], kException)) {
        exception = Trim(lines[i]);
      }
    }
    if (!exception.empty()) {
      std::string info = prefix + exception;
      if (!frame.empty()) info += " in " + frame;
      return TailBytes(info, budget);
    }
  }
  return TailBytes(prefix + err, budget);
}

std::string ExtractProgram(const std::string &response) {
  if (auto block = llm::FirstFencedBlock(response)) return *block;
  return response;
}

TestProgram GenerateInitial(const catalog::ApiSignature &api, llm::Gateway &gateway,
                            const harness::TargetConfig &target,
                            const SynthesisConfig &config,
                            const std::filesystem::path &work_dir) {
  std::filesystem::create_directories(work_dir);
  const auto program_path = work_dir / ProgramFileName(api.name, target.program_extension);
  harness::TargetConfig run_config = target;
  run_config.timeout_s = config.exec_timeout_s;
  const harness::PatternSet patterns(target.runtime_error_patterns);
  const std::string device = target.PrimaryDevice();

  TestProgram result;
  result.api_name = api.name;

  auto ask = [&](const llm::Dialogue &d) -> std::optional<std::string> {
    try {
      std::string response = gateway.Complete(d);
      ++result.llm_calls;
      return response;
    } catch (const llm::BackendUnavailable &e) {
      result.cause = std::string("gateway failure: ") + e.what();
    } catch (const llm::FixtureMiss &e) {
      result.cause = std::string("gateway failure: ") + e.what();
    } catch (const llm::RuleMiss &e) {
      result.cause = std::string("gateway failure: ") + e.what();
    }
    return std::nullopt;
  };
  // Empty string when the program is valid, else the error information.
  auto run = [&](const std::string &program) -> std::optional<std::string> {
    if (!ContainsWord(program, api.ShortName()))
      return "The program never calls " + api.name + ".";
    WriteFile(program_path, Replace(program, harness::kDevicePlaceholder, device));
    auto outcome = harness::Execute(program_path, run_config);
    if (harness::Classify(outcome, patterns).cls == harness::OutcomeClass::kSuccess)
      return std::nullopt;
    // Keep scratch paths out of the dialogue so replayed hashes are stable.
    outcome.stderr_text = Replace(outcome.stderr_text, program_path.string(),
                                  program_path.filename().string());
    return ExtractErrorInfo(outcome, config.error_budget, config.exec_timeout_s);
  };

  for (int init = 0; init < config.init_max; ++init) {
    llm::Dialogue dialogue = BuildGenerationPrompt(api, config);
    result.init_rounds = init + 1;
    result.debug_rounds = 0;
    auto response = ask(dialogue);
    if (!response) {
      result.lineage = std::move(dialogue);
      return result;
    }
    std::string program = ExtractProgram(*response);
    auto error = run(program);
    for (int debug = 0;; ++debug) {
      if (!error) {
        result.status = Status::kValid;
        result.source_text = std::move(program);
        result.lineage = std::move(dialogue);
        result.cause.clear();
        return result;
      }
      // The last regeneration is checked above before giving up the round.
      if (debug == config.debug_max) break;
      dialogue.Append(llm::Role::kAssistant, Fenced(config.language, program));
      dialogue.Append(llm::Role::kUser, RegenerateRequest(*error));
      dialogue.set_stage(llm::Stage::kDebug);
      result.debugged = true;
      response = ask(dialogue);
      if (!response) {
        result.lineage = std::move(dialogue);
        return result;
      }
      program = ExtractProgram(*response);
      error = run(program);
      result.debug_rounds = debug + 1;
    }
    result.cause = *error;
    result.source_text = program;
    result.lineage = dialogue;
  }
  return result;
}

std::vector<TestProgram> SynthesizeAll(const std::vector<catalog::ApiSignature> &apis,
                                       llm::Gateway &gateway,
                                       const harness::TargetConfig &target,
                                       const SynthesisConfig &config,
                                       const std::filesystem::path &work_dir,
                                       WarningLog *warnings) {
  std::vector<TestProgram> out(apis.size());
  ParallelFor(apis.size(), config.threads, [&](size_t i) {
    out[i] = GenerateInitial(apis[i], gateway, target, config, work_dir);
    if (warnings && out[i].status == Status::kFailed)
      warnings->Add("gen", apis[i].name, "no valid program: " + out[i].cause);
  });
  return out;
}

std::optional<double> DebugSuccess::rate() const {
  if (succeeded + failed == 0) return std::nullopt;
  return static_cast<double>(succeeded) / (succeeded + failed);
}

DebugSuccess MeasureDebugSuccess(const std::vector<TestProgram> &programs) {
  DebugSuccess d;
  for (const auto &p : programs) {
    if (!p.debugged) continue;
    (p.status == Status::kValid ? d.succeeded : d.failed)++;
  }
  return d;
}

int Coverage(const std::vector<TestProgram> &programs) {
  int n = 0;
  for (const auto &p : programs) n += p.status == Status::kValid;
  return n;
}

std::string ProgramFileName(const std::string &api_name, const std::string &extension) {
  return SanitizeFileName(api_name) + extension;
}

void WritePrograms(const std::filesystem::path &dir, const std::vector<TestProgram> &programs,
                   const std::string &extension) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json report = nlohmann::ordered_json::array();
  for (const auto &p : programs) {
    nlohmann::ordered_json r;
    r["api"] = p.api_name;
    r["status"] = std::string(ToString(p.status));
    r["init_rounds"] = p.init_rounds;
    r["debug_rounds"] = p.debug_rounds;
    r["llm_calls"] = p.llm_calls;
    r["debugged"] = p.debugged;
    if (p.status == Status::kValid) {
      const std::string file = ProgramFileName(p.api_name, extension);
      WriteFile(dir / file, p.source_text);
      r["program"] = file;
    } else {
      r["cause"] = p.cause;
    }
    report.push_back(std::move(r));
  }
  WriteFile(dir / "synthesis_report.json", report.dump(2) + "\n");
}

std::vector<StoredProgram> ReadPrograms(const std::filesystem::path &dir) {
  const auto report_path = dir / "synthesis_report.json";
  if (!std::filesystem::exists(report_path))
    throw ConfigError("missing " + report_path.string() + "; run gen first");
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(ReadFile(report_path));
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(report_path.string() + ": " + e.what());
  }
  if (!report.is_array()) throw ConfigError(report_path.string() + ": expected an array");
  std::vector<StoredProgram> out;
  for (const auto &r : report) {
    if (!r.is_object() || !r.contains("api") || !r.contains("status"))
      throw ConfigError(report_path.string() + ": malformed record " + r.dump());
    if (r["status"] != "valid") continue;
    StoredProgram p;
    p.api_name = r["api"].get<std::string>();
    p.path = dir / r.at("program").get<std::string>();
    p.source_text = ReadFile(p.path);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace edgefuzz::synth
