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

#include "edgefuzz/mutator.h"

#include <sstream>

namespace edgefuzz::mutate {

namespace {

double Rate(const nlohmann::json &j, const char *key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("policy.") + key + " must be a number");
  const double v = j[key].get<double>();
  if (!(v >= 0 && v <= 1)) throw ConfigError(std::string("policy.") + key + " must be in [0,1]");
  return v;
}

std::string PositionsTag(const std::vector<int> &positions) {
  std::string tag = "p";
  for (size_t i = 0; i < positions.size(); ++i) {
    if (i) tag += '-';
    tag += std::to_string(positions[i]);
  }
  return tag;
}

}  // namespace

double SelectionPolicy::RateFor(int position) const {
  if (position <= 2) return rate_pos_1_2;
  if (position <= 4) return rate_pos_3_4;
  return rate_pos_5_plus;
}

SelectionPolicy SelectionPolicy::FromJson(const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("policy config must be an object");
  SelectionPolicy p;
  p.rate_pos_1_2 = Rate(j, "rate_pos_1_2", p.rate_pos_1_2);
  p.rate_pos_3_4 = Rate(j, "rate_pos_3_4", p.rate_pos_3_4);
  p.rate_pos_5_plus = Rate(j, "rate_pos_5_plus", p.rate_pos_5_plus);
  p.compound_rate = Rate(j, "compound_rate", p.compound_rate);
  if (j.contains("rng_seed")) {
    if (!j["rng_seed"].is_number_integer()) throw ConfigError("policy.rng_seed must be an integer");
    p.rng_seed = j["rng_seed"].get<uint64_t>();
  }
  return p;
}

std::mt19937_64 ApiRng(uint64_t seed, const std::string &api_name) {
  const std::string digest = Sha256Hex(api_name);
  std::vector<uint32_t> words = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
  for (size_t i = 0; i + 8 <= 32; i += 8)
    words.push_back(static_cast<uint32_t>(std::stoul(digest.substr(i, 8), nullptr, 16)));
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

bool Keep(double rate, std::mt19937_64 &rng) {
  if (rate >= 1) return true;
  // 53 random bits, so the draw does not depend on the library's distributions.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < rate;
}

std::vector<MutationTask> SelectEdgeCases(
    const std::vector<const corpus::ContextFreeEdgeCase *> &matches,
    const catalog::ApiSignature &api, const std::string &base_program,
    const SelectionPolicy &policy, std::mt19937_64 &rng) {
  std::vector<MutationTask> tasks;
  for (const auto *c : matches) {
    for (auto &inst : corpus::Concretize(*c, api)) {
      const double rate = c->kind == corpus::Kind::kCompound
                              ? policy.compound_rate
                              : policy.RateFor(inst.positions.front());
      if (!Keep(rate, rng)) continue;
      tasks.push_back({api, base_program, *c, std::move(inst)});
    }
  }
  return tasks;
}

llm::Dialogue BuildMutationPrompt(const MutationTask &task, const std::string &language) {
  std::ostringstream p;
  p << "You are testing a " << language << " library API. Modify the base program so that "
    << "the edge case below holds for the named parameter";
  p << (task.instantiation.positions.size() > 1 ? "s" : "");
  p << " when the API is called. Keep the program runnable, keep the "
    << harness::kDevicePlaceholder << " placeholder and keep the " << harness::kResultPrefix
    << " line.\n\n";
  p << llm::markers::kApiLine << task.api.name << "\n";
  p << llm::markers::kParametersLine << "\n";
  if (task.api.params.empty()) p << "  (none)\n";
  for (const auto &param : task.api.params) {
    p << "  " << param.position << ". " << param.name << ": " << param.type.name();
    if (param.optional) p << " (optional)";
    p << "\n";
  }
  p << llm::markers::kEdgeCaseLine << task.instantiation.text << "\n";
  p << llm::markers::kBaseProgramLine << "\n```" << ToLower(language) << "\n"
    << task.base_program;
  if (!task.base_program.empty() && task.base_program.back() != '\n') p << "\n";
  p << "```\n\nReply with the modified program in a single fenced code block.\n";
  llm::Dialogue d(llm::Stage::kMutation, task.api.name);
  d.Append(llm::Role::kUser, p.str());
  return d;
}

ApiFuzzResult FuzzApi(const catalog::ApiSignature &api, const std::string &base_program,
                      const corpus::EdgeCaseCorpus &corpus, llm::Gateway &gateway,
                      const harness::TargetConfig &target, const FuzzConfig &config,
                      const std::filesystem::path &out_dir, WarningLog *warnings) {
  ApiFuzzResult result;
  result.api = api.name;
  auto rng = ApiRng(config.policy.rng_seed, api.name);
  const auto tasks =
      SelectEdgeCases(corpus::Match(EtypeOf(api), corpus), api, base_program, config.policy, rng);
  result.tasks = static_cast<int>(tasks.size());
  const std::filesystem::path rel_dir =
      std::filesystem::path("mutants") / SanitizeFileName(api.name);

  for (const auto &task : tasks) {
    std::string response;
    try {
      response = gateway.Complete(BuildMutationPrompt(task, config.language));
      ++result.llm_calls;
    } catch (const llm::BackendUnavailable &e) {
      ++result.skipped;
      if (warnings) warnings->Add("fuzz", api.name, std::string("task skipped: ") + e.what());
      continue;
    } catch (const llm::FixtureMiss &e) {
      ++result.skipped;
      if (warnings) warnings->Add("fuzz", api.name, std::string("task skipped: ") + e.what());
      continue;
    } catch (const llm::RuleMiss &e) {
      ++result.skipped;
      if (warnings) warnings->Add("fuzz", api.name, std::string("task skipped: ") + e.what());
      continue;
    }
    const std::string program = synth::ExtractProgram(response);
    const std::string stem = task.edge_case.id + "_" + PositionsTag(task.instantiation.positions);
    const auto rel_path = rel_dir / (stem + target.program_extension);
    WriteFile(out_dir / rel_path, program);
    const auto comparison =
        harness::CompareDevices(program, out_dir / rel_dir, stem, target, warnings);

    TaskOutcome o;
    o.api = api.name;
    o.edge_case_id = task.edge_case.id;
    o.instantiation = task.instantiation.text;
    o.positions = task.instantiation.positions;
    o.cls = comparison.classification.cls;
    o.signal_or_pattern = comparison.classification.diagnostic;
    o.program_path = rel_path.generic_string();
    result.outcomes.push_back(o);

    if (!harness::IsBugClass(o.cls)) continue;
    harness::BugReport bug;
    bug.api = api.name;
    bug.cls = o.cls;
    bug.fingerprint = harness::Fingerprint(api.name, o.cls, o.signal_or_pattern);
    bug.edge_case_id = o.edge_case_id;
    bug.instantiation = o.instantiation;
    bug.positions = o.positions;
    bug.signal_or_pattern = o.signal_or_pattern;
    bug.program_path = o.program_path;
    // The run that decided the class; for inconsistencies the first device.
    bug.outcome = comparison.runs.front();
    for (const auto &run : comparison.runs)
      if (run.exit_status != harness::ExitStatus::kCleanExit) {
        bug.outcome = run;
        break;
      }
    result.bugs.push_back(std::move(bug));
  }
  return result;
}

std::map<std::string, int> FuzzRun::BugsByClass() const {
  std::map<std::string, int> out;
  for (const auto &b : bugs) ++out[std::string(harness::ToString(b.report.cls))];
  return out;
}

int FuzzRun::Count(harness::OutcomeClass cls) const {
  int n = 0;
  for (const auto &r : per_api)
    for (const auto &o : r.outcomes) n += o.cls == cls;
  return n;
}

int FuzzRun::Tasks() const {
  int n = 0;
  for (const auto &r : per_api) n += r.tasks;
  return n;
}

FuzzRun FuzzAll(const std::vector<catalog::ApiSignature> &apis,
                const std::vector<synth::StoredProgram> &programs,
                const corpus::EdgeCaseCorpus &corpus, llm::Gateway &gateway,
                const harness::TargetConfig &target, const FuzzConfig &config,
                const std::filesystem::path &out_dir, WarningLog *warnings) {
  std::map<std::string, const synth::StoredProgram *> by_api;
  for (const auto &p : programs) by_api[p.api_name] = &p;
  std::vector<std::pair<const catalog::ApiSignature *, const synth::StoredProgram *>> work;
  for (const auto &api : apis) {
    auto it = by_api.find(api.name);
    if (it != by_api.end()) work.emplace_back(&api, it->second);
  }
  FuzzRun run;
  run.per_api.resize(work.size());
  ParallelFor(work.size(), config.threads, [&](size_t i) {
    run.per_api[i] = FuzzApi(*work[i].first, work[i].second->source_text, corpus, gateway,
                             target, config, out_dir, warnings);
  });
  std::vector<harness::BugReport> all;
  for (const auto &r : run.per_api) all.insert(all.end(), r.bugs.begin(), r.bugs.end());
  run.bugs = harness::Dedupe(all);
  return run;
}

nlohmann::ordered_json OutcomeToJson(const TaskOutcome &o) {
  nlohmann::ordered_json j;
  j["api"] = o.api;
  j["edge_case_id"] = o.edge_case_id;
  j["instantiation"] = o.instantiation;
  j["positions"] = o.positions;
  j["outcome_class"] = std::string(harness::ToString(o.cls));
  j["signal_or_pattern"] = o.signal_or_pattern;
  j["program_path"] = o.program_path;
  return j;
}

nlohmann::ordered_json BugToJson(const harness::DedupedBug &bug) {
  const auto &r = bug.report;
  nlohmann::ordered_json j;
  j["api"] = r.api;
  j["edge_case_id"] = r.edge_case_id;
  j["instantiation"] = r.instantiation;
  j["positions"] = r.positions;
  j["outcome_class"] = std::string(harness::ToString(r.cls));
  j["signal_or_pattern"] = r.signal_or_pattern;
  j["program_path"] = r.program_path;
  j["fingerprint"] = r.fingerprint;
  j["duplicates"] = bug.count;
  return j;
}

void WriteFuzzReports(const std::filesystem::path &out_dir, const FuzzRun &run) {
  std::filesystem::create_directories(out_dir);
  std::string bugs, outcomes;
  for (const auto &b : run.bugs) bugs += BugToJson(b).dump() + "\n";
  for (const auto &r : run.per_api)
    for (const auto &o : r.outcomes) outcomes += OutcomeToJson(o).dump() + "\n";
  WriteFile(out_dir / "bugs.jsonl", bugs);
  WriteFile(out_dir / "outcomes.jsonl", outcomes);
}

std::vector<StoredBug> ReadBugsJsonl(const std::filesystem::path &path) {
  std::vector<StoredBug> out;
  int lineno = 0;
  for (const auto &line : ReadLines(path)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      StoredBug b;
      b.api = j.at("api").get<std::string>();
      b.edge_case_id = j.at("edge_case_id").get<std::string>();
      b.instantiation = j.at("instantiation").get<std::string>();
      b.positions = j.at("positions").get<std::vector<int>>();
      b.cls = harness::ParseOutcomeClass(j.at("outcome_class").get<std::string>());
      b.signal_or_pattern = j.at("signal_or_pattern").get<std::string>();
      b.program_path = j.at("program_path").get<std::string>();
      b.fingerprint = j.value("fingerprint", std::string());
      b.duplicates = j.value("duplicates", 1);
      out.push_back(std::move(b));
    } catch (const nlohmann::json::exception &e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace edgefuzz::mutate
