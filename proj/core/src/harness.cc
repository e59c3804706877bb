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

#include "edgefuzz/harness.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <set>
#include <unordered_map>

extern char **environ;

namespace edgefuzz::harness {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::string_view kSecretEnv = "LLM_API_KEY";

double Seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

// Resolves a bare command name against PATH. The child only calls execve.
std::string ResolveCommand(const std::string &cmd,
                           const std::map<std::string, std::string> &env) {
  if (cmd.find('/') != std::string::npos) return cmd;
  std::string path;
  if (auto it = env.find("PATH"); it != env.end()) {
    path = it->second;
  } else if (const char *p = std::getenv("PATH")) {
    path = p;
  } else {
    path = "/usr/bin:/bin";
  }
  for (const auto &dir : Split(path, ':')) {
    if (dir.empty()) continue;
    const std::string candidate = dir + "/" + cmd;
    if (access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  throw EnvironmentError("interpreter '" + cmd + "' not found on PATH");
}

// Keeps a bounded tail while reading.
class TailBuffer {
 public:
  explicit TailBuffer(size_t cap) : cap_(cap) {}
  void Append(const char *data, size_t n) {
    buf_.append(data, n);
    if (buf_.size() > 2 * cap_ + 4096) buf_.erase(0, buf_.size() - cap_ - 4);
  }
  std::string Take() const { return TailBytes(buf_, cap_); }

 private:
  size_t cap_;
  std::string buf_;
};

void SetNonBlocking(int fd) { fcntl(fd, F_SETFL, fcntl(fd, F_GETFL) | O_NONBLOCK); }

struct Pipe {
  int fds[2] = {-1, -1};
  void Open() {
    if (pipe2(fds, O_CLOEXEC) != 0)
      throw EnvironmentError(std::string("pipe: ") + std::strerror(errno));
  }
  void CloseRead() { if (fds[0] >= 0) close(fds[0]), fds[0] = -1; }
  void CloseWrite() { if (fds[1] >= 0) close(fds[1]), fds[1] = -1; }
  ~Pipe() {
    CloseRead();
    CloseWrite();
  }
};

std::vector<std::string> ChildEnvironment(const std::map<std::string, std::string> &extra) {
  std::map<std::string, std::string> merged;
  for (char **e = environ; e && *e; ++e) {
    std::string_view entry(*e);
    const size_t eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    merged[std::string(entry.substr(0, eq))] = std::string(entry.substr(eq + 1));
  }
  for (const auto &[k, v] : extra) merged[k] = v;
  merged.erase(std::string(kSecretEnv));
  std::vector<std::string> out;
  for (const auto &[k, v] : merged) out.push_back(k + "=" + v);
  return out;
}

int Rank(OutcomeClass c) {
  switch (c) {
    case OutcomeClass::kAbortSignal:
    case OutcomeClass::kSegfault:
      return 4;
    case OutcomeClass::kRuntimeErrorPattern:
      return 3;
    case OutcomeClass::kHang:
      return 2;
    case OutcomeClass::kGracefulRejection:
      return 1;
    default:
      return 0;
  }
}

std::string ReplaceAll(std::string_view text, std::string_view from, std::string_view to) {
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

}  // namespace

std::string_view ToString(ExitStatus s) {
  switch (s) {
    case ExitStatus::kCleanExit:
      return "clean_exit";
    case ExitStatus::kNonzeroExit:
      return "nonzero_exit";
    case ExitStatus::kSignaled:
      return "signaled";
    case ExitStatus::kTimedOut:
      return "timed_out";
  }
  return "?";
}

namespace {
constexpr std::pair<OutcomeClass, std::string_view> kClassNames[] = {
    {OutcomeClass::kSuccess, "success"},
    {OutcomeClass::kGracefulRejection, "graceful_rejection"},
    {OutcomeClass::kAbortSignal, "abort_signal"},
    {OutcomeClass::kSegfault, "segfault"},
    {OutcomeClass::kRuntimeErrorPattern, "runtime_error_pattern"},
    {OutcomeClass::kInconsistentOutput, "inconsistent_output"},
    {OutcomeClass::kHang, "hang"},
};
}  // namespace

std::string_view ToString(OutcomeClass c) {
  for (const auto &[cls, name] : kClassNames)
    if (cls == c) return name;
  return "?";
}

OutcomeClass ParseOutcomeClass(std::string_view s) {
  for (const auto &[cls, name] : kClassNames)
    if (name == s) return cls;
  throw ConfigError("unknown outcome class '" + std::string(s) + "'");
}

bool IsBugClass(OutcomeClass c) {
  return c == OutcomeClass::kAbortSignal || c == OutcomeClass::kSegfault ||
         c == OutcomeClass::kRuntimeErrorPattern || c == OutcomeClass::kInconsistentOutput;
}

SignalFamily FamilyOf(std::string_view signal_name) {
  return signal_name == "SIGSEGV" || signal_name == "SIGBUS" ? SignalFamily::kMemory
                                                             : SignalFamily::kAbort;
}

std::string SignalName(int signo) {
  static const std::unordered_map<int, const char *> kNames = {
      {SIGABRT, "SIGABRT"}, {SIGSEGV, "SIGSEGV"}, {SIGBUS, "SIGBUS"},   {SIGFPE, "SIGFPE"},
      {SIGILL, "SIGILL"},   {SIGTRAP, "SIGTRAP"}, {SIGKILL, "SIGKILL"}, {SIGTERM, "SIGTERM"},
      {SIGINT, "SIGINT"},   {SIGHUP, "SIGHUP"},   {SIGPIPE, "SIGPIPE"}, {SIGQUIT, "SIGQUIT"},
      {SIGSYS, "SIGSYS"},   {SIGUSR1, "SIGUSR1"}, {SIGUSR2, "SIGUSR2"}, {SIGALRM, "SIGALRM"},
      {SIGXCPU, "SIGXCPU"}, {SIGXFSZ, "SIGXFSZ"},
  };
  auto it = kNames.find(signo);
  return it == kNames.end() ? "SIG" + std::to_string(signo) : it->second;
}

std::string TargetConfig::PrimaryDevice() const {
  return device_tokens.empty() ? "cpu" : device_tokens.front();
}

TargetConfig TargetConfig::FromJson(const nlohmann::json &j) {
  if (!j.is_object()) throw ConfigError("target config must be an object");
  TargetConfig c;
  auto strings = [&](const char *key) {
    const auto &v = j.at(key);
    if (!v.is_array()) throw ConfigError(std::string("target.") + key + " must be an array");
    std::vector<std::string> out;
    for (const auto &s : v) {
      if (!s.is_string())
        throw ConfigError(std::string("target.") + key + " must contain strings");
      out.push_back(s.get<std::string>());
    }
    return out;
  };
  auto number = [&](const char *key) {
    if (!j.at(key).is_number())
      throw ConfigError(std::string("target.") + key + " must be a number");
    return j.at(key).get<double>();
  };
  if (j.contains("interpreter_cmd")) c.interpreter_cmd = strings("interpreter_cmd");
  if (c.interpreter_cmd.empty() || c.interpreter_cmd[0].empty())
    throw ConfigError("target.interpreter_cmd must name a command");
  if (j.contains("env")) {
    if (!j["env"].is_object()) throw ConfigError("target.env must be an object");
    for (const auto &[k, v] : j["env"].items()) {
      if (!v.is_string()) throw ConfigError("target.env." + k + " must be a string");
      if (k == kSecretEnv)
        throw ConfigError("target.env must not carry " + std::string(kSecretEnv));
      c.env[k] = v.get<std::string>();
    }
  }
  if (j.contains("timeout_s")) c.timeout_s = number("timeout_s");
  if (!(c.timeout_s > 0)) throw ConfigError("target.timeout_s must be positive");
  if (j.contains("device_tokens") && !j["device_tokens"].is_null()) {
    c.device_tokens = strings("device_tokens");
    if (c.device_tokens.size() != 2 || c.device_tokens[0] == c.device_tokens[1] ||
        c.device_tokens[0].empty() || c.device_tokens[1].empty())
      throw ConfigError("target.device_tokens must be two distinct non-empty tokens");
  }
  if (j.contains("runtime_error_patterns")) {
    c.runtime_error_patterns = strings("runtime_error_patterns");
    PatternSet check(c.runtime_error_patterns);  // throws on a bad regex
  }
  if (j.contains("consistency_tolerance")) c.consistency_tolerance = number("consistency_tolerance");
  if (!(c.consistency_tolerance >= 0))
    throw ConfigError("target.consistency_tolerance must be non-negative");
  if (j.contains("capture_cap_bytes")) {
    const double cap = number("capture_cap_bytes");
    if (!(cap >= 1)) throw ConfigError("target.capture_cap_bytes must be positive");
    c.capture_cap = static_cast<size_t>(cap);
  }
  if (j.contains("program_extension")) {
    if (!j["program_extension"].is_string())
      throw ConfigError("target.program_extension must be a string");
    c.program_extension = j["program_extension"].get<std::string>();
    if (c.program_extension.size() < 2 || c.program_extension[0] != '.')
      throw ConfigError("target.program_extension must look like '.py'");
  }
  if (j.contains("workers")) {
    const double w = number("workers");
    if (w < 0) throw ConfigError("target.workers must be non-negative");
    c.workers = static_cast<size_t>(w);
  }
  return c;
}

nlohmann::ordered_json TargetConfig::ToJson() const {
  nlohmann::ordered_json j;
  j["interpreter_cmd"] = interpreter_cmd;
  j["env"] = env;
  j["timeout_s"] = timeout_s;
  if (!device_tokens.empty()) j["device_tokens"] = device_tokens;
  j["runtime_error_patterns"] = runtime_error_patterns;
  j["consistency_tolerance"] = consistency_tolerance;
  j["capture_cap_bytes"] = capture_cap;
  j["program_extension"] = program_extension;
  j["workers"] = workers;
  return j;
}

ExecutionOutcome Execute(const std::filesystem::path &program, const TargetConfig &config) {
  if (!std::filesystem::exists(program))
    throw IoError("program file " + program.string() + " does not exist");
  const std::filesystem::path program_abs = std::filesystem::absolute(program);

  // Everything the child needs is built before fork.
  const std::string exe = ResolveCommand(config.interpreter_cmd[0], config.env);
  std::vector<std::string> args = config.interpreter_cmd;
  args.push_back(program_abs.string());
  std::vector<char *> argv;
  for (auto &a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::vector<std::string> env_strings = ChildEnvironment(config.env);
  std::vector<char *> envp;
  for (auto &e : env_strings) envp.push_back(e.data());
  envp.push_back(nullptr);

  std::string scratch_template =
      (std::filesystem::temp_directory_path() / "edgefuzz-run-XXXXXX").string();
  if (!mkdtemp(scratch_template.data()))
    throw EnvironmentError(std::string("mkdtemp: ") + std::strerror(errno));
  const std::string scratch = scratch_template;

  Pipe out, err, status_pipe;
  out.Open();
  err.Open();
  status_pipe.Open();

  const auto start = Clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    std::filesystem::remove_all(scratch);
    throw EnvironmentError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    const int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    dup2(out.fds[1], STDOUT_FILENO);
    dup2(err.fds[1], STDERR_FILENO);
    if (chdir(scratch.c_str()) != 0) _exit(126);
    signal(SIGPIPE, SIG_DFL);
    execve(exe.c_str(), argv.data(), envp.data());
    const int e = errno;
    (void)!write(status_pipe.fds[1], &e, sizeof e);
    _exit(127);
  }
  setpgid(pid, pid);
  out.CloseWrite();
  err.CloseWrite();
  status_pipe.CloseWrite();

  int exec_errno = 0;
  if (read(status_pipe.fds[0], &exec_errno, sizeof exec_errno) == sizeof exec_errno) {
    waitpid(pid, nullptr, 0);
    std::filesystem::remove_all(scratch);
    throw EnvironmentError("cannot start interpreter '" + exe + "': " +
                           std::strerror(exec_errno));
  }

  SetNonBlocking(out.fds[0]);
  SetNonBlocking(err.fds[0]);
  TailBuffer out_buf(config.capture_cap), err_buf(config.capture_cap);
  const auto deadline =
      start + std::chrono::duration_cast<Clock::duration>(
                  std::chrono::duration<double>(config.timeout_s));
  bool exited = false, timed_out = false;
  int status = 0;
  Clock::time_point exit_time;
  char chunk[65536];

  auto drain = [&](Pipe &p, TailBuffer &buf) {
    while (p.fds[0] >= 0) {
      const ssize_t n = read(p.fds[0], chunk, sizeof chunk);
      if (n > 0) {
        buf.Append(chunk, static_cast<size_t>(n));
        continue;
      }
      if (n == 0) p.CloseRead();
      if (n < 0 && errno == EINTR) continue;
      break;
    }
  };

  for (;;) {
    pollfd fds[2];
    int nfds = 0;
    if (out.fds[0] >= 0) fds[nfds++] = {out.fds[0], POLLIN, 0};
    if (err.fds[0] >= 0) fds[nfds++] = {err.fds[0], POLLIN, 0};
    if (nfds > 0) {
      poll(fds, nfds, 20);
    } else if (!exited) {
      usleep(5000);
    }
    drain(out, out_buf);
    drain(err, err_buf);

    if (!exited && waitpid(pid, &status, WNOHANG) == pid) {
      exited = true;
      exit_time = Clock::now();
      kill(-pid, SIGKILL);  // stray grandchildren
    }
    if (!exited && Clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      exited = timed_out = true;
      exit_time = Clock::now();
    }
    if (exited && (nfds == 0 || Clock::now() - exit_time > std::chrono::seconds(1))) break;
  }
  std::filesystem::remove_all(scratch);

  ExecutionOutcome o;
  o.wall_time_s = Seconds(exit_time - start);
  o.stdout_text = out_buf.Take();
  o.stderr_text = err_buf.Take();
  if (timed_out) {
    o.exit_status = ExitStatus::kTimedOut;
    o.exit_code = -1;
  } else if (WIFSIGNALED(status)) {
    o.exit_status = ExitStatus::kSignaled;
    o.signal_name = SignalName(WTERMSIG(status));
    o.exit_code = -1;
  } else {
    o.exit_code = WEXITSTATUS(status);
    o.exit_status = o.exit_code == 0 ? ExitStatus::kCleanExit : ExitStatus::kNonzeroExit;
  }
  return o;
}

PatternSet::PatternSet(const std::vector<std::string> &patterns) {
  for (const auto &p : patterns) {
    try {
      patterns_.emplace_back(p, std::regex(p, std::regex::ECMAScript));
    } catch (const std::regex_error &e) {
      throw ConfigError("bad runtime error pattern '" + p + "': " + e.what());
    }
  }
}

std::optional<std::string> PatternSet::FirstHit(std::string_view text) const {
  for (const auto &[source, re] : patterns_)
    if (std::regex_search(text.begin(), text.end(), re)) return source;
  return std::nullopt;
}

Classification Classify(const ExecutionOutcome &o, const PatternSet &patterns) {
  switch (o.exit_status) {
    case ExitStatus::kSignaled: {
      const std::string sig = o.signal_name.value_or("SIG?");
      return {FamilyOf(sig) == SignalFamily::kMemory ? OutcomeClass::kSegfault
                                                     : OutcomeClass::kAbortSignal,
              sig};
    }
    case ExitStatus::kTimedOut:
      return {OutcomeClass::kHang, "timeout"};
    case ExitStatus::kCleanExit:
    case ExitStatus::kNonzeroExit:
      if (auto hit = patterns.FirstHit(o.stderr_text))
        return {OutcomeClass::kRuntimeErrorPattern, *hit};
      if (o.exit_status == ExitStatus::kNonzeroExit)
        return {OutcomeClass::kGracefulRejection, "exit " + std::to_string(o.exit_code)};
      return {OutcomeClass::kSuccess, ""};
  }
  return {OutcomeClass::kSuccess, ""};
}

std::optional<std::vector<double>> ParseResultLine(std::string_view text) {
  std::optional<std::string> payload;
  for (const auto &line : Split(text, '\n')) {
    const std::string t = Trim(line);
    if (t.rfind(kResultPrefix, 0) == 0) payload = Trim(t.substr(kResultPrefix.size()));
  }
  if (!payload || payload->size() < 2 || payload->front() != '[' || payload->back() != ']')
    return std::nullopt;
  const std::string inner = Trim(payload->substr(1, payload->size() - 2));
  std::vector<double> values;
  if (inner.empty()) return values;
  for (const auto &item : Split(inner, ',')) {
    const std::string s = Trim(item);
    if (s.empty()) return std::nullopt;
    char *end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    values.push_back(v);
  }
  return values;
}

bool WithinTolerance(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

DeviceComparison CompareDevices(std::string_view program_text,
                                const std::filesystem::path &work_dir,
                                std::string_view file_stem, const TargetConfig &config,
                                WarningLog *warnings) {
  const PatternSet patterns(config.runtime_error_patterns);
  std::vector<std::string> devices = config.device_tokens;
  if (devices.empty()) devices.push_back(config.PrimaryDevice());
  std::filesystem::create_directories(work_dir);

  DeviceComparison result;
  std::vector<Classification> classes;
  for (const auto &device : devices) {
    const auto path = work_dir / (std::string(file_stem) + "." + device + config.program_extension);
    WriteFile(path, ReplaceAll(program_text, kDevicePlaceholder, device));
    result.runs.push_back(Execute(path, config));
    classes.push_back(Classify(result.runs.back(), patterns));
  }

  size_t worst = 0;
  for (size_t i = 1; i < classes.size(); ++i)
    if (Rank(classes[i].cls) > Rank(classes[worst].cls)) worst = i;
  if (classes[worst].cls != OutcomeClass::kSuccess || devices.size() < 2) {
    result.classification = classes[worst];
    return result;
  }

  const auto a = ParseResultLine(result.runs[0].stdout_text);
  const auto b = ParseResultLine(result.runs[1].stdout_text);
  const std::string mismatch = "RESULT mismatch between " + devices[0] + " and " + devices[1];
  if (!a && !b) {
    result.skipped = true;
    result.classification = {OutcomeClass::kSuccess, ""};
    if (warnings)
      warnings->Add("harness", std::string(file_stem),
                    "no parseable RESULT line on either device; comparison skipped");
    return result;
  }
  bool same = a && b && a->size() == b->size();
  for (size_t i = 0; same && i < a->size(); ++i)
    same = WithinTolerance((*a)[i], (*b)[i], config.consistency_tolerance);
  result.classification = same ? Classification{OutcomeClass::kSuccess, ""}
                               : Classification{OutcomeClass::kInconsistentOutput, mismatch};
  return result;
}

std::string Fingerprint(std::string_view api, OutcomeClass cls, std::string_view diagnostic) {
  return Sha256Hex(std::string(api) + "|" + std::string(ToString(cls)) + "|" +
                   std::string(diagnostic))
      .substr(0, 16);
}

std::vector<DedupedBug> Dedupe(const std::vector<BugReport> &reports) {
  std::vector<DedupedBug> out;
  std::unordered_map<std::string, size_t> index;
  for (const auto &r : reports) {
    auto [it, inserted] = index.emplace(r.fingerprint, out.size());
    if (inserted) out.push_back({r, 0});
    ++out[it->second].count;
  }
  return out;
}

}  // namespace edgefuzz::harness
