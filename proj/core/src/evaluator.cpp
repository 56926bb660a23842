// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "lcsc/evaluator.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <system_error>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lcsc/checkpoint_store.hpp"
#include "lcsc/error.hpp"

extern char** environ;

namespace lcsc {

namespace {

std::atomic<std::uint64_t> g_temp_counter{0};

class TempFile {
 public:
  explicit TempFile(std::filesystem::path path) : path_(std::move(path)) {}
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_.data(), O_CLOEXEC) != 0) throw std::system_error(errno, std::generic_category(), "pipe2");
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;
  ~Pipe() {
    close_read();
    close_write();
  }
  int read_end() const noexcept { return fds_[0]; }
  int write_end() const noexcept { return fds_[1]; }
  void close_read() noexcept { close_fd(fds_[0]); }
  void close_write() noexcept { close_fd(fds_[1]); }

 private:
  static void close_fd(int& fd) noexcept {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
  std::array<int, 2> fds_{-1, -1};
};

struct ProcessResult {
  int status = 0;
  std::string out;
  std::string err;
};

std::string tail(const std::string& text, std::size_t max_len = 2000) {
  return text.size() <= max_len ? text : "..." + text.substr(text.size() - max_len);
}

ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::milliseconds timeout) {
  Pipe out_pipe;
  Pipe err_pipe;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, out_pipe.write_end(), STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err_pipe.write_end(), STDERR_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, args[0], &actions, &attr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) throw EvaluatorError(fmt::format("cannot start '{}': {}", argv.front(), std::strerror(rc)));

  out_pipe.close_write();
  err_pipe.close_write();

  ProcessResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::array<pollfd, 2> fds{pollfd{out_pipe.read_end(), POLLIN, 0}, pollfd{err_pipe.read_end(), POLLIN, 0}};
  std::array<std::string*, 2> sinks{&result.out, &result.err};
  std::array<char, 4096> buf{};
  bool timed_out = false;

  while (fds[0].fd >= 0 || fds[1].fd >= 0) {
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      timed_out = true;
      break;
    }
    const int ready = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(remaining.count(), 1000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || fds[i].revents == 0) continue;
      const ssize_t n = ::read(fds[i].fd, buf.data(), buf.size());
      if (n > 0) {
        sinks[i]->append(buf.data(), static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        fds[i].fd = -1;
      }
    }
  }

  if (timed_out) ::kill(-pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (timed_out)
    throw EvaluatorError(fmt::format("evaluator timed out after {} ms; stderr: {}", timeout.count(), tail(result.err)));
  result.status = status;
  return result;
}

}  // namespace

double eval_quadratic(const TensorMap& weights, const TensorMap& target, double curvature) {
  if (weights.size() != target.size())
    throw ConfigError(fmt::format("quadratic target has {} tensors, weights have {}", target.size(), weights.size()));
  double sum = 0.0;
  for (const auto& [name, t] : weights) {
    if (!target.contains(name)) throw ConfigError(fmt::format("quadratic target lacks tensor '{}'", name));
    const auto& ref = target.at(name);
    if (ref.shape != t.shape) throw ConfigError(fmt::format("quadratic target shape differs for '{}'", name));
    for (std::size_t j = 0; j < t.data.size(); ++j) {
      const double d = static_cast<double>(t.data[j]) - static_cast<double>(ref.data[j]);
      sum += d * d;
    }
  }
  return 0.5 * curvature * sum;
}

QuadraticEvaluator::QuadraticEvaluator(TensorMap target, double curvature)
    : target_(std::move(target)), curvature_(curvature) {
  if (!(curvature > 0.0) || !std::isfinite(curvature))
    throw ConfigError(fmt::format("quadratic curvature {} must be positive", curvature));
}

QuadraticEvaluator QuadraticEvaluator::centered(const Schema& schema, double curvature) {
  TensorMap target;
  for (const auto& spec : schema)
    target.insert(spec.name, Tensor{spec.dtype, spec.shape, std::vector<float>(shape_numel(spec.shape), 0.0f)});
  return QuadraticEvaluator(std::move(target), curvature);
}

double QuadraticEvaluator::evaluate(const TensorMap& weights) const {
  return eval_quadratic(weights, target_, curvature_);
}

std::chrono::milliseconds timeout_from_env(std::chrono::milliseconds fallback) {
  const char* raw = std::getenv(kTimeoutEnvVar);
  if (raw == nullptr || *raw == '\0') return fallback;
  char* end = nullptr;
  const double secs = std::strtod(raw, &end);
  if (end == raw || *end != '\0' || !(secs > 0.0) || !std::isfinite(secs))
    throw ConfigError(fmt::format("{}='{}' is not a positive number of seconds", kTimeoutEnvVar, raw));
  return std::chrono::milliseconds(static_cast<long long>(std::ceil(secs * 1000.0)));
}

double parse_metric_output(const std::string& stdout_text) {
  std::size_t end = stdout_text.find_last_not_of(" \t\r\n");
  if (end == std::string::npos) throw EvaluatorError("evaluator printed nothing on stdout");
  const std::size_t begin = stdout_text.rfind('\n', end);
  const std::string line = stdout_text.substr(begin == std::string::npos ? 0 : begin + 1, end + 1 - (begin == std::string::npos ? 0 : begin + 1));

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw EvaluatorError(fmt::format("last stdout line is not JSON: '{}'", line));
  }
  if (!j.is_object() || !j.contains("metric") || !j["metric"].is_number())
    throw EvaluatorError(fmt::format("last stdout line lacks a numeric \"metric\": '{}'", line));
  const double metric = j["metric"].get<double>();
  if (!std::isfinite(metric)) throw EvaluatorError(fmt::format("metric is not finite: '{}'", line));
  return metric;
}

ExternalEvaluator::ExternalEvaluator(ExternalCommand command) : command_(std::move(command)) {
  if (command_.argv.empty() || command_.argv.front().empty()) throw ConfigError("evaluator command is empty");
  bool has_placeholder = false;
  for (const auto& a : command_.argv) has_placeholder |= a.find(kCheckpointPlaceholder) != std::string::npos;
  if (!has_placeholder)
    throw ConfigError(fmt::format("evaluator command must contain the {} placeholder", kCheckpointPlaceholder));
  command_.timeout = timeout_from_env(command_.timeout);
  if (command_.timeout.count() <= 0) throw ConfigError("evaluator timeout must be positive");
  if (command_.workdir.empty()) command_.workdir = std::filesystem::temp_directory_path();
  std::error_code ec;
  std::filesystem::create_directories(command_.workdir, ec);
  if (ec) throw IoError(fmt::format("cannot create evaluator workdir '{}': {}", command_.workdir.string(), ec.message()));
}

double ExternalEvaluator::evaluate(const TensorMap& weights) const {
  const std::uint64_t local = counter_.fetch_add(1);
  const std::uint64_t global = g_temp_counter.fetch_add(1);
  TempFile file(command_.workdir / fmt::format("lcsc-eval-{}-{}-{}.safetensors", ::getpid(), global, local));
  save_checkpoint(file.path(), weights);

  std::vector<std::string> argv;
  for (const auto& a : command_.argv) {
    std::string arg = a;
    for (auto pos = arg.find(kCheckpointPlaceholder); pos != std::string::npos;
         pos = arg.find(kCheckpointPlaceholder, pos + file.path().string().size()))
      arg.replace(pos, kCheckpointPlaceholder.size(), file.path().string());
    argv.push_back(std::move(arg));
  }
  if (argv.size() == 1) argv = {"/bin/sh", "-c", argv.front()};

  const ProcessResult result = run_process(argv, command_.timeout);
  if (WIFSIGNALED(result.status))
    throw EvaluatorError(fmt::format("evaluator killed by signal {}; stderr: {}", WTERMSIG(result.status), tail(result.err)));
  if (!WIFEXITED(result.status) || WEXITSTATUS(result.status) != 0)
    throw EvaluatorError(
        fmt::format("evaluator exited with status {}; stderr: {}", WEXITSTATUS(result.status), tail(result.err)));
  return parse_metric_output(result.out);
}

double eval_external(const TensorMap& weights, const ExternalCommand& command) {
  return ExternalEvaluator(command).evaluate(weights);
}

}  // namespace lcsc
