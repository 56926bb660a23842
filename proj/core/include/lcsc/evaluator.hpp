// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar quality functionals over merged weights. Lower is better.
// Implementations must be deterministic and safe to call concurrently.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lcsc/tensor_map.hpp"

namespace lcsc {

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual double evaluate(const TensorMap& weights) const = 0;
};

/// (curvature / 2) * ||weights - target||^2 over all tensors.
class QuadraticEvaluator final : public Evaluator {
 public:
  QuadraticEvaluator(TensorMap target, double curvature);

  /// Target of zeros shaped like `schema`.
  static QuadraticEvaluator centered(const Schema& schema, double curvature);

  double evaluate(const TensorMap& weights) const override;

  const TensorMap& target() const noexcept { return target_; }
  double curvature() const noexcept { return curvature_; }

 private:
  TensorMap target_;
  double curvature_;
};

double eval_quadratic(const TensorMap& weights, const TensorMap& target, double curvature);

/// Wraps a callable; used for fixtures and adapters.
class FunctionEvaluator final : public Evaluator {
 public:
  explicit FunctionEvaluator(std::function<double(const TensorMap&)> fn) : fn_(std::move(fn)) {}
  double evaluate(const TensorMap& weights) const override { return fn_(weights); }

 private:
  std::function<double(const TensorMap&)> fn_;
};

/// Placeholder substituted with the temporary container path.
inline constexpr std::string_view kCheckpointPlaceholder = "{checkpoint}";

/// Environment variable overriding the external evaluator timeout (seconds).
inline constexpr const char* kTimeoutEnvVar = "LCSC_EVAL_TIMEOUT_SECS";

inline constexpr std::chrono::seconds kDefaultEvalTimeout{3600};

struct ExternalCommand {
  /// argv template. A single element is run through /bin/sh -c.
  std::vector<std::string> argv;
  std::filesystem::path workdir;
  std::chrono::milliseconds timeout = kDefaultEvalTimeout;
};

/// Timeout from LCSC_EVAL_TIMEOUT_SECS if set, else `fallback`. The
/// ExternalEvaluator constructor applies this to its command.
std::chrono::milliseconds timeout_from_env(std::chrono::milliseconds fallback);

/// Runs an external metric process per evaluation:
///   1. writes the weights to a fresh container in workdir,
///   2. substitutes its path for {checkpoint} and runs the command,
///   3. parses the last stdout line as {"metric": <finite number>},
///   4. removes the container, on success and on failure.
class ExternalEvaluator final : public Evaluator {
 public:
  explicit ExternalEvaluator(ExternalCommand command);

  double evaluate(const TensorMap& weights) const override;

  std::uint64_t invocations() const noexcept { return counter_.load(); }

 private:
  ExternalCommand command_;
  mutable std::atomic<std::uint64_t> counter_{0};
};

double eval_external(const TensorMap& weights, const ExternalCommand& command);

/// Parses the evaluator protocol: last non-empty line of `stdout_text` must
/// be a JSON object with a finite numeric "metric". Throws EvaluatorError.
double parse_metric_output(const std::string& stdout_text);

}  // namespace lcsc
